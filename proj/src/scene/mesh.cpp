#include "meshloc/scene/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "meshloc/common/errors.hpp"

namespace meshloc::scene {

namespace {

struct HeaderInfo {
  long vertex_count = -1;
  long face_count = -1;
  std::vector<std::string> vertex_props;
  long header_end_line = 0;
};

bool is_known_scalar_type(const std::string& t) {
  return t == "float" || t == "double" || t == "float32" || t == "float64";
}

HeaderInfo parse_header(std::istream& is, const std::string& path, long& line_no) {
  HeaderInfo info;
  std::string line;
  auto next_line = [&](std::string& out) {
    if (!std::getline(is, out)) throw ParseError(path, line_no, "unexpected end of header");
    ++line_no;
  };

  next_line(line);
  if (line != "ply") throw ParseError(path, line_no, "expected 'ply' magic, got '" + line + "'");
  next_line(line);
  if (line != "format ascii 1.0")
    throw ParseError(path, line_no, "unsupported format line '" + line + "'");

  std::string current_element;
  while (true) {
    next_line(line);
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "end_header") break;
    if (tok == "element") {
      std::string name;
      long count = -1;
      if (!(ls >> name >> count) || count < 0)
        throw ParseError(path, line_no, "malformed element line '" + line + "'");
      current_element = name;
      if (name == "vertex")
        info.vertex_count = count;
      else if (name == "face")
        info.face_count = count;
      else
        throw ParseError(path, line_no, "unknown element '" + name + "'");
      continue;
    }
    if (tok == "property") {
      if (current_element == "vertex") {
        std::string type, name;
        if (!(ls >> type >> name) || !is_known_scalar_type(type))
          throw ParseError(path, line_no, "malformed vertex property '" + line + "'");
        info.vertex_props.push_back(name);
      } else if (current_element == "face") {
        std::string list, ctype, itype, name;
        if (!(ls >> list >> ctype >> itype >> name) || list != "list")
          throw ParseError(path, line_no, "malformed face property '" + line + "'");
      } else {
        throw ParseError(path, line_no, "property outside element");
      }
      continue;
    }
    throw ParseError(path, line_no, "unrecognized header line '" + line + "'");
  }
  if (info.vertex_count < 0) throw ParseError(path, line_no, "header missing vertex element");
  if (info.face_count < 0) info.face_count = 0;
  info.header_end_line = line_no;
  return info;
}

int prop_index(const std::vector<std::string>& props, const std::string& name) {
  auto it = std::find(props.begin(), props.end(), name);
  return it == props.end() ? -1 : static_cast<int>(it - props.begin());
}

}  // namespace

TriangleMesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open mesh file");
  long line_no = 0;
  const HeaderInfo header = parse_header(is, path, line_no);

  const auto& props = header.vertex_props;
  const int ix = prop_index(props, "x"), iy = prop_index(props, "y"), iz = prop_index(props, "z");
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError(path, header.header_end_line, "vertex element must carry x y z");
  const int inx = prop_index(props, "nx"), iny = prop_index(props, "ny"),
            inz = prop_index(props, "nz");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  const int ir = prop_index(props, "r"), ig = prop_index(props, "g"), ib = prop_index(props, "b");
  const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;
  const int isr = prop_index(props, "sr"), isg = prop_index(props, "sg"),
            isb = prop_index(props, "sb");
  const bool has_semantics = isr >= 0 && isg >= 0 && isb >= 0;

  TriangleMesh mesh;
  const long V = header.vertex_count;
  mesh.positions.resize(V, 3);
  mesh.normals = Eigen::MatrixX3d::Zero(V, 3);
  mesh.colors = Eigen::MatrixX3d::Constant(V, 3, 0.5);
  mesh.semantics = Eigen::MatrixX3d::Zero(V, 3);

  std::string line;
  std::vector<double> row(props.size());
  for (long v = 0; v < V; ++v) {
    if (!std::getline(is, line))
      throw ParseError(path, line_no, "vertex body ended after " + std::to_string(v) + " of " +
                                          std::to_string(V) + " vertices");
    ++line_no;
    std::istringstream ls(line);
    for (std::size_t p = 0; p < props.size(); ++p)
      if (!(ls >> row[p]))
        throw ParseError(path, line_no, "expected " + std::to_string(props.size()) +
                                            " vertex values, line '" + line + "'");
    for (double d : row)
      if (!std::isfinite(d)) throw ParseError(path, line_no, "non-finite vertex value");
    mesh.positions.row(v) << row[ix], row[iy], row[iz];
    if (has_normals) mesh.normals.row(v) << row[inx], row[iny], row[inz];
    if (has_colors) mesh.colors.row(v) << row[ir], row[ig], row[ib];
    if (has_semantics) mesh.semantics.row(v) << row[isr], row[isg], row[isb];
  }

  mesh.faces.resize(header.face_count, 3);
  for (long f = 0; f < header.face_count; ++f) {
    if (!std::getline(is, line))
      throw ParseError(path, line_no, "face body ended after " + std::to_string(f) + " of " +
                                          std::to_string(header.face_count) + " faces");
    ++line_no;
    std::istringstream ls(line);
    long n = 0;
    if (!(ls >> n) || n != 3)
      throw ParseError(path, line_no, "only triangular faces are supported, line '" + line + "'");
    for (int k = 0; k < 3; ++k) {
      long idx = -1;
      if (!(ls >> idx)) throw ParseError(path, line_no, "malformed face line '" + line + "'");
      if (idx < 0 || idx >= V)
        throw ParseError(path, line_no,
                         "face index " + std::to_string(idx) + " out of range [0," +
                             std::to_string(V) + ")");
      mesh.faces(f, k) = static_cast<int>(idx);
    }
  }

  {
    // reject trailing garbage rows (count mismatch between header and body)
    std::string rest;
    while (std::getline(is, rest)) {
      ++line_no;
      if (!rest.empty() && rest.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(path, line_no, "unexpected extra data after declared elements");
    }
  }

  if (has_normals) {
    for (long v = 0; v < V; ++v) {
      const double n = mesh.normals.row(v).norm();
      if (std::abs(n - 1.0) > 1e-6)
        throw ParseError(path, header.header_end_line + 1 + v,
                         "vertex normal is not unit length (|n|=" + std::to_string(n) + ")");
    }
  } else {
    mesh.normals = compute_vertex_normals(mesh.positions, mesh.faces);
  }

  for (long v = 0; v < V; ++v)
    for (int k = 0; k < 3; ++k) {
      if (mesh.colors(v, k) < 0.0 || mesh.colors(v, k) > 1.0)
        throw ParseError(path, header.header_end_line + 1 + v, "vertex color outside [0,1]");
      if (mesh.semantics(v, k) < 0.0 || mesh.semantics(v, k) > 1.0)
        throw ParseError(path, header.header_end_line + 1 + v, "vertex semantic outside [0,1]");
    }

  mesh.vertex_static.assign(static_cast<std::size_t>(V), 1);
  return mesh;
}

void save_mesh(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "ply\nformat ascii 1.0\n";
  os << "element vertex " << mesh.vertex_count() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "r", "g", "b", "sr", "sg", "sb"})
    os << "property double " << p << "\n";
  os << "element face " << mesh.face_count() << "\n";
  os << "property list uchar int vertex_indices\n";
  os << "end_header\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const double vals[12] = {mesh.positions(v, 0), mesh.positions(v, 1), mesh.positions(v, 2),
                             mesh.normals(v, 0),   mesh.normals(v, 1),   mesh.normals(v, 2),
                             mesh.colors(v, 0),    mesh.colors(v, 1),    mesh.colors(v, 2),
                             mesh.semantics(v, 0), mesh.semantics(v, 1), mesh.semantics(v, 2)};
    for (int k = 0; k < 12; ++k) {
      if (k) os << ' ';
      put(vals[k]);
    }
    os << '\n';
  }
  for (int f = 0; f < mesh.face_count(); ++f)
    os << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  if (!os) throw DataError(path + ": write failed");
}

Eigen::MatrixX3d compute_vertex_normals(const Eigen::MatrixX3d& positions,
                                        const Eigen::MatrixX3i& faces) {
  Eigen::MatrixX3d normals = Eigen::MatrixX3d::Zero(positions.rows(), 3);
  for (int f = 0; f < faces.rows(); ++f) {
    const Eigen::Vector3d a = positions.row(faces(f, 0));
    const Eigen::Vector3d b = positions.row(faces(f, 1));
    const Eigen::Vector3d c = positions.row(faces(f, 2));
    const Eigen::Vector3d fn = (b - a).cross(c - a);  // magnitude = 2 * area
    for (int k = 0; k < 3; ++k) normals.row(faces(f, k)) += fn.transpose();
  }
  for (int v = 0; v < normals.rows(); ++v) {
    const double n = normals.row(v).norm();
    if (n > 1e-20)
      normals.row(v) /= n;
    else
      normals.row(v) << 0, 0, 1;
  }
  return normals;
}

void derive_static_flags(TriangleMesh& mesh, const std::vector<PaletteEntry>& palette) {
  if (palette.empty()) throw DataError("derive_static_flags: empty semantic palette");
  mesh.vertex_static.assign(static_cast<std::size_t>(mesh.vertex_count()), 1);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    double best = std::numeric_limits<double>::max();
    bool dynamic = false;
    for (const auto& entry : palette) {
      const double d = (mesh.semantics.row(v).transpose() - entry.color).squaredNorm();
      if (d < best) {
        best = d;
        dynamic = entry.dynamic;
      }
    }
    mesh.vertex_static[static_cast<std::size_t>(v)] = dynamic ? 0 : 1;
  }
}

std::pair<TriangleMesh, NormalizationParams> normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.vertex_count() == 0)
    throw DataError("normalize_mesh: mesh has no vertices");
  NormalizationParams params;
  const Eigen::Vector3d lo = mesh.positions.colwise().minCoeff();
  const Eigen::Vector3d hi = mesh.positions.colwise().maxCoeff();
  params.center = 0.5 * (lo + hi);
  const double extent =
      (mesh.positions.rowwise() - params.center.transpose()).cwiseAbs().maxCoeff();
  params.scale = extent > 1e-12 ? extent : 1.0;

  TriangleMesh out = mesh;
  out.positions = (mesh.positions.rowwise() - params.center.transpose()) / params.scale;
  return {std::move(out), params};
}

std::vector<std::vector<int>> build_adjacency(const TriangleMesh& mesh) {
  std::vector<std::set<int>> nbr(static_cast<std::size_t>(mesh.vertex_count()));
  for (int f = 0; f < mesh.face_count(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    if (a != b) { nbr[a].insert(b); nbr[b].insert(a); }
    if (b != c) { nbr[b].insert(c); nbr[c].insert(b); }
    if (a != c) { nbr[a].insert(c); nbr[c].insert(a); }
  }
  std::vector<std::vector<int>> out(nbr.size());
  for (std::size_t v = 0; v < nbr.size(); ++v) out[v].assign(nbr[v].begin(), nbr[v].end());
  return out;
}

}  // namespace meshloc::scene
