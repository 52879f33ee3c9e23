#include "meshloc/io/pose_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "meshloc/common/errors.hpp"

namespace meshloc::io {

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_pose_blocks(const std::string& path, const std::vector<scene::RigidTransform>& poses) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  for (const auto& pose : poses) {
    const Eigen::Matrix4d m = pose.matrix();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (c) os << ' ';
        put(os, m(r, c));
      }
      os << '\n';
    }
  }
  if (!os) throw DataError(path + ": write failed");
}

std::vector<scene::RigidTransform> read_pose_blocks(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open");
  std::vector<double> values;
  double v;
  while (is >> v) values.push_back(v);
  if (values.size() % 16 != 0)
    throw DataError(path + ": pose file must hold 4x4 blocks, got " +
                    std::to_string(values.size()) + " values");
  std::vector<scene::RigidTransform> poses;
  for (std::size_t k = 0; k < values.size(); k += 16) {
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = values[k + static_cast<std::size_t>(r * 4 + c)];
    poses.push_back(scene::RigidTransform::from_matrix(m));
  }
  return poses;
}

void write_pose_estimates(const std::string& path, const std::vector<PoseEstimate>& estimates) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  for (const auto& e : estimates) {
    os << e.frame_id;
    if (!e.pose) {
      os << " nan\n";
      continue;
    }
    const Eigen::Matrix4d m = e.pose->matrix();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        os << ' ';
        put(os, m(r, c));
      }
    os << '\n';
  }
  if (!os) throw DataError(path + ": write failed");
}

std::vector<PoseEstimate> read_pose_estimates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open");
  std::vector<PoseEstimate> out;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    PoseEstimate e;
    if (!(ls >> e.frame_id)) throw ParseError(path, line_no, "missing frame id");
    std::string first;
    if (!(ls >> first)) throw ParseError(path, line_no, "missing pose data");
    if (first == "nan") {
      out.push_back(e);
      continue;
    }
    Eigen::Matrix4d m;
    std::istringstream fs(first);
    if (!(fs >> m(0, 0))) throw ParseError(path, line_no, "malformed pose value");
    for (int k = 1; k < 16; ++k)
      if (!(ls >> m(k / 4, k % 4))) throw ParseError(path, line_no, "expected 16 pose values");
    e.pose = scene::RigidTransform::from_matrix(m);
    out.push_back(e);
  }
  return out;
}

}  // namespace meshloc::io
