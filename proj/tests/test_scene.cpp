#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "meshloc/common/errors.hpp"
#include "meshloc/common/rng.hpp"
#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/mesh.hpp"

using namespace meshloc;
using namespace meshloc::scene;

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "meshloc_scene_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p);
  os << content;
}

TriangleMesh random_mesh(int vertices, int faces, Rng& rng) {
  TriangleMesh m;
  m.positions.resize(vertices, 3);
  for (int v = 0; v < vertices; ++v)
    m.positions.row(v) << rng.uniform(-3, 5), rng.uniform(-2, 2), rng.uniform(0, 7);
  m.colors = (Eigen::MatrixX3d::Random(vertices, 3).array() * 0.5 + 0.5).matrix();
  m.semantics = (Eigen::MatrixX3d::Random(vertices, 3).array() * 0.5 + 0.5).matrix();
  m.faces.resize(faces, 3);
  for (int f = 0; f < faces; ++f) {
    int a = static_cast<int>(rng.index(vertices));
    int b = static_cast<int>(rng.index(vertices));
    int c = static_cast<int>(rng.index(vertices));
    while (b == a) b = static_cast<int>(rng.index(vertices));
    while (c == a || c == b) c = static_cast<int>(rng.index(vertices));
    m.faces.row(f) << a, b, c;
  }
  m.normals = compute_vertex_normals(m.positions, m.faces);
  m.vertex_static.assign(vertices, 1);
  return m;
}

RigidTransform random_transform(Rng& rng) {
  RigidTransform t;
  t.rotation = rotation_zyx(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3));
  t.translation << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
  return t;
}

}  // namespace

TEST_CASE("load_mesh: minimal one-triangle file") {
  const auto p = temp_file("tri.ply");
  write_file(p,
             "ply\nformat ascii 1.0\n"
             "element vertex 3\nproperty double x\nproperty double y\nproperty double z\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n0 1 0\n"
             "3 0 1 2\n");
  TriangleMesh m = load_mesh(p.string());
  CHECK(m.vertex_count() == 3);
  CHECK(m.face_count() == 1);
  // normals recomputed from the face (z up for this winding)
  for (int v = 0; v < 3; ++v) {
    CHECK(m.normals.row(v).norm() == doctest::Approx(1.0));
    CHECK(m.normals(v, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("load_mesh: header/body count mismatch is an error") {
  const auto p = temp_file("short.ply");
  write_file(p,
             "ply\nformat ascii 1.0\n"
             "element vertex 4\nproperty double x\nproperty double y\nproperty double z\n"
             "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n0 1 0\n");
  CHECK_THROWS_AS(load_mesh(p.string()), ParseError);

  const auto p2 = temp_file("long.ply");
  write_file(p2,
             "ply\nformat ascii 1.0\n"
             "element vertex 2\nproperty double x\nproperty double y\nproperty double z\n"
             "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n0 1 0\n");
  CHECK_THROWS_AS(load_mesh(p2.string()), ParseError);
}

TEST_CASE("load_mesh: malformed input errors carry line numbers") {
  const auto p = temp_file("bad_index.ply");
  write_file(p,
             "ply\nformat ascii 1.0\n"
             "element vertex 3\nproperty double x\nproperty double y\nproperty double z\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n0 1 0\n"
             "3 0 1 7\n");
  try {
    load_mesh(p.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 13);
    CHECK(std::string(e.what()).find("out of range") != std::string::npos);
  }

  const auto p2 = temp_file("nonfinite.ply");
  write_file(p2,
             "ply\nformat ascii 1.0\n"
             "element vertex 1\nproperty double x\nproperty double y\nproperty double z\n"
             "end_header\n"
             "0 nan 0\n");
  CHECK_THROWS_AS(load_mesh(p2.string()), ParseError);

  const auto p3 = temp_file("badheader.ply");
  write_file(p3, "ply\nformat binary 1.0\n");
  CHECK_THROWS_AS(load_mesh(p3.string()), ParseError);
}

TEST_CASE("mesh save/load round trip is bit-exact") {
  Rng rng(101);
  TriangleMesh m = random_mesh(24, 30, rng);
  const auto p = temp_file("roundtrip.ply");
  save_mesh(p.string(), m);
  TriangleMesh r = load_mesh(p.string());
  REQUIRE(r.vertex_count() == m.vertex_count());
  REQUIRE(r.face_count() == m.face_count());
  CHECK((r.positions.array() == m.positions.array()).all());
  CHECK((r.normals.array() == m.normals.array()).all());
  CHECK((r.colors.array() == m.colors.array()).all());
  CHECK((r.semantics.array() == m.semantics.array()).all());
  CHECK((r.faces.array() == m.faces.array()).all());
}

TEST_CASE("normalize_mesh") {
  SUBCASE("cube spanning [0,2]^3 maps to [-1,1]^3") {
    TriangleMesh m;
    m.positions.resize(8, 3);
    int r = 0;
    for (int x = 0; x <= 1; ++x)
      for (int y = 0; y <= 1; ++y)
        for (int z = 0; z <= 1; ++z) m.positions.row(r++) << 2.0 * x, 2.0 * y, 2.0 * z;
    m.normals = Eigen::MatrixX3d::Zero(8, 3);
    m.normals.col(2).setOnes();
    m.colors = Eigen::MatrixX3d::Zero(8, 3);
    m.semantics = Eigen::MatrixX3d::Zero(8, 3);
    m.faces.resize(0, 3);
    auto [n, params] = normalize_mesh(m);
    CHECK(params.center.isApprox(Eigen::Vector3d(1, 1, 1)));
    CHECK(params.scale == doctest::Approx(1.0));
    CHECK(n.positions.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  }
  SUBCASE("single vertex degenerates to the origin with scale 1") {
    TriangleMesh m;
    m.positions.resize(1, 3);
    m.positions.row(0) << 5, 5, 5;
    m.normals = Eigen::MatrixX3d::Zero(1, 3);
    m.colors = m.normals;
    m.semantics = m.normals;
    m.faces.resize(0, 3);
    auto [n, params] = normalize_mesh(m);
    CHECK(params.scale == 1.0);
    CHECK(n.positions.row(0).norm() == 0.0);
  }
  SUBCASE("random mesh: max |coordinate| is exactly 1 and the map is idempotent") {
    Rng rng(7);
    TriangleMesh m = random_mesh(50, 40, rng);
    auto [n, params] = normalize_mesh(m);
    CHECK(std::abs(n.positions.cwiseAbs().maxCoeff() - 1.0) < 1e-12);
    auto [n2, params2] = normalize_mesh(n);
    CHECK(std::abs(params2.scale - 1.0) < 1e-12);
    CHECK(params2.center.norm() < 1e-12);
    // round trip to original coordinates
    for (int v = 0; v < m.vertex_count(); ++v) {
      const Eigen::Vector3d back = params.to_original(n.positions.row(v).transpose());
      CHECK((back - m.positions.row(v).transpose()).norm() < 1e-12);
    }
  }
}

TEST_CASE("build_adjacency") {
  SUBCASE("one triangle: each vertex has the other two") {
    TriangleMesh m;
    m.positions = Eigen::MatrixX3d::Zero(3, 3);
    m.faces.resize(1, 3);
    m.faces.row(0) << 0, 1, 2;
    auto adj = build_adjacency(m);
    for (int v = 0; v < 3; ++v) CHECK(adj[v].size() == 2);
  }
  SUBCASE("shared edge appears once per endpoint") {
    TriangleMesh m;
    m.positions = Eigen::MatrixX3d::Zero(4, 3);
    m.faces.resize(2, 3);
    m.faces.row(0) << 0, 1, 2;
    m.faces.row(1) << 1, 2, 3;  // shares edge (1,2)
    auto adj = build_adjacency(m);
    CHECK(adj[1] == std::vector<int>{0, 2, 3});
    CHECK(adj[2] == std::vector<int>{0, 1, 3});
  }
  SUBCASE("random mesh adjacency is symmetric and self-loop free") {
    Rng rng(13);
    TriangleMesh m = random_mesh(40, 60, rng);
    auto adj = build_adjacency(m);
    for (int i = 0; i < 40; ++i)
      for (int j : adj[i]) {
        CHECK(j != i);
        CHECK(std::find(adj[j].begin(), adj[j].end(), i) != adj[j].end());
      }
  }
}

TEST_CASE("rigid transforms") {
  SUBCASE("identity and pure translation") {
    RigidTransform id;
    CHECK(id.apply({1, 2, 3}).isApprox(Eigen::Vector3d(1, 2, 3)));
    RigidTransform t;
    t.translation << 1, 0, 0;
    CHECK(t.apply({0, 0, 0}).isApprox(Eigen::Vector3d(1, 0, 0)));
  }
  SUBCASE("compose with inverse recovers points") {
    Rng rng(19);
    for (int k = 0; k < 20; ++k) {
      RigidTransform t = random_transform(rng);
      RigidTransform round = RigidTransform::compose(t, t.inverse());
      const Eigen::Vector3d p(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
      CHECK((round.apply(p) - p).norm() < 1e-9);
    }
  }
  SUBCASE("pairwise distances are preserved") {
    Rng rng(23);
    for (int k = 0; k < 50; ++k) {
      RigidTransform t = random_transform(rng);
      const Eigen::Vector3d p(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
      const Eigen::Vector3d q(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
      CHECK(std::abs((p - q).norm() - (t.apply(p) - t.apply(q)).norm()) < 1e-9);
    }
  }
  SUBCASE("4x4 matrix round trip and rigidity check") {
    Rng rng(29);
    RigidTransform t = random_transform(rng);
    CHECK(t.is_rigid());
    RigidTransform r = RigidTransform::from_matrix(t.matrix());
    CHECK(r.rotation.isApprox(t.rotation));
    CHECK(r.translation.isApprox(t.translation));
  }
}

TEST_CASE("pinhole projection") {
  PinholeCamera cam{320.0, 320.0, 256.0, 144.0, 512, 288};
  REQUIRE(cam.valid());
  RigidTransform identity;

  SUBCASE("point on the optical axis lands on the principal point") {
    auto p = project_point(cam, identity, {0, 0, 2.5});
    REQUIRE(p.has_value());
    CHECK(p->u == doctest::Approx(cam.cx));
    CHECK(p->v == doctest::Approx(cam.cy));
    CHECK(p->depth == doctest::Approx(2.5));
  }
  SUBCASE("points behind the camera or outside the frame are absent") {
    CHECK_FALSE(project_point(cam, identity, {0, 0, -1}).has_value());
    CHECK_FALSE(project_point(cam, identity, {100, 0, 1}).has_value());
  }
  SUBCASE("backproject trivia and errors") {
    const Eigen::Vector3d p = backproject_pixel(cam, cam.cx, cam.cy, 1.0);
    CHECK(p.isApprox(Eigen::Vector3d(0, 0, 1)));
    CHECK_THROWS_AS(backproject_pixel(cam, 10, 10, 0.0), std::invalid_argument);
  }
  SUBCASE("project then backproject returns the camera-space point") {
    Rng rng(31);
    for (int k = 0; k < 100; ++k) {
      RigidTransform t = random_transform(rng);
      const Eigen::Vector3d world(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
      auto proj = project_point(cam, t, world);
      if (!proj) continue;
      const Eigen::Vector3d cam_pt = backproject_pixel(cam, proj->u, proj->v, proj->depth);
      CHECK((cam_pt - t.apply(world)).norm() < 1e-9);
    }
  }
}

TEST_CASE("derive_static_flags uses the nearest palette entry") {
  TriangleMesh m;
  m.positions = Eigen::MatrixX3d::Zero(2, 3);
  m.normals = m.positions;
  m.colors = m.positions;
  m.semantics.resize(2, 3);
  m.semantics.row(0) << 0.9, 0.1, 0.1;  // near "movable"
  m.semantics.row(1) << 0.1, 0.9, 0.1;  // near "wall"
  std::vector<PaletteEntry> palette = {{"movable", {1.0, 0.0, 0.0}, true},
                                       {"wall", {0.0, 1.0, 0.0}, false}};
  derive_static_flags(m, palette);
  CHECK(m.vertex_static[0] == 0);
  CHECK(m.vertex_static[1] == 1);
}
