#include "meshloc/synth/scene_gen.hpp"

#include <cmath>

#include "meshloc/common/errors.hpp"
#include "meshloc/common/rng.hpp"

namespace meshloc::synth {

using scene::RigidTransform;

namespace {

struct MeshBuilder {
  std::vector<Eigen::Vector3d> positions, normals, colors, semantics;
  std::vector<Eigen::Vector3i> faces;

  int add_vertex(const Eigen::Vector3d& p, const Eigen::Vector3d& n, const Eigen::Vector3d& c,
                 const Eigen::Vector3d& s) {
    positions.push_back(p);
    normals.push_back(n);
    colors.push_back(c.cwiseMax(0.0).cwiseMin(1.0));
    semantics.push_back(s);
    return static_cast<int>(positions.size()) - 1;
  }

  /// Subdivided rectangle: origin plus two edge vectors, normal = eu x ev
  /// normalized. Vertex colors follow a checker pattern over the base color.
  void add_quad(const Eigen::Vector3d& origin, const Eigen::Vector3d& eu,
                const Eigen::Vector3d& ev, double target_edge, const Eigen::Vector3d& base_color,
                const Eigen::Vector3d& accent_color, const Eigen::Vector3d& semantic,
                double checker_cells) {
    const int nu = std::max(1, static_cast<int>(std::ceil(eu.norm() / target_edge)));
    const int nv = std::max(1, static_cast<int>(std::ceil(ev.norm() / target_edge)));
    const Eigen::Vector3d n = eu.cross(ev).normalized();
    std::vector<int> ids(static_cast<std::size_t>((nu + 1) * (nv + 1)));
    for (int j = 0; j <= nv; ++j)
      for (int i = 0; i <= nu; ++i) {
        const double fu = static_cast<double>(i) / nu;
        const double fv = static_cast<double>(j) / nv;
        const bool check = (static_cast<int>(fu * checker_cells) +
                            static_cast<int>(fv * checker_cells)) % 2 == 0;
        ids[static_cast<std::size_t>(j * (nu + 1) + i)] =
            add_vertex(origin + fu * eu + fv * ev, n, check ? base_color : accent_color, semantic);
      }
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nu; ++i) {
        const int a = ids[static_cast<std::size_t>(j * (nu + 1) + i)];
        const int b = ids[static_cast<std::size_t>(j * (nu + 1) + i + 1)];
        const int c = ids[static_cast<std::size_t>((j + 1) * (nu + 1) + i + 1)];
        const int d = ids[static_cast<std::size_t>((j + 1) * (nu + 1) + i)];
        faces.emplace_back(a, b, c);
        faces.emplace_back(a, c, d);
      }
  }

  scene::TriangleMesh finish() const {
    scene::TriangleMesh m;
    const int V = static_cast<int>(positions.size());
    m.positions.resize(V, 3);
    m.normals.resize(V, 3);
    m.colors.resize(V, 3);
    m.semantics.resize(V, 3);
    for (int v = 0; v < V; ++v) {
      m.positions.row(v) = positions[static_cast<std::size_t>(v)];
      m.normals.row(v) = normals[static_cast<std::size_t>(v)];
      m.colors.row(v) = colors[static_cast<std::size_t>(v)];
      m.semantics.row(v) = semantics[static_cast<std::size_t>(v)];
    }
    m.faces.resize(static_cast<int>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) m.faces.row(static_cast<Eigen::Index>(f)) = faces[f];
    m.vertex_static.assign(static_cast<std::size_t>(V), 1);
    return m;
  }
};

Eigen::Vector3d palette_color(int index, int count) {
  // distinct hues on a ring, full saturation, mapped to RGB
  const double h = 6.0 * index / std::max(1, count);
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  switch (static_cast<int>(h) % 6) {
    case 0: return {1.0, x, 0.0};
    case 1: return {x, 1.0, 0.0};
    case 2: return {0.0, 1.0, x};
    case 3: return {0.0, x, 1.0};
    case 4: return {x, 0.0, 1.0};
    default: return {1.0, 0.0, x};
  }
}

RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up(0, 0, 1);
  if (std::abs(forward.dot(up)) > 0.99) up = Eigen::Vector3d(0, 1, 0);
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right).normalized();
  RigidTransform t;
  t.rotation.row(0) = right;
  t.rotation.row(1) = down;
  t.rotation.row(2) = forward;
  t.translation = -(t.rotation * eye);
  return t;
}

}  // namespace

scene::TriangleMesh SyntheticScene::configured_mesh(int config_id) const {
  if (config_id < 0 || config_id >= static_cast<int>(configurations.size()))
    throw ConfigError("configured_mesh: configuration " + std::to_string(config_id) +
                      " out of range");
  scene::TriangleMesh out = mesh;
  const SceneConfiguration& config = configurations[static_cast<std::size_t>(config_id)];
  for (std::size_t o = 0; o < object_vertex_ranges.size(); ++o) {
    const RigidTransform& motion = config.object_motion[o];
    if (motion.rotation.isIdentity(0.0) && motion.translation.isZero(0.0)) continue;
    const auto [begin, end] = object_vertex_ranges[o];
    for (int v = begin; v < end; ++v) {
      out.positions.row(v) = motion.apply(mesh.positions.row(v).transpose()).transpose();
      out.normals.row(v) = (motion.rotation * mesh.normals.row(v).transpose()).transpose();
    }
  }
  return out;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params) {
  if (params.object_count < 1) throw ConfigError("generate_scene: object_count must be >= 1");
  if (params.configuration_count < 1)
    throw ConfigError("generate_scene: at least one configuration required");
  if (params.trajectory_length < 1)
    throw ConfigError("generate_scene: trajectory must have at least one pose");
  const Eigen::Vector3d room = params.room_size;
  const double max_obj = 0.35 * std::min(room.x(), room.y());
  if (max_obj < 0.1)
    throw ConfigError("generate_scene: room too small for any object");

  Rng rng(seed);
  SyntheticScene out;
  out.seed = seed;
  out.intrinsics = {320.0, 320.0, 256.0, 144.0, 512, 288};

  const int palette_count = 3 + params.object_count;
  out.palette.push_back({"floor", palette_color(0, palette_count), false});
  out.palette.push_back({"ceiling", palette_color(1, palette_count), false});
  out.palette.push_back({"wall", palette_color(2, palette_count), false});

  const int dynamic_count =
      static_cast<int>(std::llround(params.dynamic_fraction * params.object_count));
  if (dynamic_count > params.object_count)
    throw ConfigError("generate_scene: dynamic fraction out of range");

  MeshBuilder builder;
  const double hx = room.x() / 2, hy = room.y() / 2, hz = room.z();
  const double sub = params.subdivision;
  auto wall_color = [&rng]() {
    return Eigen::Vector3d(rng.uniform(0.35, 0.9), rng.uniform(0.35, 0.9), rng.uniform(0.35, 0.9));
  };
  // inward-facing shell
  builder.add_quad({-hx, -hy, 0}, {2 * hx, 0, 0}, {0, 2 * hy, 0}, sub, wall_color(), wall_color(),
                   out.palette[0].color, 8);  // floor, +z normal
  builder.add_quad({-hx, -hy, hz}, {0, 2 * hy, 0}, {2 * hx, 0, 0}, sub, wall_color(), wall_color(),
                   out.palette[1].color, 8);  // ceiling, -z normal
  builder.add_quad({-hx, -hy, 0}, {0, 0, hz}, {2 * hx, 0, 0}, sub, wall_color(), wall_color(),
                   out.palette[2].color, 10);  // y = -hy wall, +y normal
  builder.add_quad({-hx, hy, 0}, {2 * hx, 0, 0}, {0, 0, hz}, sub, wall_color(), wall_color(),
                   out.palette[2].color, 10);  // y = +hy wall, -y normal
  builder.add_quad({-hx, -hy, 0}, {0, 2 * hy, 0}, {0, 0, hz}, sub, wall_color(), wall_color(),
                   out.palette[2].color, 10);  // x = -hx wall, +x normal
  builder.add_quad({hx, -hy, 0}, {0, 0, hz}, {0, 2 * hy, 0}, sub, wall_color(), wall_color(),
                   out.palette[2].color, 10);  // x = +hx wall, -x normal

  for (int o = 0; o < params.object_count; ++o) {
    const bool dynamic = o < dynamic_count;
    const Eigen::Vector3d color = palette_color(3 + o, palette_count);
    out.palette.push_back({(dynamic ? "movable_" : "furniture_") + std::to_string(o), color,
                           dynamic});
    const int begin = static_cast<int>(builder.positions.size());

    const double sx = rng.uniform(0.35, 1.0) * max_obj;
    const double sy = rng.uniform(0.35, 1.0) * max_obj;
    const double sz = rng.uniform(0.3, 0.9) * room.z() * 0.5;
    const double px = rng.uniform(-hx + sx / 2 + 0.1, hx - sx / 2 - 0.1);
    const double py = rng.uniform(-hy + sy / 2 + 0.1, hy - sy / 2 - 0.1);
    const Eigen::Vector3d lo(px - sx / 2, py - sy / 2, 0.0);
    const Eigen::Vector3d base1 = wall_color();
    const Eigen::Vector3d base2 = wall_color();
    const double box_sub = sub * 0.6;
    // five visible box faces with outward normals
    builder.add_quad(lo + Eigen::Vector3d(0, 0, sz), {sx, 0, 0}, {0, sy, 0}, box_sub, base1, base2,
                     color, 4);  // top
    builder.add_quad(lo, {0, 0, sz}, {sx, 0, 0}, box_sub, base1, base2, color, 4);     // y-
    builder.add_quad(lo + Eigen::Vector3d(0, sy, 0), {sx, 0, 0}, {0, 0, sz}, box_sub, base1,
                     base2, color, 4);                                                 // y+
    builder.add_quad(lo, {0, sy, 0}, {0, 0, sz}, box_sub, base1, base2, color, 4);     // x-
    builder.add_quad(lo + Eigen::Vector3d(sx, 0, 0), {0, 0, sz}, {0, sy, 0}, box_sub, base1,
                     base2, color, 4);                                                 // x+
    out.object_vertex_ranges.emplace_back(begin, static_cast<int>(builder.positions.size()));
    out.object_dynamic.push_back(dynamic);
  }

  out.mesh = builder.finish();
  derive_static_flags(out.mesh, out.palette);

  // configurations: 0 is the training state, later ones displace dynamic objects
  for (int c = 0; c < params.configuration_count; ++c) {
    SceneConfiguration config;
    config.object_motion.assign(out.object_vertex_ranges.size(), RigidTransform{});
    config.illumination =
        c == 0 ? 1.0 : 1.0 + rng.uniform(-params.illumination_delta, params.illumination_delta);
    if (c > 0) {
      for (std::size_t o = 0; o < out.object_vertex_ranges.size(); ++o) {
        if (!out.object_dynamic[o]) continue;
        const auto [begin, end] = out.object_vertex_ranges[o];
        Eigen::Vector3d center = Eigen::Vector3d::Zero();
        for (int v = begin; v < end; ++v) center += out.mesh.positions.row(v).transpose();
        center /= std::max(1, end - begin);
        const double yaw = rng.uniform(-M_PI / 3, M_PI / 3);
        const Eigen::Vector3d shift(rng.uniform(-params.max_displacement, params.max_displacement),
                                    rng.uniform(-params.max_displacement, params.max_displacement),
                                    0.0);
        RigidTransform motion;
        motion.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).matrix();
        motion.translation = center + shift - motion.rotation * center;
        config.object_motion[o] = motion;
      }
    }
    out.configurations.push_back(std::move(config));
  }

  // smooth interior orbit, always looking through the room center
  const double orbit_x = 0.30 * room.x();
  const double orbit_y = 0.30 * room.y();
  for (int k = 0; k < params.trajectory_length; ++k) {
    const double a = 2.0 * M_PI * k / params.trajectory_length;
    const Eigen::Vector3d eye(orbit_x * std::cos(a), orbit_y * std::sin(a),
                              room.z() * (0.45 + 0.1 * std::sin(2 * a)));
    const Eigen::Vector3d target(-0.4 * orbit_x * std::cos(a + 0.8),
                                 -0.4 * orbit_y * std::sin(a + 0.8), room.z() * 0.45);
    out.trajectory.push_back(look_at(eye, target));
  }
  return out;
}

}  // namespace meshloc::synth
