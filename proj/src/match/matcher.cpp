#include "meshloc/match/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "meshloc/common/errors.hpp"
#include "meshloc/common/parallel.hpp"

namespace meshloc::match {

using num::ParamSet;
using num::Tensor;

namespace {

double stable_sigmoid(double x) {
  const double c = std::clamp(x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-c));
}

std::string conf_name(const std::string& prefix, int level, const char* which) {
  return prefix + "conf" + std::to_string(level) + "." + which;
}

}  // namespace

void init_match_params(const std::vector<int>& level_widths, ParamSet& params, Rng& rng,
                       const std::string& prefix) {
  if (level_widths.empty()) throw ConfigError("init_match_params: no level widths");
  for (std::size_t l = 0; l < level_widths.size(); ++l) {
    const int w = level_widths[l];
    if (w <= 0) throw ConfigError("init_match_params: level width must be positive");
    Tensor W({w});
    const double limit = std::sqrt(6.0 / (w + 1));
    for (Eigen::Index i = 0; i < W.size(); ++i) W[i] = rng.uniform(-limit, limit);
    params.add(conf_name(prefix, static_cast<int>(l), "W"), std::move(W));
    params.add(conf_name(prefix, static_cast<int>(l), "b"), Tensor::zeros({1}));
  }
  const int w6 = level_widths.back();
  Tensor Woff({2, 2 * w6});
  const double limit = std::sqrt(6.0 / (2 * w6 + 2));
  for (Eigen::Index i = 0; i < Woff.size(); ++i) Woff[i] = rng.uniform(-limit, limit);
  params.add(prefix + "off.W", std::move(Woff));
  params.add(prefix + "off.b", Tensor::zeros({2}));
}

double confidence_of(const Eigen::VectorXd& f, const Eigen::VectorXd& e, const Eigen::VectorXd& W,
                     double b) {
  if (f.size() != e.size() || W.size() != f.size())
    throw std::invalid_argument("confidence_of: width mismatch, f=" + std::to_string(f.size()) +
                                " e=" + std::to_string(e.size()) +
                                " W=" + std::to_string(W.size()));
  return stable_sigmoid(W.dot((f - e).cwiseAbs()) + b);
}

double confidence_of(const ParamSet& params, int level, const Eigen::VectorXd& f,
                     const Eigen::VectorXd& e, const std::string& prefix) {
  return confidence_of(f, e, params.at(conf_name(prefix, level, "W")).vector(),
                       params.at(conf_name(prefix, level, "b"))[0]);
}

Eigen::Vector2d predict_offset(const Eigen::VectorXd& f, const Eigen::VectorXd& e,
                               const Eigen::MatrixXd& W, const Eigen::Vector2d& b) {
  if (f.size() != e.size() || W.rows() != 2 || W.cols() != f.size() + e.size())
    throw std::invalid_argument("predict_offset: width mismatch, f=" + std::to_string(f.size()) +
                                " e=" + std::to_string(e.size()) + " W=" +
                                std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  Eigen::VectorXd pair(f.size() + e.size());
  pair << f, e;
  const Eigen::Vector2d logits = W * pair + b;
  return {stable_sigmoid(logits[0]), stable_sigmoid(logits[1])};
}

Eigen::Vector2d predict_offset(const ParamSet& params, const Eigen::VectorXd& f,
                               const Eigen::VectorXd& e, const std::string& prefix) {
  return predict_offset(f, e, params.at(prefix + "off.W").matrix(),
                        params.at(prefix + "off.b").vector());
}

double sample_depth(const scene::Image& depth, double u, double v,
                    const DepthSampling& policy) {
  const int px = std::clamp(static_cast<int>(u), 0, depth.width - 1);
  const int py = std::clamp(static_cast<int>(v), 0, depth.height - 1);
  const double nearest = depth.at(0, py, px);
  if (!policy.subpixel) return nearest;
  // bilinear between the four surrounding pixel centers
  const double x = std::clamp(u - 0.5, 0.0, static_cast<double>(depth.width - 1));
  const double y = std::clamp(v - 0.5, 0.0, static_cast<double>(depth.height - 1));
  const int i0 = std::min(static_cast<int>(x), depth.width - 2 >= 0 ? depth.width - 2 : 0);
  const int j0 = std::min(static_cast<int>(y), depth.height - 2 >= 0 ? depth.height - 2 : 0);
  const int i1 = std::min(i0 + 1, depth.width - 1);
  const int j1 = std::min(j0 + 1, depth.height - 1);
  const double d00 = depth.at(0, j0, i0), d10 = depth.at(0, j0, i1);
  const double d01 = depth.at(0, j1, i0), d11 = depth.at(0, j1, i1);
  const double dmin = std::min({d00, d10, d01, d11});
  const double dmax = std::max({d00, d10, d01, d11});
  if (dmin <= 0.0) return nearest;                          // invalid neighbor
  if (dmax - dmin > policy.edge_tolerance * dmax) return nearest;  // depth edge
  const double fx = x - i0, fy = y - j0;
  return (1 - fy) * ((1 - fx) * d00 + fx * d10) + fy * ((1 - fx) * d01 + fx * d11);
}

int RouteState::survivor_count() const {
  int n = 0;
  for (const auto& v : vertices) n += v.alive ? 1 : 0;
  return n;
}

RouteState route_vertices(const gnn::VertexDescriptorSet& descriptors,
                          const img::CellEmbeddingSet& cells, const img::GridHierarchy& grid,
                          const ParamSet& params, const MatchConfig& config,
                          const std::string& prefix) {
  const int levels = grid.level_count();
  if (descriptors.level_count() != levels || cells.level_count() != levels)
    throw std::invalid_argument("route_vertices: descriptors (" +
                                std::to_string(descriptors.level_count()) + "), cells (" +
                                std::to_string(cells.level_count()) + ") and grid (" +
                                std::to_string(levels) + ") must agree on levels");
  if (static_cast<int>(config.beams.size()) != levels - 1)
    throw std::invalid_argument("route_vertices: need one beam width per decision level (" +
                                std::to_string(levels - 1) + "), got " +
                                std::to_string(config.beams.size()));
  for (int b : config.beams)
    if (b < 1) throw std::invalid_argument("route_vertices: beam widths must be >= 1");
  for (int l = 0; l < levels; ++l)
    if (cells.level(l).rows() != grid.cell_count(l) ||
        cells.level(l).cols() != descriptors.level(l).cols())
      throw std::invalid_argument("route_vertices: level " + std::to_string(l) +
                                  " embedding dimensions do not match the grid");

  // per-level head weights fetched once, shared read-only across threads
  std::vector<Eigen::VectorXd> conf_W(static_cast<std::size_t>(levels));
  std::vector<double> conf_b(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    conf_W[static_cast<std::size_t>(l)] = params.at(conf_name(prefix, l, "W")).vector();
    conf_b[static_cast<std::size_t>(l)] = params.at(conf_name(prefix, l, "b"))[0];
  }

  const int V = static_cast<int>(descriptors.descriptors.rows());
  RouteState state;
  state.level_count = levels;
  state.vertices.assign(static_cast<std::size_t>(V), VertexRoute{});

  parallel_for(V, [&](long vi) {
    const int v = static_cast<int>(vi);
    VertexRoute route;
    route.levels.resize(static_cast<std::size_t>(levels));

    // level 0: whole-image membership test
    const Eigen::VectorXd e0 = descriptors.level(0).row(v);
    const Eigen::VectorXd f0 = cells.level(0).row(0);
    const double c0 = confidence_of(f0, e0, conf_W[0], conf_b[0]);
    if (c0 < config.confidence_threshold) return;
    route.levels[0].push_back({0, (f0 - e0).norm(), c0});

    for (int l = 1; l < levels; ++l) {
      const auto e = descriptors.level(l).row(v);
      std::vector<RouteCandidate> candidates;
      for (const RouteCandidate& parent : route.levels[static_cast<std::size_t>(l - 1)])
        for (int child : grid.children_of(l - 1, parent.cell)) {
          RouteCandidate c;
          c.cell = child;
          c.distance = (cells.level(l).row(child) - e).norm();
          candidates.push_back(c);
        }
      std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.cell < b.cell;
      });
      const int beam = config.beams[static_cast<std::size_t>(l - 1)];
      if (static_cast<int>(candidates.size()) > beam) candidates.resize(static_cast<std::size_t>(beam));

      auto& kept = route.levels[static_cast<std::size_t>(l)];
      for (RouteCandidate& c : candidates) {
        c.confidence = confidence_of(cells.level(l).row(c.cell).transpose(), e,
                                     conf_W[static_cast<std::size_t>(l)],
                                     conf_b[static_cast<std::size_t>(l)]);
        if (c.confidence >= config.confidence_threshold) kept.push_back(c);
      }
      if (kept.empty()) return;  // vertex dropped at this level
    }
    route.alive = true;
    state.vertices[static_cast<std::size_t>(vi)] = std::move(route);
  });
  return state;
}

CorrespondenceSet extract_correspondences(const RouteState& routes,
                                          const gnn::VertexDescriptorSet& descriptors,
                                          const img::CellEmbeddingSet& cells,
                                          const img::GridHierarchy& grid,
                                          const scene::Image& depth,
                                          const scene::PinholeCamera& cam,
                                          const Eigen::MatrixX3d& world_positions,
                                          const std::vector<std::uint8_t>& vertex_static,
                                          const ParamSet& params, const std::string& prefix,
                                          const DepthSampling& depth_sampling) {
  if (depth.width != grid.width() || depth.height != grid.height() || depth.channels != 1)
    throw std::invalid_argument("extract_correspondences: depth map must align with the grid frame");
  const int last = routes.level_count - 1;
  const Eigen::MatrixXd Woff = params.at(prefix + "off.W").matrix();
  const Eigen::Vector2d boff = params.at(prefix + "off.b").vector();

  CorrespondenceSet out;
  for (std::size_t v = 0; v < routes.vertices.size(); ++v) {
    const VertexRoute& route = routes.vertices[v];
    if (!route.alive) continue;
    const Eigen::VectorXd e = descriptors.level(last).row(static_cast<Eigen::Index>(v));
    for (const RouteCandidate& c : route.levels[static_cast<std::size_t>(last)]) {
      const Eigen::VectorXd f = cells.level(last).row(c.cell);
      const Eigen::Vector2d offset = predict_offset(f, e, Woff, boff);
      const auto [ox, oy] = grid.cell_origin(last, c.cell);
      const double u = ox + offset.x() * grid.level(last).cell_w;
      const double pv = oy + offset.y() * grid.level(last).cell_h;
      const double d = sample_depth(depth, u, pv, depth_sampling);
      if (d <= 0.0) continue;  // invalid depth pixel
      Correspondence pair;
      pair.vertex = static_cast<int>(v);
      pair.cell = c.cell;
      pair.u = u;
      pair.v = pv;
      pair.depth = d;
      pair.world = world_positions.row(static_cast<Eigen::Index>(v));
      pair.camera = scene::backproject_pixel(cam, u, pv, d);
      pair.is_static = vertex_static.empty() ? true : vertex_static[v] != 0;
      pair.confidence = c.confidence;
      out.pairs.push_back(std::move(pair));
    }
  }
  return out;
}

void dump_correspondences(const std::string& path, const CorrespondenceSet& set) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "# vertex_id level6_cell u v depth x_w y_w z_w static confidence\n";
  for (const auto& p : set.pairs) {
    os << p.vertex << ' ' << p.cell << ' ' << p.u << ' ' << p.v << ' ' << p.depth << ' '
       << p.world.x() << ' ' << p.world.y() << ' ' << p.world.z() << ' ' << (p.is_static ? 1 : 0)
       << ' ' << p.confidence << '\n';
  }
}

}  // namespace meshloc::match
