#include "meshloc/train/losses.hpp"

#include <algorithm>

#include "meshloc/common/errors.hpp"

namespace meshloc::train {

using num::Tape;
using num::Tensor;
using num::Var;

void LossWeights::validate(int level_count) const {
  if (lambda_s <= 0 || lambda_o <= 0 || lambda_n <= 0)
    throw ConfigError("LossWeights: weights must be positive");
  if (static_cast<int>(margins.size()) != level_count - 1)
    throw ConfigError("LossWeights: need one margin per level 1.." +
                      std::to_string(level_count - 1) + ", got " +
                      std::to_string(margins.size()));
  for (std::size_t i = 0; i < margins.size(); ++i) {
    if (margins[i] <= 0) throw ConfigError("LossWeights: margins must be positive");
    if (i > 0 && margins[i] >= margins[i - 1])
      throw ConfigError("LossWeights: margins must be strictly decreasing");
  }
}

namespace {

Var zero_scalar(Tape& tape) { return tape.constant(Tensor::scalar(0.0)); }

void check_levels(const std::vector<Var>& e_levels, const std::vector<Var>& f_levels,
                  int level_count) {
  if (static_cast<int>(e_levels.size()) != level_count ||
      static_cast<int>(f_levels.size()) != level_count)
    throw std::invalid_argument("losses: per-level embedding lists must match the grid levels");
}

}  // namespace

Var similarity_loss(Tape& tape, const std::vector<Var>& e_levels, const std::vector<Var>& f_levels,
                    const GroundTruth& gt, const img::GridHierarchy& grid,
                    const LossWeights& weights) {
  const int levels = grid.level_count();
  check_levels(e_levels, f_levels, levels);
  weights.validate(levels);

  Var acc = zero_scalar(tape);
  for (int l = 1; l < levels; ++l) {
    std::vector<int> vis_idx, pos_cells, pair_slot, sib_cells;
    for (std::size_t v = 0; v < gt.vertices.size(); ++v) {
      const auto& rec = gt.vertices[v];
      if (!rec.visible) continue;
      const int slot = static_cast<int>(vis_idx.size());
      vis_idx.push_back(static_cast<int>(v));
      pos_cells.push_back(rec.cells[static_cast<std::size_t>(l)]);
      for (int sib : grid.children_of(l - 1, rec.cells[static_cast<std::size_t>(l - 1)])) {
        if (sib == rec.cells[static_cast<std::size_t>(l)]) continue;
        pair_slot.push_back(slot);
        sib_cells.push_back(sib);
      }
    }
    if (vis_idx.empty() || pair_slot.empty()) continue;

    Var e_vis = num::gather_rows(e_levels[static_cast<std::size_t>(l)], vis_idx);
    Var d_pos = num::row_norms(num::sub(e_vis, num::gather_rows(f_levels[static_cast<std::size_t>(l)], pos_cells)));
    std::vector<int> pair_verts(pair_slot.size());
    for (std::size_t k = 0; k < pair_slot.size(); ++k)
      pair_verts[k] = vis_idx[static_cast<std::size_t>(pair_slot[k])];
    Var e_pair = num::gather_rows(e_levels[static_cast<std::size_t>(l)], pair_verts);
    Var d_neg = num::row_norms(num::sub(e_pair, num::gather_rows(f_levels[static_cast<std::size_t>(l)], sib_cells)));
    Var hinge = num::relu(num::add_scalar(num::sub(num::gather(d_pos, pair_slot), d_neg),
                                          weights.margins[static_cast<std::size_t>(l - 1)]));
    acc = num::add(acc, num::scale(num::sum(hinge), 1.0 / static_cast<double>(vis_idx.size())));
  }
  return acc;
}

Var offset_loss(Tape& tape, num::ParamSet& params, const std::vector<Var>& e_levels,
                const std::vector<Var>& f_levels, const GroundTruth& gt,
                const match::RouteState& routes, bool* offset_empty,
                const std::string& match_prefix) {
  const int last = routes.level_count - 1;
  check_levels(e_levels, f_levels, routes.level_count);

  int survivors = 0;
  std::vector<int> verts, cells;
  std::vector<double> targets;
  for (std::size_t v = 0; v < routes.vertices.size(); ++v) {
    const auto& route = routes.vertices[v];
    if (!route.alive) continue;
    ++survivors;
    const auto& rec = gt.vertices[v];
    if (!rec.visible) continue;
    const int gt_cell = rec.cells[static_cast<std::size_t>(last)];
    const auto& finals = route.levels[static_cast<std::size_t>(last)];
    const bool hit = std::any_of(finals.begin(), finals.end(),
                                 [&](const auto& c) { return c.cell == gt_cell; });
    if (!hit) continue;  // routed to the wrong cell: indicator is zero
    verts.push_back(static_cast<int>(v));
    cells.push_back(gt_cell);
    targets.push_back(rec.offset.x());
    targets.push_back(rec.offset.y());
  }
  if (offset_empty) *offset_empty = survivors == 0;
  if (survivors == 0 || verts.empty()) return zero_scalar(tape);

  const std::vector<Var> parts_fe = {
      num::gather_rows(f_levels[static_cast<std::size_t>(last)], cells),
      num::gather_rows(e_levels[static_cast<std::size_t>(last)], verts)};
  Var rows = num::concat_cols(parts_fe);
  Var pred = num::sigmoid(num::add_rows(num::matmul_nt(rows, tape.param(params, match_prefix + "off.W")),
                                        tape.param(params, match_prefix + "off.b")));
  Tensor target({static_cast<int>(verts.size()), 2});
  for (std::size_t i = 0; i < targets.size(); ++i) target[static_cast<Eigen::Index>(i)] = targets[i];
  Var err = num::square(num::sub(pred, tape.constant(std::move(target))));
  return num::scale(num::sum(err), 1.0 / static_cast<double>(survivors));
}

Var confidence_loss(Tape& tape, num::ParamSet& params, const std::vector<Var>& e_levels,
                    const std::vector<Var>& f_levels, const GroundTruth& gt,
                    const match::RouteState& routes, const std::string& match_prefix) {
  const int levels = routes.level_count;
  check_levels(e_levels, f_levels, levels);

  Var acc = zero_scalar(tape);
  for (int l = 0; l < levels; ++l) {
    std::vector<int> verts, cells;
    std::vector<double> y;
    if (l == 0) {
      for (std::size_t v = 0; v < gt.vertices.size(); ++v) {
        verts.push_back(static_cast<int>(v));
        cells.push_back(0);
        y.push_back(gt.vertices[v].visible ? 1.0 : 0.0);
      }
    } else {
      for (std::size_t v = 0; v < routes.vertices.size(); ++v) {
        const auto& route = routes.vertices[v];
        if (route.levels.size() <= static_cast<std::size_t>(l)) continue;
        const auto& rec = gt.vertices[v];
        for (const auto& cand : route.levels[static_cast<std::size_t>(l)]) {
          verts.push_back(static_cast<int>(v));
          cells.push_back(cand.cell);
          const bool correct =
              rec.visible && rec.cells[static_cast<std::size_t>(l)] == cand.cell;
          y.push_back(correct ? 1.0 : 0.0);
        }
      }
    }
    if (verts.empty()) continue;

    Var W = tape.param(params, match_prefix + "conf" + std::to_string(l) + ".W");
    Var b = tape.param(params, match_prefix + "conf" + std::to_string(l) + ".b");
    Var rows = num::abs(num::sub(num::gather_rows(f_levels[static_cast<std::size_t>(l)], cells),
                                 num::gather_rows(e_levels[static_cast<std::size_t>(l)], verts)));
    Var logits = num::add(num::matvec(rows, W),
                          num::gather(b, std::vector<int>(verts.size(), 0)));
    Var p = num::sigmoid(logits);
    Tensor target({static_cast<int>(y.size())});
    for (std::size_t i = 0; i < y.size(); ++i) target[static_cast<Eigen::Index>(i)] = y[i];
    acc = num::add(acc, num::binary_cross_entropy(p, target));
  }
  return acc;
}

Var norm_loss(Tape& tape, const std::vector<Var>& e_levels, const std::vector<Var>& f_levels) {
  check_levels(e_levels, f_levels, static_cast<int>(e_levels.size()));
  Var acc = zero_scalar(tape);
  for (std::size_t l = 0; l < e_levels.size(); ++l) {
    acc = num::add(acc, num::mean(num::row_norms(e_levels[l])));
    acc = num::add(acc, num::mean(num::row_norms(f_levels[l])));
  }
  return acc;
}

LossParts build_losses(Tape& tape, num::ParamSet& params, const std::vector<Var>& e_levels,
                       const std::vector<Var>& f_levels, const GroundTruth& gt,
                       const match::RouteState& routes, const img::GridHierarchy& grid,
                       const LossWeights& weights, const std::string& match_prefix) {
  LossParts parts;
  parts.confidence = confidence_loss(tape, params, e_levels, f_levels, gt, routes, match_prefix);
  parts.similarity = similarity_loss(tape, e_levels, f_levels, gt, grid, weights);
  parts.offset = offset_loss(tape, params, e_levels, f_levels, gt, routes, &parts.offset_empty,
                             match_prefix);
  parts.norm = norm_loss(tape, e_levels, f_levels);
  parts.total = num::add(
      num::add(parts.confidence, num::scale(parts.similarity, weights.lambda_s)),
      num::add(num::scale(parts.offset, weights.lambda_o), num::scale(parts.norm, weights.lambda_n)));
  return parts;
}

}  // namespace meshloc::train
