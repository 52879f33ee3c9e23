#include "meshloc/match/oracle.hpp"

#include "meshloc/common/errors.hpp"
#include "meshloc/common/rng.hpp"

namespace meshloc::match {

using num::Tensor;

OracleEmbeddings build_oracle_embeddings(const img::GridHierarchy& grid,
                                         const std::vector<int>& split,
                                         const train::GroundTruth& gt, std::uint64_t seed) {
  const int levels = grid.level_count();
  if (static_cast<int>(split.size()) != levels)
    throw ConfigError("build_oracle_embeddings: one split width per level required");
  Rng rng(seed);

  OracleEmbeddings out;
  out.cells.levels.resize(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    Eigen::MatrixXd& m = out.cells.levels[static_cast<std::size_t>(l)];
    m.resize(grid.cell_count(l), split[static_cast<std::size_t>(l)]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  }

  const int V = static_cast<int>(gt.vertices.size());
  int total = 0;
  out.descriptors.split = split;
  out.descriptors.offsets.resize(split.size());
  for (std::size_t l = 0; l < split.size(); ++l) {
    out.descriptors.offsets[l] = total;
    total += split[l];
  }
  out.descriptors.descriptors.resize(V, total);
  for (int v = 0; v < V; ++v) {
    const auto& rec = gt.vertices[static_cast<std::size_t>(v)];
    for (int l = 0; l < levels; ++l) {
      auto block = out.descriptors.descriptors.row(v).segment(
          out.descriptors.offsets[static_cast<std::size_t>(l)],
          split[static_cast<std::size_t>(l)]);
      if (rec.visible) {
        block = out.cells.levels[static_cast<std::size_t>(l)].row(
            rec.cells[static_cast<std::size_t>(l)]);
      } else if (l == 0) {
        // far from the whole-image embedding: the level-0 gate drops it
        block = out.cells.levels[0].row(0);
        block.array() += 10.0;
      } else {
        block.setZero();
      }
    }
  }
  return out;
}

void init_oracle_match_params(const std::vector<int>& level_widths, num::ParamSet& params,
                              const std::string& prefix) {
  for (std::size_t l = 0; l < level_widths.size(); ++l) {
    const int w = level_widths[l];
    params.add(prefix + "conf" + std::to_string(l) + ".W", Tensor::full({w}, -50.0));
    params.add(prefix + "conf" + std::to_string(l) + ".b", Tensor::full({1}, 10.0));
  }
  const int w6 = level_widths.back();
  params.add(prefix + "off.W", Tensor::zeros({2, 2 * w6}));
  params.add(prefix + "off.b", Tensor::zeros({2}));
}

}  // namespace meshloc::match
