#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace meshloc::io {

/// Vertex-descriptor cache: the mesh embeddings do not depend on the frame,
/// so they are computed once and memorized, keyed by the mesh file hash and
/// the checkpoint hash. Loading verifies both keys.
void write_descriptor_cache(const std::string& path, std::uint64_t mesh_hash,
                            std::uint64_t checkpoint_hash, const Eigen::MatrixXd& descriptors);

Eigen::MatrixXd read_descriptor_cache(const std::string& path, std::uint64_t expected_mesh_hash,
                                      std::uint64_t expected_checkpoint_hash);

}  // namespace meshloc::io
