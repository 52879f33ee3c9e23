#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "meshloc/scene/transform.hpp"

namespace meshloc::scene {

/// Vertices carry the 12 per-vertex features used by the mesh embedder:
/// position, unit normal, color and semantic color (both in [0,1]).
struct TriangleMesh {
  Eigen::MatrixX3d positions;
  Eigen::MatrixX3d normals;
  Eigen::MatrixX3d colors;
  Eigen::MatrixX3d semantics;
  Eigen::MatrixX3i faces;
  std::vector<std::uint8_t> vertex_static;  // 1 = static object, from the semantic palette

  int vertex_count() const { return static_cast<int>(positions.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }
};

struct PaletteEntry {
  std::string name;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  bool dynamic = false;
};

struct NormalizationParams {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d to_normalized(const Eigen::Vector3d& p) const { return (p - center) / scale; }
  Eigen::Vector3d to_original(const Eigen::Vector3d& p) const { return p * scale + center; }
};

/// Parses the ASCII PLY-style mesh format (see save_mesh for the layout).
/// Missing normals are recomputed area-weighted from the faces. Malformed
/// headers, bad indices and non-finite coordinates raise ParseError with the
/// offending line number.
TriangleMesh load_mesh(const std::string& path);

void save_mesh(const std::string& path, const TriangleMesh& mesh);

/// Area-weighted vertex normals from the face set.
Eigen::MatrixX3d compute_vertex_normals(const Eigen::MatrixX3d& positions,
                                        const Eigen::MatrixX3i& faces);

/// Assigns vertex_static by matching each vertex's semantic color to the
/// nearest palette entry.
void derive_static_flags(TriangleMesh& mesh, const std::vector<PaletteEntry>& palette);

/// Centers the bounding box on the origin and divides by one uniform scalar
/// so the largest absolute coordinate becomes 1. A degenerate mesh (single
/// point) keeps scale 1.
std::pair<TriangleMesh, NormalizationParams> normalize_mesh(const TriangleMesh& mesh);

/// Undirected, deduplicated vertex adjacency from the faces; no self loops;
/// neighbor lists sorted ascending.
std::vector<std::vector<int>> build_adjacency(const TriangleMesh& mesh);

}  // namespace meshloc::scene
