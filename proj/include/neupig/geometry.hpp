#pragma once

#include "neupig/common.hpp"

#include <array>
#include <limits>
#include <utility>
#include <vector>

namespace neupig {

struct PointCloud {
  std::vector<Vec3d> points;
  std::vector<Vec3d> normals;  // empty when the source carried none

  bool has_normals() const { return !normals.empty(); }
  std::size_t size() const { return points.size(); }
};

using PointCloudSequence = std::vector<PointCloud>;

using Face = std::array<int, 3>;
// Undirected edge stored as (min, max).
using Edge = std::pair<int, int>;

struct TriMesh {
  std::vector<Vec3d> vertices;
  std::vector<Face> faces;
  std::vector<Vec3d> vertex_normals;
  std::vector<Edge> edges;
};

// p' = (p - center) * scale
struct NormalizationTransform {
  Vec3d center = Vec3d::Zero();
  double scale = 1.0;

  Vec3d apply(const Vec3d& p) const { return (p - center) * scale; }
  Vec3d invert(const Vec3d& q) const { return q / scale + center; }
};

struct Aabb {
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
  Vec3d hi = Vec3d::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool empty() const { return !(lo.array() <= hi.array()).all(); }
  double diagonal() const { return empty() ? 0.0 : (hi - lo).norm(); }
};

Aabb bounding_box(const std::vector<Vec3d>& points);

// One uniform transform computed from the union of all frames. The output
// bounding box is centered and its largest half-extent is exactly 1.
NormalizationTransform compute_normalization(const PointCloudSequence& clouds);
std::pair<PointCloudSequence, NormalizationTransform> normalize_sequence(
    const PointCloudSequence& clouds);
void apply_normalization(const NormalizationTransform& xf, TriMesh& mesh);
void apply_normalization(const NormalizationTransform& xf, PointCloud& cloud);

std::vector<Edge> extract_edges(const std::vector<Face>& faces,
                                std::size_t vertex_count);

enum class DegenerateFacePolicy { Skip, Error };

// Area-weighted average of incident face normals, renormalized. Throws on
// isolated vertices (no usable incident face).
std::vector<Vec3d> vertex_normals(
    const TriMesh& mesh,
    DegenerateFacePolicy policy = DegenerateFacePolicy::Skip);

// Fills edges and vertex_normals from vertices and faces.
void finalize_mesh(TriMesh& mesh);

void validate_mesh(const TriMesh& mesh);

}  // namespace neupig
