#include "neupig/geometry.hpp"

#include <algorithm>
#include <string>

namespace neupig {

Aabb bounding_box(const std::vector<Vec3d>& points) {
  Aabb box;
  for (const auto& p : points) box.extend(p);
  return box;
}

NormalizationTransform compute_normalization(const PointCloudSequence& clouds) {
  require(!clouds.empty(), "normalize_sequence: empty sequence");
  Aabb box;
  for (const auto& cloud : clouds) {
    for (const auto& p : cloud.points) {
      if (!p.allFinite())
        fail(ErrorKind::Numeric, "normalize_sequence: non-finite coordinate");
      box.extend(p);
    }
  }
  require(!box.empty(), "normalize_sequence: all clouds are empty");

  const double half_extent = 0.5 * (box.hi - box.lo).maxCoeff();
  if (!(half_extent > 0.0))
    fail(ErrorKind::Numeric,
         "normalize_sequence: degenerate (zero-extent) bounding box");

  NormalizationTransform xf;
  xf.center = 0.5 * (box.lo + box.hi);
  xf.scale = 1.0 / half_extent;
  return xf;
}

void apply_normalization(const NormalizationTransform& xf, PointCloud& cloud) {
  for (auto& p : cloud.points) {
    p = xf.apply(p);
    // Rounding can push an extreme coordinate a few ulps past the cube.
    p = p.cwiseMax(Vec3d::Constant(-1.0)).cwiseMin(Vec3d::Constant(1.0));
  }
}

void apply_normalization(const NormalizationTransform& xf, TriMesh& mesh) {
  for (auto& v : mesh.vertices) v = xf.apply(v);
}

std::pair<PointCloudSequence, NormalizationTransform> normalize_sequence(
    const PointCloudSequence& clouds) {
  const NormalizationTransform xf = compute_normalization(clouds);
  PointCloudSequence out = clouds;
  for (auto& cloud : out) apply_normalization(xf, cloud);
  return {std::move(out), xf};
}

std::vector<Edge> extract_edges(const std::vector<Face>& faces,
                                std::size_t vertex_count) {
  std::vector<Edge> edges;
  edges.reserve(faces.size() * 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces[f][k];
      const int b = faces[f][(k + 1) % 3];
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= vertex_count ||
          static_cast<std::size_t>(b) >= vertex_count)
        fail(ErrorKind::InvalidArgument,
             "extract_edges: face " + std::to_string(f) +
                 " has an out-of-range vertex index");
      if (a == b) continue;
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<Vec3d> vertex_normals(const TriMesh& mesh,
                                  DegenerateFacePolicy policy) {
  std::vector<Vec3d> acc(mesh.vertices.size(), Vec3d::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (int idx : face) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size())
        fail(ErrorKind::InvalidArgument,
             "vertex_normals: face " + std::to_string(f) +
                 " has an out-of-range vertex index");
    }
    const Vec3d& a = mesh.vertices[face[0]];
    const Vec3d& b = mesh.vertices[face[1]];
    const Vec3d& c = mesh.vertices[face[2]];
    // |cross| is twice the face area, so the plain sum is area-weighted.
    const Vec3d n = (b - a).cross(c - a);
    if (!(n.squaredNorm() > 0.0) || !n.allFinite()) {
      if (policy == DegenerateFacePolicy::Error)
        fail(ErrorKind::Numeric,
             "vertex_normals: degenerate face " + std::to_string(f));
      continue;
    }
    for (int idx : face) acc[idx] += n;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double len = acc[i].norm();
    if (!(len > 0.0))
      fail(ErrorKind::Numeric, "vertex_normals: normal undefined at vertex " +
                                   std::to_string(i) +
                                   " (isolated or cancelling faces)");
    acc[i] /= len;
  }
  return acc;
}

void validate_mesh(const TriMesh& mesh) {
  require(!mesh.vertices.empty(), "mesh has no vertices");
  require(!mesh.faces.empty(), "mesh has no faces");
  for (const auto& v : mesh.vertices)
    if (!v.allFinite()) fail(ErrorKind::Numeric, "mesh has non-finite vertex");
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (int idx : mesh.faces[f])
      if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size())
        fail(ErrorKind::InvalidArgument,
             "mesh face " + std::to_string(f) + " index out of range");
}

void finalize_mesh(TriMesh& mesh) {
  validate_mesh(mesh);
  mesh.edges = extract_edges(mesh.faces, mesh.vertices.size());
  mesh.vertex_normals = vertex_normals(mesh);
}

}  // namespace neupig
