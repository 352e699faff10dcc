#pragma once

#include "neupig/geometry.hpp"

#include <span>
#include <string>
#include <vector>

namespace neupig {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline constexpr double kFscoreRatio = 0.005;  // of the GT bounding-box diagonal

// Plain bidirectional mean squared nearest-neighbor distance.
double metric_cd(std::span<const Vec3d> pred, std::span<const Vec3d> gt);
double metric_cd_brute(std::span<const Vec3d> pred, std::span<const Vec3d> gt);

// Harmonic mean of precision (pred within tau of gt) and recall (gt within tau
// of pred). "Within" is inclusive.
double metric_fscore(std::span<const Vec3d> pred, std::span<const Vec3d> gt, double tau);
double metric_fscore_brute(std::span<const Vec3d> pred, std::span<const Vec3d> gt,
                           double tau);
double fscore_threshold(std::span<const Vec3d> gt);

// Symmetric mean absolute cosine between vertex normals and the normals of
// their nearest vertices on the other mesh.
double metric_nc(const TriMesh& pred, const TriMesh& gt);

// Prediction keyframe vertices matched once to GT keyframe vertices by nearest
// neighbor; returns the per-frame mean distance of matched trajectories.
std::vector<double> metric_corr_frames(const std::vector<std::vector<Vec3d>>& pred,
                                       const std::vector<std::vector<Vec3d>>& gt, int key);
double metric_corr(const std::vector<std::vector<Vec3d>>& pred,
                   const std::vector<std::vector<Vec3d>>& gt, int key);

struct FrameMetrics {
  double cd = 0.0;
  double nc = 0.0;
  double fscore = 0.0;
  double fscore_tau = 0.0;
  double corr = 0.0;
};

struct MetricReport {
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
  bool has_corr = false;
  int key = 0;  // 0-based frame the correspondence match uses
  double seconds = 0.0;
};

// Per-frame metrics of predicted meshes against GT meshes. Correspondence
// error is computed when `with_corr` is set.
MetricReport evaluate_sequence(const std::vector<TriMesh>& pred, const std::vector<TriMesh>& gt,
                               int key, bool with_corr);

// ---------------------------------------------------------------------------
// Synthetic sequences
// ---------------------------------------------------------------------------

enum class MotionKind { Rigid, Bend, Twist };

std::string to_string(MotionKind k);
MotionKind parse_motion(const std::string& s);

struct SynthConfig {
  MotionKind kind = MotionKind::Rigid;
  int frames = 17;
  int points = 2000;
  int subdivision = 3;
  std::uint64_t seed = 0;
};

struct SyntheticSequence {
  MotionKind kind = MotionKind::Rigid;
  std::uint64_t seed = 0;
  PointCloudSequence clouds;
  std::vector<TriMesh> gt_meshes;
  std::vector<std::vector<Vec3d>> trajectories;  // [frame][vertex]
  NormalizationTransform normalization;           // base space -> output
};

inline constexpr double kRigidMaxAngleDeg = 30.0;
inline constexpr double kRigidMaxTranslation = 0.3;
inline constexpr double kBendMaxAngleDeg = 45.0;
inline constexpr double kTwistMaxAngleDeg = 60.0;

// Unit icosphere: 12 vertices at subdivision 0, 642 at subdivision 3.
TriMesh icosphere(int subdivision);

// Ellipsoid with a bump, so rigid motion is observable from geometry alone.
TriMesh base_shape(int subdivision);

// Rigid motion at normalized time s: rotation about a fixed axis and a
// translation, both linear in s.
Mat3d rigid_rotation(double s);
Vec3d rigid_translation(double s);

// Position of base-shape point p at normalized time s. `lo`, `hi` bound the
// base shape along the motion axis.
Vec3d deform_point(MotionKind kind, const Vec3d& p, double s, double lo, double hi);

// Area-weighted uniform samples with face normals.
PointCloud sample_surface(const TriMesh& mesh, int count, Rng& rng);

SyntheticSequence gen_sequence(const SynthConfig& cfg);

}  // namespace neupig
