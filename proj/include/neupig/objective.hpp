#pragma once

#include "neupig/common.hpp"
#include "neupig/geometry.hpp"
#include "neupig/kdtree.hpp"
#include "neupig/kernels.hpp"

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace neupig {

// ---------------------------------------------------------------------------
// Chamfer distance
// ---------------------------------------------------------------------------

struct ChamferOptions {
  // rho(s) = min(s, truncation^2). Infinity gives the plain squared Chamfer.
  double truncation = std::numeric_limits<double>::infinity();
};

// Nearest-neighbor assignment in both directions, held fixed when
// differentiating.
struct ChamferAssignment {
  std::vector<int> a_to_b;
  std::vector<int> b_to_a;
};

template <typename T>
struct ChamferResult {
  double value = 0.0;
  double a_to_b = 0.0;  // (1/|A|) sum_a rho(min_b |a-b|^2)
  double b_to_a = 0.0;  // (1/|B|) sum_b rho(min_a |a-b|^2)
  std::vector<Vec3<T>> grad;  // d(value)/dA, empty unless requested
};

template <typename T>
ChamferAssignment chamfer_assignment(std::span<const Vec3<T>> A, const KdTree<T>& tree_a,
                                     std::span<const Vec3<T>> B, const KdTree<T>& tree_b);

template <typename T>
ChamferResult<T> chamfer_with_assignment(std::span<const Vec3<T>> A,
                                         std::span<const Vec3<T>> B,
                                         const ChamferAssignment& assignment,
                                         const ChamferOptions& opts, bool want_grad);

// Bidirectional Chamfer between predicted vertices A and an observed cloud B,
// with gradient w.r.t. A.
template <typename T>
ChamferResult<T> chamfer(std::span<const Vec3<T>> A, std::span<const Vec3<T>> B,
                         const ChamferOptions& opts = {}, bool want_grad = true);

// ---------------------------------------------------------------------------
// Confidence weighting
// ---------------------------------------------------------------------------

enum class OmegaVariant { Default, Constant, Delta, Single };
enum class DeltaSchedule { Default, Constant, Linear, Exponential, Interpolated };

std::string to_string(OmegaVariant v);
std::string to_string(DeltaSchedule v);
OmegaVariant parse_omega(const std::string& s);
DeltaSchedule parse_delta(const std::string& s);

// Where the isometry term takes its target edge lengths from: the current
// keyframe prediction (refreshed every epoch) or the undeformed reference mesh.
enum class IsoLengths { Keyframe, Reference };
std::string to_string(IsoLengths v);
IsoLengths parse_iso_lengths(const std::string& s);

// Per-frame reconstruction confidence relative to the keyframe.
double omega(double cd_t, double cd_key, OmegaVariant variant);

struct DeltaValue {
  double delta = 1.0;
  // Interpolated schedule: w_conf(t) = (1 - e) omega(t) + e replaces the
  // exponent form.
  bool interpolated = false;
};

inline constexpr double kExponentialDeltaRate = 5.0;

DeltaValue delta_schedule(double epoch_fraction, DeltaSchedule schedule);

// w_conf for every frame. `key` is 0-based. The default omega variant takes
// the product of omega^delta from the keyframe outward to t (both
// directions); the other omega variants use omega(t)^delta directly.
// omega(key) is 1 for every variant.
std::vector<double> confidence_weights(std::span<const double> frame_cd, int key,
                                       double epoch_fraction, DeltaSchedule schedule,
                                       OmegaVariant variant);

// ---------------------------------------------------------------------------
// Isometry
// ---------------------------------------------------------------------------

template <typename T>
struct IsometryResult {
  double value = 0.0;
  int degenerate_key_edges = 0;  // key length exactly 0
  std::vector<std::vector<Vec3<T>>> grad;  // per frame, per vertex
};

// mean over frames and edges of | |x_i - x_j| - key_length |. Key lengths
// are constants (stop-gradient).
template <typename T>
IsometryResult<T> isometry_loss(const std::vector<std::vector<Vec3<T>>>& frames,
                                std::span<const Edge> edges,
                                std::span<const T> key_lengths, bool want_grad = true);

template <typename T>
std::vector<T> edge_lengths(std::span<const Vec3<T>> vertices, std::span<const Edge> edges);

// ---------------------------------------------------------------------------
// Total objective
// ---------------------------------------------------------------------------

struct ObjectiveConfig {
  double w_iso = 100.0;
  bool use_isometry = true;
  IsoLengths iso_lengths = IsoLengths::Keyframe;
  ChamferOptions chamfer;
  DeltaSchedule delta = DeltaSchedule::Default;
  OmegaVariant omega = OmegaVariant::Default;
  kernels::Exec exec = kernels::Exec::Parallel;
};

struct LossBreakdown {
  double total = 0.0;
  double deformation = 0.0;
  double isometry = 0.0;
  std::vector<double> frame_cd;
  std::vector<double> weights;
};

// Quantities treated as constants during differentiation.
template <typename T>
struct DetachedTerms {
  std::vector<ChamferAssignment> assignments;  // per frame
  std::vector<double> frame_cd;
  std::vector<double> weights;
  std::vector<T> key_lengths;  // target edge lengths of the isometry term
};

template <typename T>
struct ObjectiveInputs {
  const std::vector<std::vector<Vec3<T>>>* clouds = nullptr;  // per frame
  const std::vector<KdTree<T>>* cloud_trees = nullptr;        // per frame
  std::span<const Edge> edges;
  std::span<const T> reference_lengths;  // used with IsoLengths::Reference
  int key = 0;  // 0-based keyframe
  double epoch_fraction = 0.0;
};

// Refreshes assignments, Chamfer values, confidence weights and keyframe edge
// lengths from the current predictions.
template <typename T>
DetachedTerms<T> detach_terms(const std::vector<std::vector<Vec3<T>>>& pred,
                              const ObjectiveInputs<T>& in, const ObjectiveConfig& cfg);

// L = (1/T) sum_t w_t CD_t + w_iso L_iso with every detached quantity fixed.
// Gradient w.r.t. the predicted vertices goes to `grad` when non-null.
template <typename T>
LossBreakdown evaluate_loss(const std::vector<std::vector<Vec3<T>>>& pred,
                            const ObjectiveInputs<T>& in, const DetachedTerms<T>& detached,
                            const ObjectiveConfig& cfg,
                            std::vector<std::vector<Vec3<T>>>* grad);

// detach_terms followed by evaluate_loss.
template <typename T>
LossBreakdown total_loss(const std::vector<std::vector<Vec3<T>>>& pred,
                         const ObjectiveInputs<T>& in, const ObjectiveConfig& cfg,
                         std::vector<std::vector<Vec3<T>>>* grad,
                         DetachedTerms<T>* detached_out = nullptr);

}  // namespace neupig
