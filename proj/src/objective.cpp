#include "neupig/objective.hpp"

#include <cmath>

namespace neupig {

// ---------------------------------------------------------------------------
// Chamfer
// ---------------------------------------------------------------------------

template <typename T>
ChamferAssignment chamfer_assignment(std::span<const Vec3<T>> A, const KdTree<T>& tree_a,
                                     std::span<const Vec3<T>> B, const KdTree<T>& tree_b) {
  require(!A.empty() && !B.empty(), "chamfer: empty point set");
  ChamferAssignment out;
  out.a_to_b.resize(A.size());
  out.b_to_a.resize(B.size());
  std::vector<T> scratch(std::max(A.size(), B.size()));
  kernels::nearest_batch(tree_b, A, std::span<int>(out.a_to_b),
                         std::span<T>(scratch.data(), A.size()), kernels::Exec::Parallel);
  kernels::nearest_batch(tree_a, B, std::span<int>(out.b_to_a),
                         std::span<T>(scratch.data(), B.size()), kernels::Exec::Parallel);
  return out;
}

template <typename T>
ChamferResult<T> chamfer_with_assignment(std::span<const Vec3<T>> A,
                                         std::span<const Vec3<T>> B,
                                         const ChamferAssignment& asg,
                                         const ChamferOptions& opts, bool want_grad) {
  require(!A.empty() && !B.empty(), "chamfer: empty point set");
  require(asg.a_to_b.size() == A.size() && asg.b_to_a.size() == B.size(),
          "chamfer: assignment does not match point sets");
  const double cap = opts.truncation * opts.truncation;
  ChamferResult<T> r;
  if (want_grad) r.grad.assign(A.size(), Vec3<T>::Zero());

  const T scale_a = T(2) / static_cast<T>(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const Vec3<T> diff = A[i] - B[asg.a_to_b[i]];
    const double s = static_cast<double>(squared_distance(A[i], B[asg.a_to_b[i]]));
    if (s < cap) {
      r.a_to_b += s;
      if (want_grad) r.grad[i] += scale_a * diff;
    } else {
      r.a_to_b += cap;
    }
  }
  const T scale_b = T(2) / static_cast<T>(B.size());
  for (std::size_t j = 0; j < B.size(); ++j) {
    const int i = asg.b_to_a[j];
    const Vec3<T> diff = A[i] - B[j];
    const double s = static_cast<double>(squared_distance(A[i], B[j]));
    if (s < cap) {
      r.b_to_a += s;
      if (want_grad) r.grad[i] += scale_b * diff;
    } else {
      r.b_to_a += cap;
    }
  }
  r.a_to_b /= static_cast<double>(A.size());
  r.b_to_a /= static_cast<double>(B.size());
  r.value = r.a_to_b + r.b_to_a;
  return r;
}

template <typename T>
ChamferResult<T> chamfer(std::span<const Vec3<T>> A, std::span<const Vec3<T>> B,
                         const ChamferOptions& opts, bool want_grad) {
  require(!A.empty() && !B.empty(), "chamfer: empty point set");
  const KdTree<T> tree_a(A);
  const KdTree<T> tree_b(B);
  return chamfer_with_assignment(A, B, chamfer_assignment(A, tree_a, B, tree_b), opts,
                                 want_grad);
}

// ---------------------------------------------------------------------------
// Confidence weighting
// ---------------------------------------------------------------------------

std::string to_string(OmegaVariant v) {
  switch (v) {
    case OmegaVariant::Default: return "default";
    case OmegaVariant::Constant: return "constant";
    case OmegaVariant::Delta: return "delta";
    case OmegaVariant::Single: return "single";
  }
  return "?";
}

std::string to_string(DeltaSchedule v) {
  switch (v) {
    case DeltaSchedule::Default: return "default";
    case DeltaSchedule::Constant: return "constant";
    case DeltaSchedule::Linear: return "linear";
    case DeltaSchedule::Exponential: return "exponential";
    case DeltaSchedule::Interpolated: return "interpolated";
  }
  return "?";
}

std::string to_string(IsoLengths v) {
  return v == IsoLengths::Reference ? "reference" : "keyframe";
}

IsoLengths parse_iso_lengths(const std::string& s) {
  if (s == "keyframe") return IsoLengths::Keyframe;
  if (s == "reference") return IsoLengths::Reference;
  fail(ErrorKind::Parse, "unknown isometry length source '" + s + "' (expected keyframe or reference)");
}

OmegaVariant parse_omega(const std::string& s) {
  if (s == "default") return OmegaVariant::Default;
  if (s == "constant") return OmegaVariant::Constant;
  if (s == "delta") return OmegaVariant::Delta;
  if (s == "single") return OmegaVariant::Single;
  fail(ErrorKind::Parse, "unknown omega variant '" + s + "'");
}

DeltaSchedule parse_delta(const std::string& s) {
  if (s == "default") return DeltaSchedule::Default;
  if (s == "constant") return DeltaSchedule::Constant;
  if (s == "linear") return DeltaSchedule::Linear;
  if (s == "exponential") return DeltaSchedule::Exponential;
  if (s == "interpolated") return DeltaSchedule::Interpolated;
  fail(ErrorKind::Parse, "unknown delta schedule '" + s + "'");
}

double omega(double cd_t, double cd_key, OmegaVariant variant) {
  switch (variant) {
    case OmegaVariant::Constant: return 1.0;
    case OmegaVariant::Delta: return 0.5;
    case OmegaVariant::Default:
    case OmegaVariant::Single: return 1.0 / (1.0 + std::max(0.0, cd_t - cd_key));
  }
  return 1.0;
}

DeltaValue delta_schedule(double e, DeltaSchedule schedule) {
  if (!(e >= 0.0 && e <= 1.0))
    fail(ErrorKind::InvalidArgument, "delta_schedule: epoch fraction outside [0,1]");
  switch (schedule) {
    case DeltaSchedule::Default: return {1.0 - std::sqrt(e), false};
    case DeltaSchedule::Constant: return {1.0, false};
    case DeltaSchedule::Linear: return {1.0 - e, false};
    case DeltaSchedule::Exponential: return {std::exp(-kExponentialDeltaRate * e), false};
    case DeltaSchedule::Interpolated: return {1.0, true};
  }
  return {};
}

std::vector<double> confidence_weights(std::span<const double> cd, int key,
                                       double e, DeltaSchedule schedule,
                                       OmegaVariant variant) {
  const int T = static_cast<int>(cd.size());
  require(key >= 0 && key < T, "confidence_weights: keyframe out of range");
  const DeltaValue dv = delta_schedule(e, schedule);
  std::vector<double> om(T);
  for (int t = 0; t < T; ++t) om[t] = t == key ? 1.0 : omega(cd[t], cd[key], variant);

  std::vector<double> w(T, 1.0);
  if (dv.interpolated) {
    for (int t = 0; t < T; ++t) w[t] = (1.0 - e) * om[t] + e;
    return w;
  }
  if (variant != OmegaVariant::Default) {
    for (int t = 0; t < T; ++t) w[t] = std::pow(om[t], dv.delta);
    return w;
  }
  // Running product outward from the keyframe.
  double acc = 1.0;
  for (int t = key + 1; t < T; ++t) {
    acc *= std::pow(om[t], dv.delta);
    w[t] = acc;
  }
  acc = 1.0;
  for (int t = key - 1; t >= 0; --t) {
    acc *= std::pow(om[t], dv.delta);
    w[t] = acc;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Isometry
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> edge_lengths(std::span<const Vec3<T>> v, std::span<const Edge> edges) {
  std::vector<T> out(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e)
    out[e] = (v[edges[e].first] - v[edges[e].second]).norm();
  return out;
}

template <typename T>
IsometryResult<T> isometry_loss(const std::vector<std::vector<Vec3<T>>>& frames,
                                std::span<const Edge> edges,
                                std::span<const T> key_lengths, bool want_grad) {
  require(!frames.empty(), "isometry_loss: no frames");
  require(!edges.empty(), "isometry_loss: empty edge set");
  require(key_lengths.size() == edges.size(), "isometry_loss: key length count mismatch");
  IsometryResult<T> r;
  for (T k : key_lengths) r.degenerate_key_edges += k == T(0);
  const double norm = 1.0 / (static_cast<double>(frames.size()) * edges.size());
  const T gscale = static_cast<T>(norm);
  if (want_grad) r.grad.resize(frames.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& x = frames[t];
    if (want_grad) r.grad[t].assign(x.size(), Vec3<T>::Zero());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [i, j] = edges[e];
      const Vec3<T> d = x[i] - x[j];
      const T len = d.norm();
      const T diff = len - key_lengths[e];
      sum += std::abs(static_cast<double>(diff));
      if (!want_grad || diff == T(0) || len == T(0)) continue;
      const Vec3<T> g = (diff > T(0) ? gscale : -gscale) / len * d;
      r.grad[t][i] += g;
      r.grad[t][j] -= g;
    }
  }
  r.value = sum * norm;
  return r;
}

// ---------------------------------------------------------------------------
// Total objective
// ---------------------------------------------------------------------------

template <typename T>
DetachedTerms<T> detach_terms(const std::vector<std::vector<Vec3<T>>>& pred,
                              const ObjectiveInputs<T>& in, const ObjectiveConfig& cfg) {
  const auto& clouds = *in.clouds;
  const auto& trees = *in.cloud_trees;
  const std::size_t T_frames = pred.size();
  require(clouds.size() == T_frames && trees.size() == T_frames,
          "objective: frame count mismatch");
  DetachedTerms<T> d;
  d.assignments.resize(T_frames);
  d.frame_cd.resize(T_frames);
  for (std::size_t t = 0; t < T_frames; ++t) {
    const std::span<const Vec3<T>> A(pred[t]);
    const std::span<const Vec3<T>> B(clouds[t]);
    const KdTree<T> tree_a(A);
    auto& asg = d.assignments[t];
    asg.a_to_b.resize(A.size());
    asg.b_to_a.resize(B.size());
    std::vector<T> scratch(std::max(A.size(), B.size()));
    kernels::nearest_batch(trees[t], A, std::span<int>(asg.a_to_b),
                           std::span<T>(scratch.data(), A.size()), cfg.exec);
    kernels::nearest_batch(tree_a, B, std::span<int>(asg.b_to_a),
                           std::span<T>(scratch.data(), B.size()), cfg.exec);
    d.frame_cd[t] = chamfer_with_assignment(A, B, asg, cfg.chamfer, false).value;
  }
  d.weights = confidence_weights(d.frame_cd, in.key, in.epoch_fraction, cfg.delta, cfg.omega);
  if (cfg.iso_lengths == IsoLengths::Reference) {
    require(in.reference_lengths.size() == in.edges.size(),
            "objective: reference edge lengths missing");
    d.key_lengths.assign(in.reference_lengths.begin(), in.reference_lengths.end());
  } else {
    d.key_lengths = edge_lengths(std::span<const Vec3<T>>(pred[in.key]), in.edges);
  }
  return d;
}

template <typename T>
LossBreakdown evaluate_loss(const std::vector<std::vector<Vec3<T>>>& pred,
                            const ObjectiveInputs<T>& in, const DetachedTerms<T>& det,
                            const ObjectiveConfig& cfg,
                            std::vector<std::vector<Vec3<T>>>* grad) {
  const auto& clouds = *in.clouds;
  const std::size_t T_frames = pred.size();
  LossBreakdown out;
  out.frame_cd.resize(T_frames);
  out.weights = det.weights;
  if (grad) grad->resize(T_frames);
  const double inv_t = 1.0 / static_cast<double>(T_frames);
  for (std::size_t t = 0; t < T_frames; ++t) {
    const auto r = chamfer_with_assignment(std::span<const Vec3<T>>(pred[t]),
                                           std::span<const Vec3<T>>(clouds[t]),
                                           det.assignments[t], cfg.chamfer, grad != nullptr);
    out.frame_cd[t] = r.value;
    out.deformation += det.weights[t] * r.value;
    if (grad) {
      const T s = static_cast<T>(det.weights[t] * inv_t);
      auto& g = (*grad)[t];
      g.resize(pred[t].size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = s * r.grad[i];
    }
  }
  out.deformation *= inv_t;

  if (cfg.use_isometry && cfg.w_iso != 0.0 && !in.edges.empty()) {
    const auto iso = isometry_loss(pred, in.edges, std::span<const T>(det.key_lengths),
                                   grad != nullptr);
    out.isometry = iso.value;
    if (grad) {
      const T w = static_cast<T>(cfg.w_iso);
      for (std::size_t t = 0; t < T_frames; ++t)
        for (std::size_t i = 0; i < pred[t].size(); ++i)
          (*grad)[t][i] += w * iso.grad[t][i];
    }
  }
  const double w_iso = cfg.use_isometry ? cfg.w_iso : 0.0;
  out.total = out.deformation + w_iso * out.isometry;
  return out;
}

template <typename T>
LossBreakdown total_loss(const std::vector<std::vector<Vec3<T>>>& pred,
                         const ObjectiveInputs<T>& in, const ObjectiveConfig& cfg,
                         std::vector<std::vector<Vec3<T>>>* grad,
                         DetachedTerms<T>* detached_out) {
  DetachedTerms<T> det = detach_terms(pred, in, cfg);
  LossBreakdown out = evaluate_loss(pred, in, det, cfg, grad);
  if (detached_out) *detached_out = std::move(det);
  return out;
}

#define NEUPIG_INSTANTIATE(T)                                                               \
  template ChamferAssignment chamfer_assignment(std::span<const Vec3<T>>, const KdTree<T>&, \
                                                std::span<const Vec3<T>>, const KdTree<T>&); \
  template ChamferResult<T> chamfer_with_assignment(                                        \
      std::span<const Vec3<T>>, std::span<const Vec3<T>>, const ChamferAssignment&,          \
      const ChamferOptions&, bool);                                                         \
  template ChamferResult<T> chamfer(std::span<const Vec3<T>>, std::span<const Vec3<T>>,     \
                                    const ChamferOptions&, bool);                           \
  template std::vector<T> edge_lengths(std::span<const Vec3<T>>, std::span<const Edge>);    \
  template IsometryResult<T> isometry_loss(const std::vector<std::vector<Vec3<T>>>&,        \
                                           std::span<const Edge>, std::span<const T>, bool); \
  template DetachedTerms<T> detach_terms(const std::vector<std::vector<Vec3<T>>>&,          \
                                         const ObjectiveInputs<T>&, const ObjectiveConfig&); \
  template LossBreakdown evaluate_loss(const std::vector<std::vector<Vec3<T>>>&,            \
                                       const ObjectiveInputs<T>&, const DetachedTerms<T>&,  \
                                       const ObjectiveConfig&,                              \
                                       std::vector<std::vector<Vec3<T>>>*);                 \
  template LossBreakdown total_loss(const std::vector<std::vector<Vec3<T>>>&,               \
                                    const ObjectiveInputs<T>&, const ObjectiveConfig&,      \
                                    std::vector<std::vector<Vec3<T>>>*, DetachedTerms<T>*);

NEUPIG_INSTANTIATE(float)
NEUPIG_INSTANTIATE(double)
#undef NEUPIG_INSTANTIATE

}  // namespace neupig
