#include "neupig/latent_grid.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace neupig {

template <typename T>
GridLevel<T>::GridLevel(int resolution_, int channels_)
    : resolution(resolution_), channels(channels_) {
  require(resolution >= 2, "grid resolution must be >= 2");
  require(channels >= 1, "grid channels must be >= 1");
  features.assign(node_count() * channels, T(0));
}

template <typename T>
TrilinearStencil<T> trilinear_stencil(int resolution, const Vec3<T>& point) {
  TrilinearStencil<T> s;
  std::array<int, 3> base{};
  std::array<T, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    T p = point[a];
    if (!(p >= T(-1))) {
      p = T(-1);
      s.clamped = true;
    } else if (p > T(1)) {
      p = T(1);
      s.clamped = true;
    }
    T u = (p + T(1)) * T(0.5) * T(resolution - 1);
    // Node coordinates like -1 + 2/7 are not representable; snap queries
    // that land within rounding of a node onto it.
    const T nearest = std::round(u);
    if (std::abs(u - nearest) <= T(8) * std::numeric_limits<T>::epsilon() * T(resolution))
      u = nearest;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, resolution - 2);
    base[a] = i;
    frac[a] = std::clamp(u - T(i), T(0), T(1));
  }
  s.frac = frac;
  for (int k = 0; k < 8; ++k) {
    const int dx = k & 1;
    const int dy = (k >> 1) & 1;
    const int dz = (k >> 2) & 1;
    const T wx = dx ? frac[0] : T(1) - frac[0];
    const T wy = dy ? frac[1] : T(1) - frac[1];
    const T wz = dz ? frac[2] : T(1) - frac[2];
    s.nodes[k] = (base[0] + dx) + resolution * ((base[1] + dy) + resolution * (base[2] + dz));
    s.weights[k] = wx * wy * wz;
  }
  return s;
}

template <typename T>
void gather(const GridLevel<T>& level, const TrilinearStencil<T>& stencil,
            T scale, std::span<T> out) {
  // Nested lerps a + f (b - a) rather than the weighted sum, so a constant
  // neighborhood reproduces its value exactly.
  const int C = level.channels;
  const auto [fx, fy, fz] = stencil.frac;
  const T* f[8];
  for (int k = 0; k < 8; ++k)
    f[k] = level.features.data() + static_cast<std::size_t>(stencil.nodes[k]) * C;
  for (int c = 0; c < C; ++c) {
    const T x00 = f[0][c] + fx * (f[1][c] - f[0][c]);
    const T x10 = f[2][c] + fx * (f[3][c] - f[2][c]);
    const T x01 = f[4][c] + fx * (f[5][c] - f[4][c]);
    const T x11 = f[6][c] + fx * (f[7][c] - f[6][c]);
    const T y0 = x00 + fy * (x10 - x00);
    const T y1 = x01 + fy * (x11 - x01);
    out[c] += scale * (y0 + fz * (y1 - y0));
  }
}

template <typename T>
void scatter_add(const TrilinearStencil<T>& stencil, std::span<const T> upstream,
                 T scale, int channels, std::span<T> grad) {
  for (int k = 0; k < 8; ++k) {
    const T w = scale * stencil.weights[k];
    if (w == T(0)) continue;
    T* g = grad.data() + static_cast<std::size_t>(stencil.nodes[k]) * channels;
    for (int c = 0; c < channels; ++c) g[c] += w * upstream[c];
  }
}

template <typename T>
VecX<T> sample_level(const GridLevel<T>& level, const Vec3<T>& point) {
  VecX<T> out = VecX<T>::Zero(level.channels);
  gather(level, trilinear_stencil(level.resolution, point), T(1),
         std::span<T>(out.data(), out.size()));
  return out;
}

template <typename T>
std::array<ScatterContribution<T>, 8> sample_level_vjp(
    const GridLevel<T>& level, const Vec3<T>& point, std::span<const T> upstream) {
  require(static_cast<int>(upstream.size()) == level.channels,
          "sample_level_vjp: upstream dimension mismatch");
  const auto stencil = trilinear_stencil(level.resolution, point);
  const Eigen::Map<const VecX<T>> up(upstream.data(), level.channels);
  std::array<ScatterContribution<T>, 8> out;
  for (int k = 0; k < 8; ++k) {
    out[k].node = stencil.nodes[k];
    out[k].value = stencil.weights[k] * up;
  }
  return out;
}

double GridConfig::lambda(int l) const {
  return lambda_base * std::pow(lambda_growth, l);
}

double GridConfig::learning_rate(int l) const {
  return lr_base * std::pow(lr_growth, l);
}

void GridConfig::validate() const {
  require(levels >= 1, "grid levels must be >= 1");
  require(base_resolution >= 2, "grid base resolution must be >= 2");
  require(resolution_step >= 0, "grid resolution step must be >= 0");
  require(position_channels >= 1 && normal_channels >= 1,
          "grid channels must be >= 1");
  require(normal_resolution >= 2, "normal grid resolution must be >= 2");
  require(lambda_base >= 0 && normal_lambda >= 0, "lambda must be >= 0");
  require(lr_base >= 0 && normal_lr >= 0, "grid learning rates must be >= 0");
}

template <typename T>
LatentGridPyramid<T> LatentGridPyramid<T>::zeros(const GridConfig& cfg) {
  cfg.validate();
  LatentGridPyramid<T> p;
  for (int l = 1; l <= cfg.levels; ++l) {
    p.position_levels.emplace_back(cfg.resolution(l), cfg.position_channels);
    p.lambdas.push_back(cfg.lambda(l));
    p.learning_rates.push_back(cfg.learning_rate(l));
  }
  p.normal_level = GridLevel<T>(cfg.normal_resolution, cfg.normal_channels);
  p.normal_lambda = cfg.normal_lambda;
  p.normal_learning_rate = cfg.normal_lr;
  return p;
}

template <typename T>
VecX<T> aggregate_position(const LatentGridPyramid<T>& pyramid, const Vec3<T>& x) {
  VecX<T> out = VecX<T>::Zero(pyramid.position_channels());
  const T inv_levels = T(1) / T(pyramid.levels());
  for (const auto& level : pyramid.position_levels)
    gather(level, trilinear_stencil(level.resolution, x), inv_levels,
           std::span<T>(out.data(), out.size()));
  return out;
}

template <typename T>
VecX<T> sample_normal(const LatentGridPyramid<T>& pyramid, const Vec3<T>& n) {
  const double len = static_cast<double>(n.norm());
  if (!(std::abs(len - 1.0) <= 1e-6))
    fail(ErrorKind::InvalidArgument,
         "sample_normal: input is not unit length (|n| = " + std::to_string(len) + ")");
  return sample_level(pyramid.normal_level, n);
}

#define NEUPIG_INSTANTIATE(T)                                                   \
  template struct GridLevel<T>;                                                 \
  template struct LatentGridPyramid<T>;                                         \
  template TrilinearStencil<T> trilinear_stencil(int, const Vec3<T>&);         \
  template void gather(const GridLevel<T>&, const TrilinearStencil<T>&, T,     \
                       std::span<T>);                                           \
  template void scatter_add(const TrilinearStencil<T>&, std::span<const T>, T, \
                            int, std::span<T>);                                 \
  template VecX<T> sample_level(const GridLevel<T>&, const Vec3<T>&);          \
  template std::array<ScatterContribution<T>, 8> sample_level_vjp(             \
      const GridLevel<T>&, const Vec3<T>&, std::span<const T>);                 \
  template VecX<T> aggregate_position(const LatentGridPyramid<T>&,             \
                                      const Vec3<T>&);                          \
  template VecX<T> sample_normal(const LatentGridPyramid<T>&, const Vec3<T>&);

NEUPIG_INSTANTIATE(float)
NEUPIG_INSTANTIATE(double)
#undef NEUPIG_INSTANTIATE

}  // namespace neupig
