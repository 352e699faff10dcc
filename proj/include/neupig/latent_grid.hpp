#pragma once

#include "neupig/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace neupig {

// Dense lattice of feature vectors over [-1,1]^3. A resolution of R means R
// nodes per axis, node (x,y,z) sitting at -1 + 2*x/(R-1). Storage is
// node-major: features[node * channels + c] with node = x + R*(y + R*z).
template <typename T>
struct GridLevel {
  int resolution = 2;
  int channels = 1;
  std::vector<T> features;

  GridLevel() = default;
  GridLevel(int resolution, int channels);

  std::size_t node_count() const {
    return static_cast<std::size_t>(resolution) * resolution * resolution;
  }
  int node_index(int x, int y, int z) const {
    return x + resolution * (y + resolution * z);
  }
  std::span<T> node(std::size_t i) {
    return {features.data() + i * channels, static_cast<std::size_t>(channels)};
  }
  std::span<const T> node(std::size_t i) const {
    return {features.data() + i * channels, static_cast<std::size_t>(channels)};
  }
};

// The 8 lattice nodes surrounding a query point and their trilinear weights.
template <typename T>
struct TrilinearStencil {
  std::array<int, 8> nodes{};
  std::array<T, 8> weights{};
  std::array<T, 3> frac{};  // position inside the cell along x, y, z
  bool clamped = false;  // query lay outside the cube and was clamped
};

template <typename T>
TrilinearStencil<T> trilinear_stencil(int resolution, const Vec3<T>& point);

// out += scale * sum_k w_k * feature(node_k)
template <typename T>
void gather(const GridLevel<T>& level, const TrilinearStencil<T>& stencil,
            T scale, std::span<T> out);

// grad(node_k) += scale * w_k * upstream
template <typename T>
void scatter_add(const TrilinearStencil<T>& stencil, std::span<const T> upstream,
                 T scale, int channels, std::span<T> grad);

template <typename T>
VecX<T> sample_level(const GridLevel<T>& level, const Vec3<T>& point);

template <typename T>
struct ScatterContribution {
  int node = 0;
  VecX<T> value;
};

// Vector-Jacobian product of sample_level w.r.t. the node features.
template <typename T>
std::array<ScatterContribution<T>, 8> sample_level_vjp(
    const GridLevel<T>& level, const Vec3<T>& point, std::span<const T> upstream);

struct GridConfig {
  int levels = 8;
  int base_resolution = 2;
  int resolution_step = 3;
  int position_channels = 30;
  int normal_resolution = 4;
  int normal_channels = 2;
  // Level l (1-based) gets lambda = lambda_base * lambda_growth^l and
  // learning rate lr_base * lr_growth^l.
  double lambda_base = 0.4;
  double lambda_growth = 1.5;
  double lr_base = 0.005;
  double lr_growth = 2.5;
  double normal_lambda = 0.6;
  double normal_lr = 0.0125;

  int resolution(int level_1based) const {
    return base_resolution + resolution_step * (level_1based - 1);
  }
  double lambda(int level_1based) const;
  double learning_rate(int level_1based) const;
  void validate() const;
};

template <typename T>
struct LatentGridPyramid {
  std::vector<GridLevel<T>> position_levels;
  GridLevel<T> normal_level;
  std::vector<double> lambdas;         // per position level
  std::vector<double> learning_rates;  // per position level
  double normal_lambda = 0.0;
  double normal_learning_rate = 0.0;

  // All features zero.
  static LatentGridPyramid zeros(const GridConfig& cfg);

  int levels() const { return static_cast<int>(position_levels.size()); }
  int position_channels() const { return position_levels.front().channels; }
  int normal_channels() const { return normal_level.channels; }
};

// z_p(x) = (1/L) * sum_l z_p^l(x)
template <typename T>
VecX<T> aggregate_position(const LatentGridPyramid<T>& pyramid, const Vec3<T>& x);

// Samples the normal grid at the unit normal read as a coordinate.
template <typename T>
VecX<T> sample_normal(const LatentGridPyramid<T>& pyramid, const Vec3<T>& n);

}  // namespace neupig
