#pragma once

// Data-parallel inner loops. Every kernel has a serial form kept as the
// reference; the OpenMP form must match it bit for bit.

#include "neupig/kdtree.hpp"
#include "neupig/latent_grid.hpp"

#include <span>
#include <vector>

namespace neupig::kernels {

enum class Exec { Serial, Parallel };

// Number of OpenMP workers used by Exec::Parallel. 0 keeps the runtime default.
void set_worker_count(int n);
int worker_count();

// idx[i], d2[i] = nearest target of queries[i].
template <typename T>
void nearest_batch(const KdTree<T>& tree, std::span<const Vec3<T>> queries,
                   std::span<int> idx, std::span<T> d2, Exec exec);

// Exhaustive scan over targets.
template <typename T>
void nearest_batch_brute(std::span<const Vec3<T>> targets,
                         std::span<const Vec3<T>> queries, std::span<int> idx,
                         std::span<T> d2, Exec exec);

// Column i of z_p / z_n receives the latent codes of vertex i. z_n is left
// zero when normals is empty.
template <typename T>
void gather_latents(const LatentGridPyramid<T>& pyramid,
                    std::span<const Vec3<T>> positions, std::span<const Vec3<T>> normals,
                    MatX<T>& z_p, MatX<T>& z_n, Exec exec);

// Adjoint of gather_latents: accumulates column i of dz_p / dz_n into the
// grid gradients. The parallel form splits work by grid level, so each
// level is still accumulated in vertex order.
template <typename T>
void scatter_latents(const LatentGridPyramid<T>& pyramid,
                     std::span<const Vec3<T>> positions, std::span<const Vec3<T>> normals,
                     const MatX<T>& dz_p, const MatX<T>& dz_n,
                     std::vector<std::vector<T>>& position_grads,
                     std::vector<T>& normal_grad, Exec exec);

}  // namespace neupig::kernels
