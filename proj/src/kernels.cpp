#include "neupig/kernels.hpp"

#include <omp.h>

namespace neupig::kernels {

namespace {
int g_workers = 0;

int active_workers() { return g_workers > 0 ? g_workers : omp_get_max_threads(); }
}  // namespace

void set_worker_count(int n) {
  g_workers = n;
  if (n > 0) omp_set_num_threads(n);
}

int worker_count() { return active_workers(); }

template <typename T>
void nearest_batch(const KdTree<T>& tree, std::span<const Vec3<T>> queries,
                   std::span<int> idx, std::span<T> d2, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel) \
    num_threads(active_workers())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto hit = tree.nearest(queries[i]);
    idx[i] = hit.index;
    d2[i] = hit.sq_dist;
  }
}

template <typename T>
void nearest_batch_brute(std::span<const Vec3<T>> targets,
                         std::span<const Vec3<T>> queries, std::span<int> idx,
                         std::span<T> d2, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel) \
    num_threads(active_workers())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto hit = nearest_brute_force(targets, queries[i]);
    idx[i] = hit.index;
    d2[i] = hit.sq_dist;
  }
}

template <typename T>
void gather_latents(const LatentGridPyramid<T>& pyramid,
                    std::span<const Vec3<T>> positions, std::span<const Vec3<T>> normals,
                    MatX<T>& z_p, MatX<T>& z_n, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(positions.size());
  const bool use_normals = !normals.empty();
  z_p.setZero(pyramid.position_channels(), n);
  z_n.setZero(pyramid.normal_channels(), n);
  const T inv_levels = T(1) / T(pyramid.levels());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel) \
    num_threads(active_workers())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::span<T> zp(z_p.col(i).data(), static_cast<std::size_t>(z_p.rows()));
    for (const auto& level : pyramid.position_levels)
      gather(level, trilinear_stencil(level.resolution, positions[i]), inv_levels, zp);
    if (use_normals) {
      std::span<T> zn(z_n.col(i).data(), static_cast<std::size_t>(z_n.rows()));
      gather(pyramid.normal_level,
             trilinear_stencil(pyramid.normal_level.resolution, normals[i]), T(1), zn);
    }
  }
}

template <typename T>
void scatter_latents(const LatentGridPyramid<T>& pyramid,
                     std::span<const Vec3<T>> positions, std::span<const Vec3<T>> normals,
                     const MatX<T>& dz_p, const MatX<T>& dz_n,
                     std::vector<std::vector<T>>& position_grads,
                     std::vector<T>& normal_grad, Exec exec) {
  const int L = pyramid.levels();
  const auto n = positions.size();
  const bool use_normals = !normals.empty();
  const T inv_levels = T(1) / T(L);
  // Task L is the normal grid.
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel) \
    num_threads(active_workers())
  for (int task = 0; task <= L; ++task) {
    if (task == L) {
      if (!use_normals) continue;
      const auto& level = pyramid.normal_level;
      for (std::size_t i = 0; i < n; ++i)
        scatter_add(trilinear_stencil(level.resolution, normals[i]),
                    std::span<const T>(dz_n.col(i).data(), level.channels), T(1),
                    level.channels, std::span<T>(normal_grad));
      continue;
    }
    const auto& level = pyramid.position_levels[task];
    for (std::size_t i = 0; i < n; ++i)
      scatter_add(trilinear_stencil(level.resolution, positions[i]),
                  std::span<const T>(dz_p.col(i).data(), level.channels), inv_levels,
                  level.channels, std::span<T>(position_grads[task]));
  }
}

#define NEUPIG_INSTANTIATE(T)                                                           \
  template void nearest_batch(const KdTree<T>&, std::span<const Vec3<T>>, std::span<int>, \
                              std::span<T>, Exec);                                      \
  template void nearest_batch_brute(std::span<const Vec3<T>>, std::span<const Vec3<T>>, \
                                    std::span<int>, std::span<T>, Exec);                \
  template void gather_latents(const LatentGridPyramid<T>&, std::span<const Vec3<T>>,   \
                               std::span<const Vec3<T>>, MatX<T>&, MatX<T>&, Exec);     \
  template void scatter_latents(const LatentGridPyramid<T>&, std::span<const Vec3<T>>,  \
                                std::span<const Vec3<T>>, const MatX<T>&,              \
                                const MatX<T>&, std::vector<std::vector<T>>&,          \
                                std::vector<T>&, Exec);

NEUPIG_INSTANTIATE(float)
NEUPIG_INSTANTIATE(double)
#undef NEUPIG_INSTANTIATE

}  // namespace neupig::kernels
