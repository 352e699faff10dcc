#pragma once

#include "neupig/common.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace neupig {

// Combinatorial graph Laplacian of the 6-connected R x R x R lattice:
// diagonal = node degree, -1 per lattice neighbor. Node order matches
// GridLevel (x fastest).
struct GridLaplacian {
  int resolution = 2;
  Eigen::SparseMatrix<double> matrix;

  std::size_t node_count() const {
    return static_cast<std::size_t>(resolution) * resolution * resolution;
  }
  int degree(int x, int y, int z) const;
};

GridLaplacian build_laplacian(int resolution);

enum class PreconditionBackend {
  // Exact solve in the lattice Laplacian eigenbasis (separable DCT-II).
  Spectral,
  // Jacobi-preconditioned conjugate gradient on the sparse operator.
  ConjugateGradient,
};

struct PreconditionOptions {
  PreconditionBackend backend = PreconditionBackend::Spectral;
  double tolerance = 1e-8;  // relative residual per solve
  int max_iterations = 2000;
};

struct PreconditionStats {
  int iterations = 0;          // CG iterations summed over both solves
  double max_rel_residual = 0;  // worst per-channel residual of either solve
};

// Replaces grad (node-major, `channels` values per node) by
// (I + lambda L)^-2 grad, channel by channel. lambda == 0 leaves grad
// untouched. Solves run in double precision regardless of T.
template <typename T>
PreconditionStats precondition(int resolution, int channels, std::span<T> grad,
                               double lambda, const PreconditionOptions& opts = {});

// y = (I + lambda L) x, node-major with `channels` per node.
std::vector<double> apply_shifted_laplacian(int resolution, int channels,
                                            std::span<const double> x,
                                            double lambda);

}  // namespace neupig
