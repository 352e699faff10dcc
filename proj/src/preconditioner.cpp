#include "neupig/preconditioner.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <string>

namespace neupig {

int GridLaplacian::degree(int x, int y, int z) const {
  const int R = resolution;
  return (x > 0) + (x < R - 1) + (y > 0) + (y < R - 1) + (z > 0) + (z < R - 1);
}

GridLaplacian build_laplacian(int resolution) {
  require(resolution >= 2, "build_laplacian: resolution must be >= 2");
  GridLaplacian lap;
  lap.resolution = resolution;
  const int R = resolution;
  const int n = R * R * R;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n) * 7);
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const int i = x + R * (y + R * z);
        entries.emplace_back(i, i, lap.degree(x, y, z));
        if (x > 0) entries.emplace_back(i, i - 1, -1.0);
        if (x < R - 1) entries.emplace_back(i, i + 1, -1.0);
        if (y > 0) entries.emplace_back(i, i - R, -1.0);
        if (y < R - 1) entries.emplace_back(i, i + R, -1.0);
        if (z > 0) entries.emplace_back(i, i - R * R, -1.0);
        if (z < R - 1) entries.emplace_back(i, i + R * R, -1.0);
      }
  lap.matrix.resize(n, n);
  lap.matrix.setFromTriplets(entries.begin(), entries.end());
  return lap;
}

std::vector<double> apply_shifted_laplacian(int resolution, int channels,
                                            std::span<const double> x,
                                            double lambda) {
  const int R = resolution;
  const int C = channels;
  require(x.size() == static_cast<std::size_t>(R) * R * R * C,
          "apply_shifted_laplacian: size mismatch");
  std::vector<double> y(x.size());
  const std::size_t stride[3] = {static_cast<std::size_t>(C),
                                 static_cast<std::size_t>(C) * R,
                                 static_cast<std::size_t>(C) * R * R};
  for (int z = 0; z < R; ++z)
    for (int yy = 0; yy < R; ++yy)
      for (int xx = 0; xx < R; ++xx) {
        const std::size_t i = (xx + R * (yy + static_cast<std::size_t>(R) * z)) * C;
        const int coord[3] = {xx, yy, z};
        for (int c = 0; c < C; ++c) {
          double lap = 0.0;
          for (int a = 0; a < 3; ++a) {
            if (coord[a] > 0) lap += x[i + c] - x[i + c - stride[a]];
            if (coord[a] < R - 1) lap += x[i + c] - x[i + c + stride[a]];
          }
          y[i + c] = x[i + c] + lambda * lap;
        }
      }
  return y;
}

namespace {

// Orthonormal DCT-II basis: row k is the k-th eigenvector of the path-graph
// Laplacian with eigenvalue 2 - 2cos(pi k / R).
Eigen::MatrixXd dct_basis(int R) {
  Eigen::MatrixXd Q(R, R);
  for (int k = 0; k < R; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / R) : std::sqrt(2.0 / R);
    for (int i = 0; i < R; ++i)
      Q(k, i) = s * std::cos(std::numbers::pi * k * (i + 0.5) / R);
  }
  return Q;
}

// Right-multiplies each axis slice of the node-major tensor by M.
void transform_axes(std::vector<double>& data, int R, int C,
                    const Eigen::MatrixXd& M) {
  using Map = Eigen::Map<Eigen::MatrixXd>;
  const Eigen::Index rows_x = C;
  for (int b = 0; b < R * R; ++b) {
    Map block(data.data() + static_cast<std::size_t>(b) * C * R, rows_x, R);
    block = (block * M).eval();
  }
  for (int z = 0; z < R; ++z) {
    Map block(data.data() + static_cast<std::size_t>(z) * C * R * R,
              static_cast<Eigen::Index>(C) * R, R);
    block = (block * M).eval();
  }
  Map block(data.data(), static_cast<Eigen::Index>(C) * R * R, R);
  block = (block * M).eval();
}

void spectral_filter(std::vector<double>& data, int R, int C, double lambda) {
  const Eigen::MatrixXd Q = dct_basis(R);
  const Eigen::MatrixXd Qt = Q.transpose();
  std::vector<double> mu(R);
  for (int k = 0; k < R; ++k)
    mu[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * k / R);

  transform_axes(data, R, C, Qt);
  for (int kz = 0; kz < R; ++kz)
    for (int ky = 0; ky < R; ++ky)
      for (int kx = 0; kx < R; ++kx) {
        const double s = 1.0 + lambda * (mu[kx] + mu[ky] + mu[kz]);
        const double g = 1.0 / (s * s);
        double* p = data.data() + (kx + R * (ky + static_cast<std::size_t>(R) * kz)) * C;
        for (int c = 0; c < C; ++c) p[c] *= g;
      }
  transform_axes(data, R, C, Q);
}

PreconditionStats cg_filter(std::vector<double>& data, int R, int C,
                            double lambda, const PreconditionOptions& opts) {
  const GridLaplacian lap = build_laplacian(R);
  const Eigen::Index n = static_cast<Eigen::Index>(lap.node_count());
  Eigen::SparseMatrix<double> A(n, n);
  A.setIdentity();
  A += lambda * lap.matrix;

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  // The recurrence residual drifts from the true one; aim below the contract.
  cg.setTolerance(0.1 * opts.tolerance);
  cg.setMaxIterations(opts.max_iterations);
  cg.compute(A);

  PreconditionStats stats;
  Eigen::VectorXd rhs(n);
  for (int c = 0; c < C; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) rhs[i] = data[i * C + c];
    for (int pass = 0; pass < 2; ++pass) {
      const double rhs_norm = rhs.norm();
      if (rhs_norm == 0.0) break;
      Eigen::VectorXd sol = cg.solve(rhs);
      stats.iterations += static_cast<int>(cg.iterations());
      const double rel = (A * sol - rhs).norm() / rhs_norm;
      stats.max_rel_residual = std::max(stats.max_rel_residual, rel);
      if (cg.info() != Eigen::Success || !(rel <= opts.tolerance))
        fail(ErrorKind::Numeric,
             "precondition: CG did not converge (resolution " + std::to_string(R) +
                 ", lambda " + std::to_string(lambda) + ", residual " +
                 std::to_string(rel) + ")");
      rhs = std::move(sol);
    }
    for (Eigen::Index i = 0; i < n; ++i) data[i * C + c] = rhs[i];
  }
  return stats;
}

}  // namespace

template <typename T>
PreconditionStats precondition(int resolution, int channels, std::span<T> grad,
                               double lambda, const PreconditionOptions& opts) {
  const int R = resolution;
  const int C = channels;
  require(R >= 2 && C >= 1, "precondition: bad grid shape");
  require(grad.size() == static_cast<std::size_t>(R) * R * R * C,
          "precondition: gradient size mismatch");
  require(lambda >= 0.0, "precondition: lambda must be >= 0");
  if (lambda == 0.0) return {};
  for (const T& g : grad)
    if (!std::isfinite(static_cast<double>(g)))
      fail(ErrorKind::Numeric, "precondition: non-finite gradient");

  std::vector<double> data(grad.begin(), grad.end());
  PreconditionStats stats;
  if (opts.backend == PreconditionBackend::Spectral)
    spectral_filter(data, R, C, lambda);
  else
    stats = cg_filter(data, R, C, lambda, opts);
  for (std::size_t i = 0; i < data.size(); ++i) grad[i] = static_cast<T>(data[i]);
  return stats;
}

template PreconditionStats precondition(int, int, std::span<float>, double,
                                        const PreconditionOptions&);
template PreconditionStats precondition(int, int, std::span<double>, double,
                                        const PreconditionOptions&);

}  // namespace neupig
