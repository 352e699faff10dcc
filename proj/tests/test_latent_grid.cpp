#include "support.hpp"

#include "neupig/kernels.hpp"
#include "neupig/latent_grid.hpp"
#include "neupig/preconditioner.hpp"

#include <doctest.h>

#include <numeric>

using namespace neupig;
using namespace testing_support;

namespace {

GridLevel<double> random_level(int R, int C, Rng& rng) {
  GridLevel<double> g(R, C);
  for (auto& v : g.features) v = rng.uniform(-1.0, 1.0);
  return g;
}

Vec3d node_position(int R, int x, int y, int z) {
  const double h = 2.0 / (R - 1);
  return Vec3d(-1 + h * x, -1 + h * y, -1 + h * z);
}

// Dense I + lambda L of the 6-connected lattice, assembled from scratch.
Eigen::MatrixXd dense_operator(int R, double lambda) {
  const int n = R * R * R;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  auto id = [R](int x, int y, int z) { return x + R * (y + R * z); };
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const int i = id(x, y, z);
        const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : d) {
          const int a = x + o[0], b = y + o[1], c = z + o[2];
          if (a < 0 || b < 0 || c < 0 || a >= R || b >= R || c >= R) continue;
          A(i, i) += lambda;
          A(i, id(a, b, c)) -= lambda;
        }
      }
  return A;
}

std::vector<double> random_field(std::size_t n, Rng& rng) {
  std::vector<double> g(n);
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  return g;
}

double rayleigh(const Eigen::MatrixXd& lap, const Eigen::VectorXd& p) {
  return p.dot(lap * p) / p.dot(p);
}

}  // namespace

TEST_CASE("sampling examples") {
  Rng rng(1);
  const auto g = random_level(5, 3, rng);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        const auto s = sample_level(g, node_position(5, x, y, z));
        for (int c = 0; c < 3; ++c)
          CHECK(s[c] == g.node(static_cast<std::size_t>(g.node_index(x, y, z)))[c]);
      }

  GridLevel<double> constant(4, 2);
  for (std::size_t i = 0; i < constant.node_count(); ++i) {
    constant.node(i)[0] = 0.3;
    constant.node(i)[1] = -1.7;
  }
  const double h = 2.0 / 3.0;
  const auto s = sample_level(constant, Vec3d(-1 + 1.5 * h, -1 + 0.5 * h, -1 + 2.5 * h));
  CHECK(s[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(-1.7).epsilon(1e-15));

  GridLevel<double> ramp(2, 1);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) ramp.features[static_cast<std::size_t>(ramp.node_index(x, y, z))] = x;
  CHECK(sample_level(ramp, Vec3d(0, 0.3, -0.8))[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sampling matches an independent trilinear evaluation") {
  Rng rng(2);
  for (int R : {2, 3, 5, 23}) {
    const auto g = random_level(R, 2, rng);
    for (int k = 0; k < 200; ++k) {
      const Vec3d p = random_points(1, rng)[0];
      Eigen::Vector2d expect = Eigen::Vector2d::Zero();
      const Vec3d u = (p.array() + 1.0) * 0.5 * (R - 1);
      int i0[3];
      double f[3];
      for (int a = 0; a < 3; ++a) {
        i0[a] = std::min(static_cast<int>(std::floor(u[a])), R - 2);
        f[a] = u[a] - i0[a];
      }
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
            const auto n = g.node(static_cast<std::size_t>(g.node_index(i0[0] + dx, i0[1] + dy, i0[2] + dz)));
            expect[0] += w * n[0];
            expect[1] += w * n[1];
          }
      const auto s = sample_level(g, p);
      CHECK(std::abs(s[0] - expect[0]) <= 1e-13);
      CHECK(std::abs(s[1] - expect[1]) <= 1e-13);
    }
  }
}

TEST_CASE("trilinear weights form a partition of unity") {
  Rng rng(3);
  for (int R : {2, 5, 23}) {
    for (int k = 0; k < 10000; ++k) {
      const auto st = trilinear_stencil<double>(R, random_points(1, rng)[0]);
      double sum = 0.0;
      for (double w : st.weights) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      CHECK_FALSE(st.clamped);
    }
  }
  const auto st = trilinear_stencil<double>(5, Vec3d(1.5, 0, -3));
  CHECK(st.clamped);
  double sum = 0.0;
  for (double w : st.weights) sum += w;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("sampling is affine along each axis inside a cell") {
  Rng rng(4);
  const auto g = random_level(5, 4, rng);
  const double h = 0.5;  // cell width at resolution 5
  for (int k = 0; k < 200; ++k) {
    const int cx = static_cast<int>(rng.uniform() * 4), cy = static_cast<int>(rng.uniform() * 4),
              cz = static_cast<int>(rng.uniform() * 4);
    const Vec3d lo(-1 + h * cx, -1 + h * cy, -1 + h * cz);
    const Vec3d base = lo + Vec3d(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)) * h;
    for (int a = 0; a < 3; ++a) {
      Vec3d p0 = base, p1 = base, p2 = base;
      p0[a] = lo[a] + 0.1 * h;
      p1[a] = lo[a] + 0.4 * h;
      p2[a] = lo[a] + 0.9 * h;
      const auto s0 = sample_level(g, p0), s1 = sample_level(g, p1), s2 = sample_level(g, p2);
      // s1 must lie on the segment through s0 and s2 at parameter 0.3 / 0.8
      const Eigen::VectorXd interp = s0 + (s2 - s0) * (0.3 / 0.8);
      CHECK((s1 - interp).cwiseAbs().maxCoeff() <= 1e-13);
    }
  }
}

TEST_CASE("sampling gradient") {
  Rng rng(5);
  const auto g = random_level(4, 3, rng);
  const std::vector<double> up = {0.5, -2.0, 1.25};

  // node query: everything to that node
  const auto at_node = sample_level_vjp(g, node_position(4, 1, 2, 3), std::span<const double>(up));
  int nonzero = 0;
  for (const auto& c : at_node)
    if (c.value.norm() > 0) {
      ++nonzero;
      CHECK(c.node == g.node_index(1, 2, 3));
      for (int k = 0; k < 3; ++k) CHECK(c.value[k] == up[static_cast<std::size_t>(k)]);
    }
  CHECK(nonzero == 1);

  // cell center: an eighth to each corner
  const double h = 2.0 / 3.0;
  const auto center = sample_level_vjp(g, Vec3d(-1 + 0.5 * h, -1 + 1.5 * h, -1 + 0.5 * h),
                                       std::span<const double>(up));
  Eigen::Vector3d total = Eigen::Vector3d::Zero();
  for (const auto& c : center) {
    for (int k = 0; k < 3; ++k) CHECK(c.value[k] == doctest::Approx(up[static_cast<std::size_t>(k)] / 8).epsilon(1e-14));
    total += c.value;
  }
  CHECK((total - Eigen::Vector3d(up[0], up[1], up[2])).norm() <= 1e-14);

  // random points: central differences of <upstream, sample> per node feature
  for (int k = 0; k < 30; ++k) {
    auto gl = random_level(4, 3, rng);
    const Vec3d p = random_points(1, rng)[0];
    const auto contrib = sample_level_vjp(gl, p, std::span<const double>(up));
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& c : contrib) sum += c.value;
    CHECK((sum - Eigen::Vector3d(up[0], up[1], up[2])).norm() <= 1e-13);
    for (const auto& c : contrib)
      for (int ch = 0; ch < 3; ++ch) {
        auto& v = gl.features[static_cast<std::size_t>(c.node) * 3 + static_cast<std::size_t>(ch)];
        const double keep = v, eps = 1e-6;
        v = keep + eps;
        const auto sp = sample_level(gl, p);
        v = keep - eps;
        const auto sm = sample_level(gl, p);
        v = keep;
        double fd = 0.0;
        for (int q = 0; q < 3; ++q) fd += up[static_cast<std::size_t>(q)] * (sp[q] - sm[q]) / (2 * eps);
        CHECK(std::abs(fd - c.value[ch]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
  }
}

TEST_CASE("level aggregation") {
  GridConfig cfg;
  cfg.levels = 2;
  cfg.position_channels = 2;
  auto p = LatentGridPyramid<double>::zeros(cfg);
  CHECK(aggregate_position(p, Vec3d(0.1, 0.2, 0.3)).norm() == 0.0);

  Rng rng(6);
  for (auto& lv : p.position_levels)
    for (auto& v : lv.features) v = rng.uniform(-1, 1);
  const Vec3d x(0.3, -0.2, 0.7);
  const auto v = sample_level(p.position_levels[0], x);
  const auto w = sample_level(p.position_levels[1], x);
  CHECK((aggregate_position(p, x) - (v + w) / 2).norm() <= 1e-15);

  cfg.levels = 8;
  auto c = LatentGridPyramid<double>::zeros(cfg);
  for (auto& lv : c.position_levels)
    for (std::size_t i = 0; i < lv.node_count(); ++i) {
      lv.node(i)[0] = 0.25;
      lv.node(i)[1] = -4.0;
    }
  const auto agg = aggregate_position(c, Vec3d(-0.33, 0.91, 0.05));
  CHECK(agg[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(agg[1] == doctest::Approx(-4.0).epsilon(1e-14));
}

TEST_CASE("default pyramid schedule") {
  const GridConfig cfg;
  const auto p = LatentGridPyramid<double>::zeros(cfg);
  REQUIRE(p.levels() == 8);
  const int res[8] = {2, 5, 8, 11, 14, 17, 20, 23};
  for (int l = 1; l <= 8; ++l) {
    CHECK(p.position_levels[static_cast<std::size_t>(l - 1)].resolution == res[l - 1]);
    CHECK(p.position_levels[static_cast<std::size_t>(l - 1)].channels == 30);
    CHECK(p.lambdas[static_cast<std::size_t>(l - 1)] == doctest::Approx(0.4 * std::pow(1.5, l)).epsilon(1e-15));
    CHECK(p.learning_rates[static_cast<std::size_t>(l - 1)] ==
          doctest::Approx(0.005 * std::pow(2.5, l)).epsilon(1e-15));
  }
  CHECK(p.normal_level.resolution == 4);
  CHECK(p.normal_level.channels == 2);
  CHECK(p.normal_lambda == doctest::Approx(0.6));
  CHECK(p.normal_learning_rate == doctest::Approx(0.0125));
  for (const auto& lv : p.position_levels) {
    CHECK(lv.features.size() == lv.node_count() * 30);
    CHECK(std::all_of(lv.features.begin(), lv.features.end(), [](double v) { return v == 0.0; }));
  }
}

TEST_CASE("normal grid sampling") {
  GridConfig cfg;
  cfg.levels = 1;
  auto p = LatentGridPyramid<double>::zeros(cfg);
  CHECK(sample_normal(p, Vec3d(0, 1, 0)).norm() == 0.0);

  Rng rng(8);
  for (auto& v : p.normal_level.features) v = rng.uniform(-1, 1);
  const auto st = trilinear_stencil<double>(4, Vec3d(1, 0, 0));
  double sum = 0.0;
  for (int k = 0; k < 8; ++k) {
    if (st.weights[static_cast<std::size_t>(k)] == 0.0) continue;
    sum += st.weights[static_cast<std::size_t>(k)];
    CHECK(st.nodes[static_cast<std::size_t>(k)] % 4 == 3);  // x index R-1
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));

  const Vec3d n = Vec3d(0.3, -0.5, 0.8).normalized();
  CHECK((sample_normal(p, n) - sample_normal<double>(p, -n)).norm() > 1e-3);
  CHECK_THROWS_AS(sample_normal(p, Vec3d(0.5, 0, 0)), Error);
}

TEST_CASE("lattice Laplacian") {
  const auto l2 = build_laplacian(2);
  const Eigen::MatrixXd d2(l2.matrix);
  for (int i = 0; i < 8; ++i) CHECK(d2(i, i) == 3.0);
  const auto l3 = build_laplacian(3);
  CHECK(l3.degree(1, 1, 1) == 6);
  const Eigen::MatrixXd d3(l3.matrix);
  CHECK(d3(13, 13) == 6.0);
  for (int R : {2, 3, 5}) {
    const Eigen::MatrixXd L(build_laplacian(R).matrix);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(L.rows());
    CHECK((L * ones).norm() == 0.0);
    CHECK((L - L.transpose()).norm() == 0.0);
    CHECK((L - (dense_operator(R, 1.0) - Eigen::MatrixXd::Identity(L.rows(), L.cols()))).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("shifted operator application") {
  Rng rng(12);
  const int R = 4, C = 3;
  const auto x = random_field(static_cast<std::size_t>(R * R * R * C), rng);
  const auto y = apply_shifted_laplacian(R, C, x, 0.7);
  const Eigen::MatrixXd A = dense_operator(R, 0.7);
  for (int c = 0; c < C; ++c) {
    Eigen::VectorXd xc(R * R * R);
    for (int i = 0; i < R * R * R; ++i) xc[i] = x[static_cast<std::size_t>(i * C + c)];
    const Eigen::VectorXd yc = A * xc;
    for (int i = 0; i < R * R * R; ++i) CHECK(std::abs(y[static_cast<std::size_t>(i * C + c)] - yc[i]) <= 1e-13);
  }
}

TEST_CASE("preconditioner examples") {
  Rng rng(13);
  for (auto backend : {PreconditionBackend::Spectral, PreconditionBackend::ConjugateGradient}) {
    PreconditionOptions opts;
    opts.backend = backend;
    auto g = random_field(5 * 5 * 5 * 2, rng);
    auto f = g;
    precondition<double>(5, 2, f, 0.0, opts);
    CHECK(f == g);

    std::vector<double> constant(5 * 5 * 5 * 2);
    for (std::size_t i = 0; i < constant.size(); ++i) constant[i] = i % 2 ? 0.75 : -2.5;
    auto fc = constant;
    precondition<double>(5, 2, fc, 3.0, opts);
    for (std::size_t i = 0; i < fc.size(); ++i) CHECK(std::abs(fc[i] - constant[i]) <= 1e-12);

    auto r = g;
    precondition<double>(5, 2, r, 1.0, opts);
    const auto once = apply_shifted_laplacian(5, 2, r, 1.0);
    const auto twice = apply_shifted_laplacian(5, 2, once, 1.0);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      num += (twice[i] - g[i]) * (twice[i] - g[i]);
      den += g[i] * g[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-6);
  }
  std::vector<double> bad(8, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(precondition<double>(2, 1, bad, 1.0), Error);
  std::vector<double> wrong(7, 0.0);
  CHECK_THROWS_AS(precondition<double>(2, 1, wrong, 1.0), Error);
  std::vector<double> ok(8, 1.0);
  CHECK_THROWS_AS(precondition<double>(2, 1, ok, -1.0), Error);
}

TEST_CASE("preconditioner matches a dense solve") {
  Rng rng(14);
  for (int R : {2, 5, 8}) {
    const double lambda = 0.4 * std::pow(1.5, (R + 1) / 3);
    const Eigen::MatrixXd A = dense_operator(R, lambda);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const int n = R * R * R, C = 3;
    const auto g = random_field(static_cast<std::size_t>(n * C), rng);
    for (auto backend : {PreconditionBackend::Spectral, PreconditionBackend::ConjugateGradient}) {
      PreconditionOptions opts;
      opts.backend = backend;
      auto f = g;
      const auto st = precondition<double>(R, C, f, lambda, opts);
      if (backend == PreconditionBackend::ConjugateGradient) CHECK(st.max_rel_residual <= 1e-8);
      for (int c = 0; c < C; ++c) {
        Eigen::VectorXd gc(n);
        for (int i = 0; i < n; ++i) gc[i] = g[static_cast<std::size_t>(i * C + c)];
        const Eigen::VectorXd expect = lu.solve(lu.solve(gc));
        for (int i = 0; i < n; ++i)
          CHECK(std::abs(f[static_cast<std::size_t>(i * C + c)] - expect[i]) <= 1e-7 * expect.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST_CASE("preconditioner is a low-pass filter") {
  Rng rng(15);
  for (int R : {2, 5, 11}) {
    const Eigen::MatrixXd L(build_laplacian(R).matrix);
    const int n = R * R * R;
    for (int k = 0; k < 100; ++k) {
      auto g = random_field(static_cast<std::size_t>(n), rng);
      auto p = g;
      precondition<double>(R, 1, p, 0.4 * 1.5 * (1 + k % 4));
      const Eigen::Map<Eigen::VectorXd> gv(g.data(), n), pv(p.data(), n);
      CHECK(rayleigh(L, pv) <= rayleigh(L, gv) + 1e-10);
    }
  }
}

TEST_CASE("preconditioner commutes with axis permutations") {
  Rng rng(16);
  const int R = 5, C = 2, n = R * R * R;
  const auto g = random_field(static_cast<std::size_t>(n * C), rng);
  auto f = g;
  precondition<double>(R, C, f, 1.3);
  const int perms[5][3] = {{1, 0, 2}, {2, 1, 0}, {0, 2, 1}, {1, 2, 0}, {2, 0, 1}};
  for (const auto& perm : perms) {
    // node (x0,x1,x2) moves to the node whose coordinate perm[a] is x_a
    std::vector<double> pg(g.size()), pf(g.size());
    for (int z = 0; z < R; ++z)
      for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
          const int src[3] = {x, y, z};
          int dst[3];
          for (int a = 0; a < 3; ++a) dst[perm[a]] = src[a];
          const int si = x + R * (y + R * z), di = dst[0] + R * (dst[1] + R * dst[2]);
          for (int c = 0; c < C; ++c) {
            pg[static_cast<std::size_t>(di * C + c)] = g[static_cast<std::size_t>(si * C + c)];
            pf[static_cast<std::size_t>(di * C + c)] = f[static_cast<std::size_t>(si * C + c)];
          }
        }
    precondition<double>(R, C, pg, 1.3);
    for (std::size_t i = 0; i < pg.size(); ++i) CHECK(std::abs(pg[i] - pf[i]) <= 1e-13);
  }
  // mirror along x
  std::vector<double> mg(g.size()), mf(g.size());
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x)
        for (int c = 0; c < C; ++c) {
          const int si = x + R * (y + R * z), di = (R - 1 - x) + R * (y + R * z);
          mg[static_cast<std::size_t>(di * C + c)] = g[static_cast<std::size_t>(si * C + c)];
          mf[static_cast<std::size_t>(di * C + c)] = f[static_cast<std::size_t>(si * C + c)];
        }
  precondition<double>(R, C, mg, 1.3);
  for (std::size_t i = 0; i < mg.size(); ++i) CHECK(std::abs(mg[i] - mf[i]) <= 1e-13);
}

TEST_CASE("gather and scatter kernels: serial and parallel agree") {
  GridConfig cfg;
  cfg.levels = 4;
  auto p = LatentGridPyramid<double>::zeros(cfg);
  Rng rng(17);
  for (auto& lv : p.position_levels)
    for (auto& v : lv.features) v = rng.uniform(-1, 1);
  for (auto& v : p.normal_level.features) v = rng.uniform(-1, 1);
  const auto pos = random_points(700, rng);
  std::vector<Vec3d> nrm;
  for (const auto& q : random_points(700, rng)) nrm.push_back(q.normalized());

  MatX<double> zp1, zn1, zp2, zn2;
  kernels::gather_latents<double>(p, pos, nrm, zp1, zn1, kernels::Exec::Serial);
  kernels::gather_latents<double>(p, pos, nrm, zp2, zn2, kernels::Exec::Parallel);
  CHECK(zp1 == zp2);
  CHECK(zn1 == zn2);
  for (int i : {0, 123, 699}) {
    CHECK((zp1.col(i) - aggregate_position(p, pos[static_cast<std::size_t>(i)])).norm() <= 1e-14);
    CHECK((zn1.col(i) - sample_normal(p, nrm[static_cast<std::size_t>(i)])).norm() == 0.0);
  }

  const MatX<double> dzp = MatX<double>::Random(30, 700), dzn = MatX<double>::Random(2, 700);
  std::vector<std::vector<double>> g1, g2;
  for (const auto& lv : p.position_levels) {
    g1.emplace_back(lv.features.size(), 0.0);
    g2.emplace_back(lv.features.size(), 0.0);
  }
  std::vector<double> n1(p.normal_level.features.size()), n2(n1.size());
  kernels::scatter_latents<double>(p, pos, nrm, dzp, dzn, g1, n1, kernels::Exec::Serial);
  kernels::scatter_latents<double>(p, pos, nrm, dzp, dzn, g2, n2, kernels::Exec::Parallel);
  CHECK(g1 == g2);
  CHECK(n1 == n2);

  // adjoint identity: <dz, gather(f)> == <scatter(dz), f>
  double lhs = (dzp.cwiseProduct(zp1)).sum() + (dzn.cwiseProduct(zn1)).sum();
  double rhs = 0.0;
  for (std::size_t l = 0; l < g1.size(); ++l)
    rhs += std::inner_product(g1[l].begin(), g1[l].end(), p.position_levels[l].features.begin(), 0.0);
  rhs += std::inner_product(n1.begin(), n1.end(), p.normal_level.features.begin(), 0.0);
  CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(lhs));
}
