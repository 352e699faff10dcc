// Timings of the hot kernels, serial against OpenMP and against the plain
// reference forms they replace.
#include <benchmark/benchmark.h>

#include "neupig/common.hpp"
#include "neupig/deform_model.hpp"
#include "neupig/kernels.hpp"
#include "neupig/preconditioner.hpp"

#include <vector>

using namespace neupig;

namespace {

std::vector<Vec3d> cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3d> out(n);
  for (auto& p : out) p = Vec3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return out;
}

kernels::Exec exec_of(const benchmark::State& st) {
  return st.range(1) ? kernels::Exec::Parallel : kernels::Exec::Serial;
}

void BM_NearestKdTree(benchmark::State& st) {
  const auto targets = cloud(static_cast<std::size_t>(st.range(0)), 1);
  const auto queries = cloud(static_cast<std::size_t>(st.range(0)), 2);
  const KdTree<double> tree{std::span<const Vec3d>(targets)};
  std::vector<int> idx(queries.size());
  std::vector<double> d2(queries.size());
  for (auto _ : st) {
    kernels::nearest_batch(tree, std::span<const Vec3d>(queries), std::span<int>(idx),
                           std::span<double>(d2), exec_of(st));
    benchmark::DoNotOptimize(d2.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_NearestKdTree)->Args({2000, 0})->Args({2000, 1})->Args({20000, 0})->Args({20000, 1});

void BM_NearestBrute(benchmark::State& st) {
  const auto targets = cloud(static_cast<std::size_t>(st.range(0)), 1);
  const auto queries = cloud(static_cast<std::size_t>(st.range(0)), 2);
  std::vector<int> idx(queries.size());
  std::vector<double> d2(queries.size());
  for (auto _ : st) {
    kernels::nearest_batch_brute(std::span<const Vec3d>(targets), std::span<const Vec3d>(queries),
                                 std::span<int>(idx), std::span<double>(d2), exec_of(st));
    benchmark::DoNotOptimize(d2.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_NearestBrute)->Args({2000, 0})->Args({2000, 1});

struct GridFixture {
  LatentGridPyramid<double> pyr;
  std::vector<Vec3d> pos, nrm;
  explicit GridFixture(std::size_t n) : pyr(LatentGridPyramid<double>::zeros(GridConfig{})) {
    Rng rng(3);
    for (auto& lv : pyr.position_levels)
      for (auto& v : lv.features) v = rng.uniform(-1, 1);
    for (auto& v : pyr.normal_level.features) v = rng.uniform(-1, 1);
    pos = cloud(n, 4);
    nrm = cloud(n, 5);
    for (auto& v : nrm) v.normalize();
  }
};

void BM_GatherLatents(benchmark::State& st) {
  GridFixture g(static_cast<std::size_t>(st.range(0)));
  MatX<double> zp, zn;
  for (auto _ : st) {
    kernels::gather_latents(g.pyr, std::span<const Vec3d>(g.pos), std::span<const Vec3d>(g.nrm),
                            zp, zn, exec_of(st));
    benchmark::DoNotOptimize(zp.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_GatherLatents)->Args({6890, 0})->Args({6890, 1});

void BM_ScatterLatents(benchmark::State& st) {
  GridFixture g(static_cast<std::size_t>(st.range(0)));
  MatX<double> zp, zn;
  kernels::gather_latents(g.pyr, std::span<const Vec3d>(g.pos), std::span<const Vec3d>(g.nrm), zp,
                          zn, kernels::Exec::Serial);
  std::vector<std::vector<double>> pg;
  for (const auto& lv : g.pyr.position_levels) pg.emplace_back(lv.features.size(), 0.0);
  std::vector<double> ng(g.pyr.normal_level.features.size(), 0.0);
  for (auto _ : st) {
    kernels::scatter_latents(g.pyr, std::span<const Vec3d>(g.pos), std::span<const Vec3d>(g.nrm),
                             zp, zn, pg, ng, exec_of(st));
    benchmark::DoNotOptimize(ng.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ScatterLatents)->Args({6890, 0})->Args({6890, 1});

// range(0) = grid resolution, range(1) = 0 spectral / 1 CG.
void BM_Precondition(benchmark::State& st) {
  const int R = static_cast<int>(st.range(0)), C = 30;
  Rng rng(6);
  std::vector<double> base(static_cast<std::size_t>(R) * R * R * C);
  for (auto& v : base) v = rng.uniform(-1, 1);
  PreconditionOptions opts;
  opts.backend = st.range(1) ? PreconditionBackend::ConjugateGradient : PreconditionBackend::Spectral;
  for (auto _ : st) {
    std::vector<double> g = base;
    precondition(R, C, std::span<double>(g), 0.4 * 17.0, opts);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_Precondition)->Args({11, 0})->Args({11, 1})->Args({23, 0})->Args({23, 1})
    ->Unit(benchmark::kMillisecond);

// Decoder over n samples: one column at a time (reference) or one batch.
void BM_MlpPerSample(benchmark::State& st) {
  const Mlp<float> mlp(MlpConfig{}, 7);
  Rng rng(8);
  MatX<float> in(40, st.range(0));
  for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  for (auto _ : st)
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
      auto out = mlp.forward(VecX<float>(in.col(c)));
      benchmark::DoNotOptimize(out.data());
    }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_MlpPerSample)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_MlpBatched(benchmark::State& st) {
  const Mlp<float> mlp(MlpConfig{}, 7);
  Rng rng(8);
  MatX<float> in(40, st.range(0));
  for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  Mlp<float>::Cache cache;
  for (auto _ : st) {
    auto out = mlp.forward_batch(in, cache);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_MlpBatched)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
