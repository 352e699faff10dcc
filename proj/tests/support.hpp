#pragma once

// Small fixtures shared by the test binaries.

#include "neupig/evalsynth.hpp"
#include "neupig/trainer.hpp"

#include <cmath>
#include <vector>

namespace testing_support {

using namespace neupig;

inline std::vector<Vec3d> random_points(std::size_t n, Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::vector<Vec3d> out(n);
  for (auto& p : out) p = Vec3d(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
  return out;
}

// Two rows of `cols` vertices joined by a triangle strip, gently curved and
// jittered so every vertex has a well-defined normal.
inline TriMesh strip_mesh(int cols, Rng& rng) {
  TriMesh m;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < cols; ++c) {
      const double x = -0.7 + 1.4 * c / (cols - 1);
      const double y = -0.3 + 0.6 * r;
      m.vertices.emplace_back(x + rng.uniform(-0.05, 0.05), y + rng.uniform(-0.05, 0.05),
                              0.2 * x * x + rng.uniform(-0.05, 0.05));
    }
  for (int c = 0; c + 1 < cols; ++c) {
    const int a = c, b = c + 1, d = cols + c, e = cols + c + 1;
    m.faces.push_back({a, b, e});
    m.faces.push_back({a, e, d});
  }
  finalize_mesh(m);
  return m;
}

// Observations scattered around a mesh, one cloud per frame.
inline PointCloudSequence clouds_near(const TriMesh& m, int frames, int points, Rng& rng,
                                      double spread = 0.15) {
  PointCloudSequence out;
  for (int t = 0; t < frames; ++t) {
    PointCloud c;
    for (int k = 0; k < points; ++k) {
      const Vec3d& v = m.vertices[static_cast<std::size_t>(rng.uniform() * m.vertices.size())];
      c.points.push_back(v + Vec3d(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                                   rng.uniform(-spread, spread)) +
                         Vec3d(0.05 * t, 0.0, 0.0));
    }
    out.push_back(std::move(c));
  }
  return out;
}

// Small training configuration used by the gradient and loop checks.
inline TrainConfig toy_config(int hidden = 16, int levels = 2) {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.grid.levels = levels;
  cfg.mlp.hidden = {hidden, hidden, hidden};
  cfg.chunk_columns = 7;
  return cfg;
}

// Fills every trainable parameter with small random values, so gradients
// reach every group (the decoder head starts at zero otherwise).
template <typename T>
void randomize(TrainState<T>& s, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto sp : parameter_spans(s))
    for (auto& v : sp) v = static_cast<T>(rng.uniform(-scale, scale));
}

inline double rel_err(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

}  // namespace testing_support
