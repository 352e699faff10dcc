#include <doctest.h>

#include "support.hpp"

#include <cmath>
#include <limits>
#include <numbers>

using namespace neupig;
using namespace testing_support;

namespace {

double nearest_sq(const std::vector<Vec3d>& set, const Vec3d& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : set) best = std::min(best, (p - q).squaredNorm());
  return best;
}

double cd_oracle(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b) {
  double sa = 0, sb = 0;
  for (const auto& p : a) sa += nearest_sq(b, p);
  for (const auto& p : b) sb += nearest_sq(a, p);
  return sa / a.size() + sb / b.size();
}

double fscore_oracle(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b, double tau) {
  double hp = 0, hr = 0;
  for (const auto& p : a) hp += nearest_sq(b, p) <= tau * tau;
  for (const auto& p : b) hr += nearest_sq(a, p) <= tau * tau;
  const double P = hp / a.size(), R = hr / b.size();
  return P + R > 0 ? 2 * P * R / (P + R) : 0.0;
}

// n x n grid in the z = 0 plane.
TriMesh plane(int n) {
  TriMesh m;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m.vertices.emplace_back(i / (n - 1.0), j / (n - 1.0), 0.0);
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i, b = a + 1, c = a + n, d = c + 1;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  finalize_mesh(m);
  return m;
}

TriMesh transformed(const TriMesh& src, const Mat3d& R, const Vec3d& t) {
  TriMesh m;
  m.faces = src.faces;
  for (const auto& v : src.vertices) m.vertices.push_back(R * v + t);
  finalize_mesh(m);
  return m;
}

Mat3d some_rotation() { return Eigen::AngleAxisd(0.7, Vec3d(1, -2, 0.5).normalized()).toRotationMatrix(); }

}  // namespace

TEST_CASE("chamfer metric examples") {
  const std::vector<Vec3d> a = {Vec3d(0, 0, 0)}, b = {Vec3d(0.01, 0, 0)};
  CHECK(metric_cd(a, b) == doctest::Approx(2e-4).epsilon(1e-12));
  CHECK(metric_cd(a, a) == 0.0);
  Rng rng(1);
  const auto p = random_points(300, rng), q = random_points(300, rng);
  CHECK(metric_cd(p, q) == metric_cd(q, p));
  CHECK_THROWS_AS(metric_cd({}, q), Error);
  CHECK_THROWS_AS(metric_cd(p, {}), Error);
}

TEST_CASE("f-score examples") {
  const std::vector<Vec3d> gt = {Vec3d(0, 0, 0), Vec3d(1, 0, 0)};
  CHECK(metric_fscore(gt, gt, 0.01) == 1.0);
  const std::vector<Vec3d> far = {Vec3d(0, 5, 0), Vec3d(1, 5, 0)};
  CHECK(metric_fscore(far, gt, 0.1) == 0.0);
  // Half the prediction near gt, every gt point covered.
  const std::vector<Vec3d> half = {Vec3d(0, 0.001, 0), Vec3d(1, 0.001, 0), Vec3d(0, 3, 0),
                                   Vec3d(1, 3, 0)};
  CHECK(metric_fscore(half, gt, 0.01) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // The threshold is inclusive.
  const std::vector<Vec3d> edge = {Vec3d(0.5, 0, 0)};
  const std::vector<Vec3d> one = {Vec3d(0, 0, 0)};
  CHECK(metric_fscore(edge, one, 0.5) == 1.0);
  CHECK(fscore_threshold(gt) == doctest::Approx(0.005));
  CHECK_THROWS_AS(metric_fscore({}, gt, 0.1), Error);
}

TEST_CASE("indexed metrics equal an exhaustive scan") {
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    Rng rng(seed);
    const auto a = random_points(500, rng), b = random_points(500, rng, -0.9, 1.1);
    CHECK(metric_cd(a, b) == cd_oracle(a, b));
    for (double tau : {0.02, 0.05, 0.1}) CHECK(metric_fscore(a, b, tau) == fscore_oracle(a, b, tau));
  }
  Rng rng(5);
  const auto a = random_points(2000, rng), b = random_points(1700, rng);
  CHECK(metric_cd(a, b) == cd_oracle(a, b));
  CHECK(metric_fscore(a, b, 0.03) == fscore_oracle(a, b, 0.03));
}

TEST_CASE("normal consistency examples") {
  const TriMesh p = plane(6);
  CHECK(metric_nc(p, p) == doctest::Approx(1.0).epsilon(1e-14));
  TriMesh flipped = p;
  for (auto& f : flipped.faces) std::swap(f[1], f[2]);
  finalize_mesh(flipped);
  CHECK(flipped.vertex_normals[0].z() == doctest::Approx(-p.vertex_normals[0].z()));
  CHECK(metric_nc(flipped, p) == doctest::Approx(1.0).epsilon(1e-14));
  const TriMesh turned = transformed(p, Eigen::AngleAxisd(std::numbers::pi / 2, Vec3d::UnitX()).toRotationMatrix(),
                                     Vec3d::Zero());
  CHECK(std::abs(metric_nc(turned, p)) < 1e-14);
  TriMesh bare = p;
  bare.vertex_normals.clear();
  CHECK_THROWS_AS(metric_nc(bare, p), Error);
}

TEST_CASE("correspondence examples") {
  auto seq = gen_sequence({MotionKind::Bend, 5, 50, 1, 0});
  const auto& gt = seq.trajectories;
  CHECK(metric_corr(gt, gt, 2) == 0.0);
  const Vec3d off(0.03, -0.04, 0.0);
  auto shifted = gt;
  for (auto& f : shifted)
    for (auto& v : f) v += off;
  // The offset is smaller than half the vertex spacing, so the match stays put.
  CHECK(metric_corr(shifted, gt, 0) == doctest::Approx(off.norm()).epsilon(1e-12));
  auto short_pred = gt;
  short_pred.pop_back();
  try {
    metric_corr(short_pred, gt, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("4 vs 5") != std::string::npos);
  }
}

TEST_CASE("correspondence matches an exhaustive recomputation") {
  auto seq = gen_sequence({MotionKind::Rigid, 6, 50, 1, 3});
  Rng rng(7);
  auto pred = seq.trajectories;
  for (auto& f : pred)
    for (auto& v : f) v += Vec3d(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  const int key = 2;
  const auto& gk = seq.trajectories[key];
  std::vector<std::size_t> match(pred[key].size());
  for (std::size_t i = 0; i < match.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gk.size(); ++j) {
      const double d = (pred[key][i] - gk[j]).squaredNorm();
      if (d < best) {
        best = d;
        match[i] = j;
      }
    }
  }
  double total = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    double s = 0;
    for (std::size_t i = 0; i < match.size(); ++i) s += (pred[t][i] - seq.trajectories[t][match[i]]).norm();
    total += s / match.size();
  }
  CHECK(metric_corr(pred, seq.trajectories, key) == doctest::Approx(total / pred.size()).epsilon(1e-13));
}

TEST_CASE("metrics are invariant under a shared rigid motion") {
  auto seq = gen_sequence({MotionKind::Twist, 4, 100, 2, 9});
  Rng rng(8);
  std::vector<TriMesh> pred;
  for (const auto& m : seq.gt_meshes) {
    TriMesh p;
    p.faces = m.faces;
    for (const auto& v : m.vertices) p.vertices.push_back(v + Vec3d(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0));
    finalize_mesh(p);
    pred.push_back(std::move(p));
  }
  // The F-score threshold follows the axis-aligned box, so the full report is
  // only invariant under rotations that permute axes; a general rotation is
  // checked below with the threshold held fixed.
  Mat3d R;
  R << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  const Vec3d t(0.3, -1.2, 2.0);
  std::vector<TriMesh> pred2, gt2;
  for (const auto& m : pred) pred2.push_back(transformed(m, R, t));
  for (const auto& m : seq.gt_meshes) gt2.push_back(transformed(m, R, t));
  const auto a = evaluate_sequence(pred, seq.gt_meshes, 1, true);
  const auto b = evaluate_sequence(pred2, gt2, 1, true);
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    CHECK(std::abs(a.frames[f].cd - b.frames[f].cd) < 1e-9);
    CHECK(std::abs(a.frames[f].nc - b.frames[f].nc) < 1e-9);
    CHECK(std::abs(a.frames[f].fscore - b.frames[f].fscore) < 1e-9);
    CHECK(std::abs(a.frames[f].corr - b.frames[f].corr) < 1e-9);
    CHECK(std::abs(a.frames[f].fscore_tau - b.frames[f].fscore_tau) < 1e-9);
  }
  const Mat3d G = some_rotation();
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const TriMesh p3 = transformed(pred[f], G, t), g3 = transformed(seq.gt_meshes[f], G, t);
    CHECK(std::abs(metric_cd(p3.vertices, g3.vertices) - a.frames[f].cd) < 1e-9);
    CHECK(std::abs(metric_nc(p3, g3) - a.frames[f].nc) < 1e-9);
    const double tau = a.frames[f].fscore_tau;
    CHECK(metric_fscore(p3.vertices, g3.vertices, tau) == a.frames[f].fscore);
  }
}

TEST_CASE("evaluating a sequence against itself") {
  auto seq = gen_sequence({MotionKind::Bend, 3, 100, 2, 1});
  const auto r = evaluate_sequence(seq.gt_meshes, seq.gt_meshes, 0, true);
  REQUIRE(r.frames.size() == 3);
  CHECK(r.mean.cd == 0.0);
  CHECK(r.mean.nc == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.mean.fscore == 1.0);
  CHECK(r.mean.corr == 0.0);
  for (const auto& f : r.frames) {
    CHECK(f.fscore_tau == doctest::Approx(kFscoreRatio * bounding_box(seq.gt_meshes[0].vertices).diagonal()).epsilon(0.2));
    CHECK(f.nc <= 1.0 + 1e-12);
  }
  std::vector<TriMesh> fewer(seq.gt_meshes.begin(), seq.gt_meshes.end() - 1);
  try {
    evaluate_sequence(fewer, seq.gt_meshes, 0, false);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("icosphere and base shape") {
  CHECK(icosphere(0).vertices.size() == 12);
  CHECK(icosphere(3).vertices.size() == 642);
  CHECK(icosphere(3).faces.size() == 1280);
  for (const auto& v : icosphere(2).vertices) CHECK(v.norm() == doctest::Approx(1.0));
  const TriMesh b = base_shape(2);
  CHECK(b.vertices.size() == 162);
  CHECK_NOTHROW(validate_mesh(b));
  CHECK_THROWS(icosphere(-1));
}

TEST_CASE("rigid frames follow the closed-form motion") {
  const auto seq = gen_sequence({MotionKind::Rigid, 2, 100, 2, 0});
  const auto& xf = seq.normalization;
  const Mat3d R = rigid_rotation(1.0);
  const Vec3d t = rigid_translation(1.0);
  double worst = 0;
  for (std::size_t i = 0; i < seq.gt_meshes[0].vertices.size(); ++i) {
    const Vec3d base = xf.invert(seq.gt_meshes[0].vertices[i]);
    const Vec3d expect = xf.apply(R * base + t);
    worst = std::max(worst, (expect - seq.gt_meshes[1].vertices[i]).norm());
  }
  CHECK(worst < 1e-12);
  CHECK(rigid_rotation(0.0).isIdentity(0.0));
  CHECK(rigid_translation(1.0).norm() == doctest::Approx(kRigidMaxTranslation));
  const Eigen::AngleAxisd aa(rigid_rotation(1.0));
  CHECK(aa.angle() == doctest::Approx(kRigidMaxAngleDeg * std::numbers::pi / 180.0));
}

TEST_CASE("rigid sequences are isometric") {
  const auto seq = gen_sequence({MotionKind::Rigid, 17, 200, 2, 4});
  const auto& edges = seq.gt_meshes[0].edges;
  const auto key = edge_lengths(std::span<const Vec3d>(seq.trajectories[8]), edges);
  double worst = 0;
  for (const auto& f : seq.trajectories) {
    const auto l = edge_lengths(std::span<const Vec3d>(f), edges);
    for (std::size_t e = 0; e < l.size(); ++e) worst = std::max(worst, std::abs(l[e] - key[e]));
  }
  CHECK(worst < 1e-12);
  const auto iso = isometry_loss(seq.trajectories, edges, std::span<const double>(key), false);
  CHECK(iso.value < 1e-12);
}

TEST_CASE("bend starts at the base shape") {
  const auto seq = gen_sequence({MotionKind::Bend, 5, 100, 2, 0});
  const auto& xf = seq.normalization;
  const TriMesh base = base_shape(2);
  for (std::size_t i = 0; i < base.vertices.size(); ++i)
    CHECK((xf.invert(seq.trajectories[0][i]) - base.vertices[i]).norm() < 1e-12);
  // The lower half never moves.
  for (std::size_t i = 0; i < base.vertices.size(); ++i)
    if (base.vertices[i].y() <= 0)
      CHECK((xf.invert(seq.trajectories[4][i]) - base.vertices[i]).norm() < 1e-12);
  double moved = 0;
  for (std::size_t i = 0; i < base.vertices.size(); ++i)
    moved = std::max(moved, (seq.trajectories[4][i] - seq.trajectories[0][i]).norm());
  CHECK(moved > 0.1);
}

TEST_CASE("twist rotates about the axis by height") {
  const TriMesh base = base_shape(1);
  const double lo = -1.0, hi = 1.0;
  const Vec3d top(0.3, 1.0, 0.0), bottom(0.3, -1.0, 0.0);
  CHECK((deform_point(MotionKind::Twist, bottom, 1.0, lo, hi) - bottom).norm() < 1e-15);
  const Vec3d turned = deform_point(MotionKind::Twist, top, 1.0, lo, hi);
  CHECK(turned.y() == 1.0);
  CHECK(std::hypot(turned.x(), turned.z()) == doctest::Approx(0.3));
  CHECK(std::atan2(-turned.z(), turned.x()) == doctest::Approx(kTwistMaxAngleDeg * std::numbers::pi / 180.0));
  (void)base;
}

TEST_CASE("generated sequences are normalized and consistent") {
  for (auto kind : {MotionKind::Rigid, MotionKind::Bend, MotionKind::Twist}) {
    const auto seq = gen_sequence({kind, 6, 300, 2, 11});
    CAPTURE(to_string(kind));
    REQUIRE(seq.clouds.size() == 6);
    REQUIRE(seq.gt_meshes.size() == 6);
    Aabb box;
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(seq.clouds[t].points.size() == 300);
      CHECK(seq.clouds[t].normals.size() == 300);
      CHECK(seq.gt_meshes[t].faces == seq.gt_meshes[0].faces);
      CHECK(seq.gt_meshes[t].vertices == seq.trajectories[t]);
      for (const auto& v : seq.trajectories[t]) box.extend(v);
      for (const auto& p : seq.clouds[t].points) CHECK(p.cwiseAbs().maxCoeff() <= 1.0);
      // Samples lie on the surface.
      CHECK(std::sqrt(nearest_sq(seq.trajectories[t], seq.clouds[t].points[0])) < 0.4);
    }
    CHECK(box.lo.minCoeff() >= -1.0 - 1e-12);
    CHECK(box.hi.maxCoeff() <= 1.0 + 1e-12);
    CHECK(std::max(-box.lo.minCoeff(), box.hi.maxCoeff()) == doctest::Approx(1.0));
  }
  CHECK(parse_motion("twist") == MotionKind::Twist);
  CHECK_THROWS_AS(parse_motion("wave"), Error);
  CHECK_THROWS(gen_sequence({MotionKind::Rigid, 1, 10, 1, 0}));
}

TEST_CASE("generation is seed-deterministic") {
  const auto a = gen_sequence({MotionKind::Bend, 4, 500, 2, 21});
  const auto b = gen_sequence({MotionKind::Bend, 4, 500, 2, 21});
  const auto c = gen_sequence({MotionKind::Bend, 4, 500, 2, 22});
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(a.clouds[t].points == b.clouds[t].points);
    CHECK(a.clouds[t].normals == b.clouds[t].normals);
    CHECK(a.trajectories[t] == b.trajectories[t]);
  }
  CHECK(a.clouds[0].points != c.clouds[0].points);
  CHECK(a.trajectories == c.trajectories);  // the seed only drives sampling
}

TEST_CASE("surface samples are area weighted") {
  // Two triangles, the second with six times the area.
  TriMesh m;
  m.vertices = {Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0), Vec3d(3, 0, 1), Vec3d(6, 0, 1),
                Vec3d(3, 2, 1)};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  finalize_mesh(m);
  Rng rng(3);
  const auto c = sample_surface(m, 20000, rng);
  int second = 0;
  for (const auto& p : c.points) second += p.z() > 0.5;
  CHECK(second / 20000.0 == doctest::Approx(6.0 / 7.0).epsilon(0.02));
  for (const auto& n : c.normals) CHECK(std::abs(n.z()) == doctest::Approx(1.0));
}
