#include "neupig/evalsynth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace neupig {

std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::Rigid: return "rigid";
    case MotionKind::Bend: return "bend";
    case MotionKind::Twist: return "twist";
  }
  return "?";
}

MotionKind parse_motion(const std::string& s) {
  if (s == "rigid") return MotionKind::Rigid;
  if (s == "bend") return MotionKind::Bend;
  if (s == "twist") return MotionKind::Twist;
  fail(ErrorKind::Parse, "unknown motion kind '" + s + "' (expected rigid, bend or twist)");
}

TriMesh icosphere(int subdivision) {
  require(subdivision >= 0 && subdivision <= 7, "icosphere: subdivision must be in [0,7]");
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivision; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  finalize_mesh(m);
  return m;
}

TriMesh base_shape(int subdivision) {
  TriMesh m = icosphere(subdivision);
  const Vec3d bump_center = Vec3d(0.6, 0.5, 0.6).normalized();
  for (auto& v : m.vertices) {
    const double bump = 1.0 + 0.2 * std::exp(-(v - bump_center).squaredNorm() / 0.15);
    v = Vec3d(0.7 * v.x(), 1.0 * v.y(), 0.55 * v.z()) * bump;
  }
  finalize_mesh(m);
  return m;
}

namespace {

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

Mat3d axis_rotation(const Vec3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace

Mat3d rigid_rotation(double s) {
  return axis_rotation(Vec3d(0.4, 1.0, 0.3), deg(kRigidMaxAngleDeg) * s);
}

Vec3d rigid_translation(double s) {
  return Vec3d(1.0, 0.5, -0.5).normalized() * (kRigidMaxTranslation * s);
}

Vec3d deform_point(MotionKind kind, const Vec3d& p, double s, double lo, double hi) {
  switch (kind) {
    case MotionKind::Rigid: return rigid_rotation(s) * p + rigid_translation(s);
    case MotionKind::Bend: {
      if (p.y() <= 0.0) return p;
      const double phi = deg(kBendMaxAngleDeg) * s * smoothstep(p.y() / hi);
      const double c = std::cos(phi), sn = std::sin(phi);
      return {c * p.x() - sn * p.y(), sn * p.x() + c * p.y(), p.z()};
    }
    case MotionKind::Twist: {
      const double phi = deg(kTwistMaxAngleDeg) * s * (p.y() - lo) / (hi - lo);
      const double c = std::cos(phi), sn = std::sin(phi);
      return {c * p.x() + sn * p.z(), p.y(), -sn * p.x() + c * p.z()};
    }
  }
  return p;
}

PointCloud sample_surface(const TriMesh& mesh, int count, Rng& rng) {
  require(count >= 1, "sample_surface: count must be >= 1");
  require(!mesh.faces.empty(), "sample_surface: mesh has no faces");
  std::vector<double> cum;
  std::vector<Vec3d> face_n;
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3d c = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                        .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    const double area = 0.5 * c.norm();
    total += area;
    cum.push_back(total);
    face_n.push_back(area > 0 ? Vec3d(c.normalized()) : Vec3d::UnitZ());
  }
  require(total > 0.0, "sample_surface: mesh has zero area");
  PointCloud out;
  out.points.reserve(count);
  out.normals.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double u = rng.uniform() * total;
    std::size_t fi = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    fi = std::min(fi, cum.size() - 1);
    const auto& f = mesh.faces[fi];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    out.points.push_back((1.0 - r1) * mesh.vertices[f[0]] + r1 * (1.0 - r2) * mesh.vertices[f[1]] +
                         r1 * r2 * mesh.vertices[f[2]]);
    out.normals.push_back(face_n[fi]);
  }
  return out;
}

SyntheticSequence gen_sequence(const SynthConfig& cfg) {
  require(cfg.frames >= 2, "gen_sequence: need at least 2 frames");
  require(cfg.points >= 1, "gen_sequence: points per frame must be >= 1");
  const TriMesh base = base_shape(cfg.subdivision);
  double lo = base.vertices.front().y(), hi = lo;
  for (const auto& v : base.vertices) {
    lo = std::min(lo, v.y());
    hi = std::max(hi, v.y());
  }

  SyntheticSequence seq;
  seq.kind = cfg.kind;
  seq.seed = cfg.seed;
  std::vector<std::vector<Vec3d>> raw(cfg.frames);
  Aabb box;
  for (int t = 0; t < cfg.frames; ++t) {
    const double s = static_cast<double>(t) / (cfg.frames - 1);
    for (const auto& v : base.vertices) {
      raw[t].push_back(deform_point(cfg.kind, v, s, lo, hi));
      box.extend(raw[t].back());
    }
  }
  NormalizationTransform xf;
  xf.center = 0.5 * (box.lo + box.hi);
  xf.scale = 1.0 / (0.5 * (box.hi - box.lo)).maxCoeff();
  seq.normalization = xf;

  Rng rng(mix_seed(cfg.seed ^ stream::kSynthCloud));
  for (int t = 0; t < cfg.frames; ++t) {
    TriMesh m;
    m.faces = base.faces;
    for (const auto& v : raw[t]) m.vertices.push_back(xf.apply(v));
    finalize_mesh(m);
    seq.trajectories.push_back(m.vertices);
    PointCloud c = sample_surface(m, cfg.points, rng);
    for (auto& p : c.points) p = p.cwiseMax(-1.0).cwiseMin(1.0);
    seq.clouds.push_back(std::move(c));
    seq.gt_meshes.push_back(std::move(m));
  }
  return seq;
}

}  // namespace neupig
