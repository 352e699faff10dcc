#include "neupig/evalsynth.hpp"
#include "neupig/kdtree.hpp"

#include <chrono>
#include <cmath>

namespace neupig {

namespace {

// Mean of nearest squared distances from each query to `tree`.
double mean_nearest(const KdTree<double>& tree, std::span<const Vec3d> queries) {
  double sum = 0.0;
  for (const auto& q : queries) sum += tree.nearest(q).sq_dist;
  return sum / static_cast<double>(queries.size());
}

double fraction_within(const KdTree<double>& tree, std::span<const Vec3d> queries,
                       double tau2) {
  std::size_t hit = 0;
  for (const auto& q : queries) hit += tree.nearest(q).sq_dist <= tau2;
  return static_cast<double>(hit) / static_cast<double>(queries.size());
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void require_nonempty(std::span<const Vec3d> a, std::span<const Vec3d> b, const char* what) {
  if (a.empty() || b.empty()) fail(ErrorKind::InvalidArgument, std::string(what) + ": empty set");
}

}  // namespace

double metric_cd(std::span<const Vec3d> pred, std::span<const Vec3d> gt) {
  require_nonempty(pred, gt, "metric_cd");
  const KdTree<double> tp(pred), tg(gt);
  return mean_nearest(tg, pred) + mean_nearest(tp, gt);
}

double metric_cd_brute(std::span<const Vec3d> pred, std::span<const Vec3d> gt) {
  require_nonempty(pred, gt, "metric_cd");
  double a = 0.0, b = 0.0;
  for (const auto& p : pred) a += nearest_brute_force(gt, p).sq_dist;
  for (const auto& g : gt) b += nearest_brute_force(pred, g).sq_dist;
  return a / static_cast<double>(pred.size()) + b / static_cast<double>(gt.size());
}

double metric_fscore(std::span<const Vec3d> pred, std::span<const Vec3d> gt, double tau) {
  require_nonempty(pred, gt, "metric_fscore");
  const KdTree<double> tp(pred), tg(gt);
  return harmonic(fraction_within(tg, pred, tau * tau), fraction_within(tp, gt, tau * tau));
}

double metric_fscore_brute(std::span<const Vec3d> pred, std::span<const Vec3d> gt, double tau) {
  require_nonempty(pred, gt, "metric_fscore");
  const double tau2 = tau * tau;
  std::size_t hp = 0, hg = 0;
  for (const auto& p : pred) hp += nearest_brute_force(gt, p).sq_dist <= tau2;
  for (const auto& g : gt) hg += nearest_brute_force(pred, g).sq_dist <= tau2;
  return harmonic(static_cast<double>(hp) / pred.size(), static_cast<double>(hg) / gt.size());
}

double fscore_threshold(std::span<const Vec3d> gt) {
  Aabb box;
  for (const auto& p : gt) box.extend(p);
  return kFscoreRatio * box.diagonal();
}

double metric_nc(const TriMesh& pred, const TriMesh& gt) {
  if (pred.vertex_normals.size() != pred.vertices.size() ||
      gt.vertex_normals.size() != gt.vertices.size())
    fail(ErrorKind::InvalidArgument, "metric_nc: missing normals");
  require_nonempty(pred.vertices, gt.vertices, "metric_nc");
  auto one_way = [](const TriMesh& a, const TriMesh& b) {
    const KdTree<double> tree(b.vertices);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i) {
      const int j = tree.nearest(a.vertices[i]).index;
      sum += std::abs(a.vertex_normals[i].dot(b.vertex_normals[j]));
    }
    return sum / static_cast<double>(a.vertices.size());
  };
  return 0.5 * (one_way(pred, gt) + one_way(gt, pred));
}

std::vector<double> metric_corr_frames(const std::vector<std::vector<Vec3d>>& pred,
                                       const std::vector<std::vector<Vec3d>>& gt, int key) {
  if (pred.size() != gt.size())
    fail(ErrorKind::InvalidArgument, "metric_corr: frame counts differ (" +
                                         std::to_string(pred.size()) + " vs " +
                                         std::to_string(gt.size()) + ")");
  require(!pred.empty(), "metric_corr: no frames");
  require(key >= 0 && key < static_cast<int>(pred.size()), "metric_corr: keyframe out of range");
  require_nonempty(pred[key], gt[key], "metric_corr");
  const KdTree<double> tree(gt[key]);
  std::vector<int> match(pred[key].size());
  for (std::size_t i = 0; i < match.size(); ++i) match[i] = tree.nearest(pred[key][i]).index;
  std::vector<double> out;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    require(pred[t].size() == pred[key].size() && gt[t].size() == gt[key].size(),
            "metric_corr: vertex count changes over time");
    double sum = 0.0;
    for (std::size_t i = 0; i < match.size(); ++i) sum += (pred[t][i] - gt[t][match[i]]).norm();
    out.push_back(sum / static_cast<double>(match.size()));
  }
  return out;
}

double metric_corr(const std::vector<std::vector<Vec3d>>& pred,
                   const std::vector<std::vector<Vec3d>>& gt, int key) {
  const auto f = metric_corr_frames(pred, gt, key);
  double sum = 0.0;
  for (double v : f) sum += v;
  return sum / static_cast<double>(f.size());
}

MetricReport evaluate_sequence(const std::vector<TriMesh>& pred, const std::vector<TriMesh>& gt,
                               int key, bool with_corr) {
  const auto start = std::chrono::steady_clock::now();
  if (pred.size() != gt.size())
    fail(ErrorKind::InvalidArgument, "frame counts differ: prediction has " +
                                         std::to_string(pred.size()) + ", ground truth has " +
                                         std::to_string(gt.size()));
  require(!pred.empty(), "evaluate: no frames");
  MetricReport r;
  r.key = key;
  r.has_corr = with_corr;
  std::vector<double> corr;
  if (with_corr) {
    std::vector<std::vector<Vec3d>> a, b;
    for (const auto& m : pred) a.push_back(m.vertices);
    for (const auto& m : gt) b.push_back(m.vertices);
    corr = metric_corr_frames(a, b, key);
  }
  for (std::size_t t = 0; t < pred.size(); ++t) {
    FrameMetrics f;
    f.cd = metric_cd(pred[t].vertices, gt[t].vertices);
    f.nc = metric_nc(pred[t], gt[t]);
    f.fscore_tau = fscore_threshold(gt[t].vertices);
    f.fscore = metric_fscore(pred[t].vertices, gt[t].vertices, f.fscore_tau);
    if (with_corr) f.corr = corr[t];
    r.frames.push_back(f);
    r.mean.cd += f.cd;
    r.mean.nc += f.nc;
    r.mean.fscore += f.fscore;
    r.mean.fscore_tau += f.fscore_tau;
    r.mean.corr += f.corr;
  }
  const double n = static_cast<double>(pred.size());
  r.mean.cd /= n;
  r.mean.nc /= n;
  r.mean.fscore /= n;
  r.mean.fscore_tau /= n;
  r.mean.corr /= n;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace neupig
