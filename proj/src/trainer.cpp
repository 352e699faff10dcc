#include "neupig/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

namespace neupig {

std::string to_string(GridStep v) { return v == GridStep::Filtered ? "filtered" : "adam"; }

GridStep parse_grid_step(const std::string& s) {
  if (s == "adam") return GridStep::Adam;
  if (s == "filtered") return GridStep::Filtered;
  fail(ErrorKind::Parse, "unknown grid step '" + s + "' (expected adam or filtered)");
}

double TrainConfig::level_lambda(int l) const {
  return level_lambdas.empty() ? grid.lambda(l) : level_lambdas.at(l - 1);
}

double TrainConfig::level_lr(int l) const {
  return level_lrs.empty() ? grid.learning_rate(l) : level_lrs.at(l - 1);
}

void TrainConfig::validate() const {
  grid.validate();
  require(epochs >= 0, "epochs must be >= 0");
  require(level_lambdas.empty() || static_cast<int>(level_lambdas.size()) == grid.levels,
          "level_lambdas must list one value per level");
  require(level_lrs.empty() || static_cast<int>(level_lrs.size()) == grid.levels,
          "level_lrs must list one value per level");
  for (double v : level_lambdas) require(v >= 0.0, "level lambda must be >= 0");
  for (double v : level_lrs) require(v >= 0.0, "level learning rate must be >= 0");
  require(mlp_lr >= 0.0, "mlp_lr must be >= 0");
  require(!mlp.hidden.empty(), "decoder needs at least one hidden layer");
  require(time.frequencies >= 1, "time_frequencies must be >= 1");
  require(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1,
          "adam betas must lie in [0,1)");
  require(adam.eps > 0, "adam eps must be > 0");
  require(objective.w_iso >= 0, "w_iso must be >= 0");
  require(objective.chamfer.truncation > 0, "chamfer truncation must be > 0");
  require(keyframe >= 0, "keyframe must be >= 0");
  require(occupancy_resolution >= 1, "keyframe occupancy resolution must be >= 1");
  require(keyframe_bias >= 0, "keyframe bias must be >= 0");
  require(chunk_columns >= 1, "chunk_columns must be >= 1");
  require(precond.tolerance > 0 && precond.max_iterations >= 1,
          "preconditioner tolerance and iteration cap must be positive");
}

// ---------------------------------------------------------------------------
// Keyframe
// ---------------------------------------------------------------------------

std::size_t occupancy(const PointCloud& cloud, int res) {
  std::vector<std::uint64_t> cells;
  cells.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    std::uint64_t idx = 0;
    for (int a = 2; a >= 0; --a) {
      int c = static_cast<int>(std::floor((p[a] + 1.0) * 0.5 * res));
      c = std::clamp(c, 0, res - 1);
      idx = idx * static_cast<std::uint64_t>(res) + static_cast<std::uint64_t>(c);
    }
    cells.push_back(idx);
  }
  std::sort(cells.begin(), cells.end());
  return static_cast<std::size_t>(std::unique(cells.begin(), cells.end()) - cells.begin());
}

KeyframeScores select_keyframe(const PointCloudSequence& clouds, int resolution,
                               double bias_rate) {
  require(!clouds.empty(), "select_keyframe: empty sequence");
  require(resolution >= 1, "select_keyframe: resolution must be >= 1");
  const int T = static_cast<int>(clouds.size());
  KeyframeScores ks;
  double best = -1.0;
  for (int i = 0; i < T; ++i) {
    const double off = static_cast<double>(i) - 0.5 * T;
    const double b = std::exp(-bias_rate * off * off);
    const std::size_t occ = occupancy(clouds[i], resolution);
    const double s = b * static_cast<double>(occ);
    ks.bias.push_back(b);
    ks.occupancy.push_back(occ);
    ks.score.push_back(s);
    if (s > best) {
      best = s;
      ks.key = i + 1;
    }
  }
  return ks;
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

template <typename T>
TrainData<T> make_train_data(const PointCloudSequence& clouds, const TriMesh& ref) {
  require(!clouds.empty(), "no input frames");
  validate_mesh(ref);
  require(ref.vertex_normals.size() == ref.vertices.size(),
          "reference mesh is missing vertex normals");
  TrainData<T> d;
  for (std::size_t t = 0; t < clouds.size(); ++t) {
    if (clouds[t].points.empty())
      fail(ErrorKind::InvalidArgument, "frame " + std::to_string(t + 1) + " has no points");
    std::vector<Vec3<T>> pts;
    pts.reserve(clouds[t].size());
    for (const auto& p : clouds[t].points) pts.push_back(p.template cast<T>());
    d.clouds.push_back(std::move(pts));
  }
  for (const auto& c : d.clouds) d.cloud_trees.emplace_back(std::span<const Vec3<T>>(c));
  for (const auto& v : ref.vertices) d.vertices.push_back(v.template cast<T>());
  for (const auto& n : ref.vertex_normals) d.normals.push_back(n.template cast<T>());
  d.edges = ref.edges;
  d.edge_lengths = edge_lengths(std::span<const Vec3<T>>(d.vertices), d.edges);
  d.faces = ref.faces;
  return d;
}

template <typename T>
std::vector<std::span<T>> parameter_spans(TrainState<T>& s) {
  std::vector<std::span<T>> out;
  for (auto& l : s.mlp.layers()) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  out.push_back(s.time.params());
  for (auto& lv : s.grids.position_levels) out.emplace_back(lv.features);
  out.emplace_back(s.grids.normal_level.features);
  return out;
}

template <typename T>
std::vector<std::span<T>> gradient_spans(Gradients<T>& g) {
  std::vector<std::span<T>> out;
  for (auto& l : g.mlp) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  out.emplace_back(g.time);
  for (auto& lv : g.levels) out.emplace_back(lv);
  out.emplace_back(g.normal);
  return out;
}

template <typename T>
std::vector<ParamGroup> parameter_groups(const TrainState<T>& s) {
  std::vector<ParamGroup> out;
  const auto& layers = s.mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.push_back({"mlp." + std::to_string(l) + ".weight", s.cfg.mlp_lr,
                   static_cast<std::size_t>(layers[l].weight.size())});
    out.push_back({"mlp." + std::to_string(l) + ".bias", s.cfg.mlp_lr,
                   static_cast<std::size_t>(layers[l].bias.size())});
  }
  out.push_back({"time", s.cfg.mlp_lr, s.time.params().size()});
  for (int l = 0; l < s.grids.levels(); ++l)
    out.push_back({"grid." + std::to_string(l + 1), s.grids.learning_rates[l],
                   s.grids.position_levels[l].features.size()});
  out.push_back({"grid.normal", s.cfg.normal_latent ? s.grids.normal_learning_rate : 0.0,
                 s.grids.normal_level.features.size()});
  return out;
}

template <typename T>
TrainState<T> init_state(const TrainData<T>& data, const TrainConfig& cfg, int key) {
  cfg.validate();
  require(key >= 0 && key < data.frames(), "init_state: keyframe out of range");
  TrainState<T> s;
  s.cfg = cfg;
  s.grids = LatentGridPyramid<T>::zeros(cfg.grid);
  for (int l = 1; l <= cfg.grid.levels; ++l) {
    s.grids.lambdas[l - 1] = cfg.level_lambda(l);
    s.grids.learning_rates[l - 1] = cfg.level_lr(l);
  }
  MlpConfig mc = cfg.mlp;
  mc.input_dim = cfg.grid.normal_channels + cfg.grid.position_channels + 2 * cfg.time.frequencies;
  s.mlp = Mlp<T>(mc, cfg.seed);
  s.time = TimeEncoder<T>(cfg.time, cfg.seed, static_cast<T>(mc.leaky_slope));
  for (auto sp : parameter_spans(s))
    s.moments.push_back({std::vector<T>(sp.size(), T(0)), std::vector<T>(sp.size(), T(0))});
  s.key = key;
  s.frame_cd.assign(data.frames(), 0.0);
  s.key_lengths = edge_lengths(std::span<const Vec3<T>>(data.vertices), data.edges);
  return s;
}

template <typename T>
Gradients<T> zero_gradients(const TrainState<T>& s) {
  Gradients<T> g;
  g.mlp = s.mlp.zeros_like();
  g.time.assign(s.time.params().size(), T(0));
  for (const auto& lv : s.grids.position_levels) g.levels.emplace_back(lv.features.size(), T(0));
  g.normal.assign(s.grids.normal_level.features.size(), T(0));
  return g;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

int wave_width(kernels::Exec exec) {
  return exec == kernels::Exec::Parallel ? std::max(1, kernels::worker_count()) : 1;
}

template <typename T>
MatX<T> decoder_input(const ForwardPass<T>& fp, Eigen::Index n_vertices,
                      Eigen::Index begin, Eigen::Index count) {
  const Eigen::Index cn = fp.z_n.rows(), cp = fp.z_p.rows(), ct = fp.gamma.rows();
  MatX<T> in(cn + cp + ct, count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const Eigen::Index col = begin + j;
    const Eigen::Index t = col / n_vertices, i = col % n_vertices;
    in.col(j).head(cn) = fp.z_n.col(i);
    in.col(j).segment(cn, cp) = fp.z_p.col(i);
    in.col(j).tail(ct) = fp.gamma.col(t);
  }
  return in;
}

template <typename T>
std::array<T, 4> rotation_part(const MatX<T>& out, Eigen::Index col) {
  return {out(0, col), out(1, col), out(2, col), out(3, col)};
}

template <typename T>
bool cache_fits(const TrainState<T>& s, std::size_t columns) {
  std::size_t rows = s.mlp.config().input_dim;
  for (const auto& l : s.mlp.layers()) rows += 2 * static_cast<std::size_t>(l.weight.rows());
  const double mb = static_cast<double>(rows * columns * sizeof(T)) / (1024.0 * 1024.0);
  return mb <= s.cfg.cache_budget_mb;
}

}  // namespace

template <typename T>
ForwardPass<T> forward(const TrainState<T>& s, const TrainData<T>& data, kernels::Exec exec,
                       bool keep_cache) {
  const Eigen::Index N = static_cast<Eigen::Index>(data.vertices.size());
  const int T_frames = data.frames();
  ForwardPass<T> fp;
  s.mlp.check_finite();  // before the parallel region
  const std::span<const Vec3<T>> normals =
      s.cfg.normal_latent ? std::span<const Vec3<T>>(data.normals) : std::span<const Vec3<T>>();
  kernels::gather_latents(s.grids, std::span<const Vec3<T>>(data.vertices), normals, fp.z_p,
                          fp.z_n, exec);
  fp.gamma.resize(s.time.output_dim(), T_frames);
  for (int t = 0; t < T_frames; ++t)
    fp.gamma.col(t) = s.time.encode(static_cast<T>(normalized_time(t + 1, T_frames)));

  const Eigen::Index total = N * T_frames;
  const Eigen::Index chunk = s.cfg.chunk_columns;
  const Eigen::Index n_chunks = (total + chunk - 1) / chunk;
  fp.output.resize(s.mlp.config().output_dim, total);
  if (keep_cache) fp.caches.resize(n_chunks);

#pragma omp parallel for schedule(dynamic) if (exec == kernels::Exec::Parallel) \
    num_threads(kernels::worker_count())
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index count = std::min(chunk, total - begin);
    typename Mlp<T>::Cache local;
    auto& cache = keep_cache ? fp.caches[c] : local;
    fp.output.middleCols(begin, count) = s.mlp.forward_batch(decoder_input(fp, N, begin, count), cache);
  }

  fp.frames.assign(T_frames, std::vector<Vec3<T>>(N));
  const T alpha = static_cast<T>(s.cfg.translation_scale);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::Parallel) \
    num_threads(kernels::worker_count())
  for (Eigen::Index col = 0; col < total; ++col) {
    const Eigen::Index t = col / N, i = col % N;
    VertexDeformation<T> d;
    try {
      d.rotation = map_rotation(rotation_part(fp.output, col), s.cfg.rotation);
    } catch (const Error&) {
      // Reported after the loop; exceptions must not leave the parallel region.
      d.rotation.setConstant(std::numeric_limits<T>::quiet_NaN());
    }
    d.translation = map_translation(Vec3<T>(fp.output.template block<3, 1>(4, col)), alpha);
    fp.frames[t][i] = apply_transform(data.vertices[i], d);
  }
  for (int t = 0; t < T_frames; ++t)
    for (const auto& v : fp.frames[t])
      if (!v.allFinite())
        fail(ErrorKind::Numeric, "non-finite predicted vertex at frame " + std::to_string(t + 1));
  return fp;
}

template <typename T>
void backward(const TrainState<T>& s, const TrainData<T>& data, const ForwardPass<T>& fp,
              const std::vector<std::vector<Vec3<T>>>& d_frames, Gradients<T>& grads,
              kernels::Exec exec) {
  const Eigen::Index N = static_cast<Eigen::Index>(data.vertices.size());
  const int T_frames = data.frames();
  const Eigen::Index total = N * T_frames;
  const T alpha = static_cast<T>(s.cfg.translation_scale);

  // Through the transformation mapping.
  for (int t = 0; t < T_frames; ++t)
    for (const auto& g : d_frames[t])
      if (!g.allFinite())
        fail(ErrorKind::Numeric, "non-finite upstream gradient at frame " + std::to_string(t + 1));
  MatX<T> d_out(fp.output.rows(), total);
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::Parallel) \
    num_threads(kernels::worker_count())
  for (Eigen::Index col = 0; col < total; ++col) {
    const Eigen::Index t = col / N, i = col % N;
    const Vec3<T>& g = d_frames[t][i];
    const Mat3<T> d_rot = g * data.vertices[i].transpose();
    const auto dq = map_rotation_vjp(rotation_part(fp.output, col), s.cfg.rotation, d_rot);
    for (int k = 0; k < 4; ++k) d_out(k, col) = dq[k];
    for (int k = 0; k < 3; ++k) {
      const T th = std::tanh(alpha * fp.output(4 + k, col));
      d_out(4 + k, col) = g[k] * alpha * (T(1) - th * th);
    }
  }

  // Through the decoder, chunk by chunk. Per-chunk results are merged in chunk
  // order so the sums do not depend on the worker count.
  const Eigen::Index cn = fp.z_n.rows(), cp = fp.z_p.rows(), ct = fp.gamma.rows();
  MatX<T> dz_p = MatX<T>::Zero(cp, N);
  MatX<T> dz_n = MatX<T>::Zero(cn, N);
  MatX<T> d_gamma = MatX<T>::Zero(ct, T_frames);
  const Eigen::Index chunk = s.cfg.chunk_columns;
  const Eigen::Index n_chunks = (total + chunk - 1) / chunk;
  const bool cached = static_cast<Eigen::Index>(fp.caches.size()) == n_chunks;
  const int width = wave_width(exec);
  std::vector<std::vector<DenseLayer<T>>> slot_grads(width, s.mlp.zeros_like());
  std::vector<MatX<T>> slot_din(width);

  for (Eigen::Index wave = 0; wave < n_chunks; wave += width) {
    const int active = static_cast<int>(std::min<Eigen::Index>(width, n_chunks - wave));
#pragma omp parallel for schedule(static) if (exec == kernels::Exec::Parallel) \
    num_threads(kernels::worker_count())
    for (int slot = 0; slot < active; ++slot) {
      const Eigen::Index c = wave + slot;
      const Eigen::Index begin = c * chunk;
      const Eigen::Index count = std::min(chunk, total - begin);
      for (auto& l : slot_grads[slot]) {
        l.weight.setZero();
        l.bias.setZero();
      }
      typename Mlp<T>::Cache local;
      if (!cached) s.mlp.forward_batch(decoder_input(fp, N, begin, count), local);
      const auto& cache = cached ? fp.caches[c] : local;
      slot_din[slot] = s.mlp.backward_batch(cache, d_out.middleCols(begin, count), slot_grads[slot]);
    }
    for (int slot = 0; slot < active; ++slot) {
      for (std::size_t l = 0; l < grads.mlp.size(); ++l) {
        grads.mlp[l].weight += slot_grads[slot][l].weight;
        grads.mlp[l].bias += slot_grads[slot][l].bias;
      }
      const Eigen::Index begin = (wave + slot) * chunk;
      const MatX<T>& din = slot_din[slot];
      for (Eigen::Index j = 0; j < din.cols(); ++j) {
        const Eigen::Index col = begin + j;
        const Eigen::Index t = col / N, i = col % N;
        dz_n.col(i) += din.col(j).head(cn);
        dz_p.col(i) += din.col(j).segment(cn, cp);
        d_gamma.col(t) += din.col(j).tail(ct);
      }
    }
  }

  const std::span<const Vec3<T>> normals =
      s.cfg.normal_latent ? std::span<const Vec3<T>>(data.normals) : std::span<const Vec3<T>>();
  kernels::scatter_latents(s.grids, std::span<const Vec3<T>>(data.vertices), normals, dz_p, dz_n,
                           grads.levels, grads.normal, exec);

  if (s.cfg.time.variant == TimeEncoding::Learned)
    for (int t = 0; t < T_frames; ++t)
      s.time.backward(static_cast<T>(normalized_time(t + 1, T_frames)),
                      std::span<const T>(d_gamma.col(t).data(), static_cast<std::size_t>(ct)),
                      std::span<T>(grads.time));
}

template <typename T>
ObjectiveInputs<T> objective_inputs(const TrainData<T>& data, int key, double epoch_fraction) {
  ObjectiveInputs<T> in;
  in.clouds = &data.clouds;
  in.cloud_trees = &data.cloud_trees;
  in.edges = data.edges;
  in.reference_lengths = data.edge_lengths;
  in.key = key;
  in.epoch_fraction = epoch_fraction;
  return in;
}

template <typename T>
LossBreakdown loss_and_gradients(const TrainState<T>& s, const TrainData<T>& data,
                                 const DetachedTerms<T>& detached, double epoch_fraction,
                                 Gradients<T>* grads) {
  const auto exec = s.cfg.objective.exec;
  const auto fp = forward(s, data, exec,
                          grads && cache_fits(s, data.vertices.size() * data.clouds.size()));
  const auto in = objective_inputs(data, s.key, epoch_fraction);
  std::vector<std::vector<Vec3<T>>> d_frames;
  const auto loss = evaluate_loss(fp.frames, in, detached, s.cfg.objective,
                                  grads ? &d_frames : nullptr);
  if (grads) backward(s, data, fp, d_frames, *grads, exec);
  return loss;
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, Moments<T>& mom, double lr,
                 const AdamConfig& cfg, int step) {
  require(param.size() == grad.size() && mom.m.size() == param.size() &&
              mom.v.size() == param.size(),
          "adam: size mismatch");
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, step));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, step));
  const T eps = static_cast<T>(cfg.eps), rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    mom.m[i] = b1 * mom.m[i] + (T(1) - b1) * g;
    mom.v[i] = b2 * mom.v[i] + (T(1) - b2) * g * g;
    if (lr == 0.0) continue;
    const T m_hat = mom.m[i] / c1;
    const T v_hat = mom.v[i] / c2;
    param[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
void precondition_gradients(const TrainState<T>& s, Gradients<T>& grads) {
  const int L = s.grids.levels();
  const bool parallel = s.cfg.objective.exec == kernels::Exec::Parallel;
  // One slot per task; rethrown after the parallel region.
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(L) + 1);
#pragma omp parallel for schedule(dynamic) if (parallel) num_threads(kernels::worker_count())
  for (int task = 0; task <= L; ++task) {
    try {
      if (task == L) {
        if (s.cfg.normal_latent)
          precondition(s.grids.normal_level.resolution, s.grids.normal_level.channels,
                       std::span<T>(grads.normal), s.grids.normal_lambda, s.cfg.precond);
        continue;
      }
      const auto& lv = s.grids.position_levels[task];
      precondition(lv.resolution, lv.channels, std::span<T>(grads.levels[task]),
                   s.grids.lambdas[task], s.cfg.precond);
    } catch (...) {
      errors[task] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <typename T>
LossBreakdown train_epoch(TrainState<T>& s, const TrainData<T>& data) {
  const auto exec = s.cfg.objective.exec;
  const double ef = s.cfg.epochs > 0
                        ? std::min(1.0, static_cast<double>(s.epoch) / s.cfg.epochs)
                        : 0.0;
  const auto fp = forward(s, data, exec, cache_fits(s, data.vertices.size() * data.clouds.size()));
  const auto in = objective_inputs(data, s.key, ef);
  DetachedTerms<T> det = detach_terms(fp.frames, in, s.cfg.objective);
  std::vector<std::vector<Vec3<T>>> d_frames;
  LossBreakdown loss = evaluate_loss(fp.frames, in, det, s.cfg.objective, &d_frames);
  if (!std::isfinite(loss.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << s.epoch + 1 << " (total " << loss.total
        << ", deformation " << loss.deformation << ", isometry " << loss.isometry << ")";
    for (std::size_t t = 0; t < loss.frame_cd.size(); ++t)
      if (!std::isfinite(loss.frame_cd[t])) {
        msg << "; first bad frame " << t + 1;
        break;
      }
    fail(ErrorKind::Numeric, msg.str());
  }

  Gradients<T> grads = zero_gradients(s);
  backward(s, data, fp, d_frames, grads, exec);
  if (s.cfg.precondition) precondition_gradients(s, grads);

  auto params = parameter_spans(s);
  auto gspans = gradient_spans(grads);
  const auto groups = parameter_groups(s);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const bool grid = groups[k].name.rfind("grid.", 0) == 0;
    if (grid && s.cfg.grid_step == GridStep::Filtered) {
      const T rate = static_cast<T>(groups[k].lr);
      for (std::size_t i = 0; i < params[k].size(); ++i) params[k][i] -= rate * gspans[k][i];
      continue;
    }
    adam_update(params[k], std::span<const T>(gspans[k]), s.moments[k], groups[k].lr,
                s.cfg.adam, s.epoch + 1);
  }

  s.frame_cd = det.frame_cd;
  s.key_lengths = std::move(det.key_lengths);
  ++s.epoch;
  return loss;
}

template <typename T>
std::vector<std::vector<Vec3<T>>> predict(const TrainState<T>& s, const TrainData<T>& data) {
  return forward(s, data, s.cfg.objective.exec, false).frames;
}

template <typename T>
RunResult run(const TrainData<T>& data, const TrainConfig& cfg, int key,
              TrainState<T>* final_state, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  TrainState<T> s = init_state(data, cfg, key);
  RunResult r;
  r.key = key + 1;
  for (int e = 0; e < cfg.epochs; ++e) {
    r.history.push_back(train_epoch(s, data));
    if (on_epoch) on_epoch(e + 1, r.history.back());
  }
  for (const auto& frame : predict(s, data)) {
    std::vector<Vec3d> out;
    out.reserve(frame.size());
    for (const auto& v : frame) out.push_back(v.template cast<double>());
    r.frames.push_back(std::move(out));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (final_state) *final_state = std::move(s);
  return r;
}

#define NEUPIG_INSTANTIATE(T)                                                                \
  template TrainData<T> make_train_data(const PointCloudSequence&, const TriMesh&);          \
  template TrainState<T> init_state(const TrainData<T>&, const TrainConfig&, int);           \
  template Gradients<T> zero_gradients(const TrainState<T>&);                                \
  template std::vector<std::span<T>> parameter_spans(TrainState<T>&);                        \
  template std::vector<std::span<T>> gradient_spans(Gradients<T>&);                          \
  template std::vector<ParamGroup> parameter_groups(const TrainState<T>&);                   \
  template ForwardPass<T> forward(const TrainState<T>&, const TrainData<T>&, kernels::Exec,  \
                                  bool);                                                     \
  template void backward(const TrainState<T>&, const TrainData<T>&, const ForwardPass<T>&,   \
                         const std::vector<std::vector<Vec3<T>>>&, Gradients<T>&,            \
                         kernels::Exec);                                                     \
  template ObjectiveInputs<T> objective_inputs(const TrainData<T>&, int, double);            \
  template LossBreakdown loss_and_gradients(const TrainState<T>&, const TrainData<T>&,       \
                                            const DetachedTerms<T>&, double, Gradients<T>*); \
  template void adam_update(std::span<T>, std::span<const T>, Moments<T>&, double,           \
                            const AdamConfig&, int);                                         \
  template void precondition_gradients(const TrainState<T>&, Gradients<T>&);                 \
  template LossBreakdown train_epoch(TrainState<T>&, const TrainData<T>&);                   \
  template std::vector<std::vector<Vec3<T>>> predict(const TrainState<T>&,                   \
                                                     const TrainData<T>&);                   \
  template RunResult run(const TrainData<T>&, const TrainConfig&, int, TrainState<T>*,       \
                         const EpochCallback&);

NEUPIG_INSTANTIATE(float)
NEUPIG_INSTANTIATE(double)
#undef NEUPIG_INSTANTIATE

}  // namespace neupig
