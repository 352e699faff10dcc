#pragma once

#include "neupig/deform_model.hpp"
#include "neupig/geometry.hpp"
#include "neupig/kdtree.hpp"
#include "neupig/kernels.hpp"
#include "neupig/latent_grid.hpp"
#include "neupig/objective.hpp"
#include "neupig/preconditioner.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neupig {

inline constexpr int kFastEpochs = 250;
inline constexpr int kFullEpochs = 1000;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// How grid features consume their (filtered) gradient: through Adam like the
// decoder, or as a plain step of size lr along it.
enum class GridStep { Adam, Filtered };
std::string to_string(GridStep v);
GridStep parse_grid_step(const std::string& s);

struct TrainConfig {
  int epochs = kFastEpochs;
  std::uint64_t seed = 0;

  GridConfig grid;
  // Explicit per-level overrides; empty means the geometric schedule.
  std::vector<double> level_lambdas;
  std::vector<double> level_lrs;

  MlpConfig mlp;
  TimeEncoderConfig time;
  RotationVariant rotation = RotationVariant::Quaternion;
  double translation_scale = kTranslationScale;

  double mlp_lr = 1e-3;  // also used by the learned time encoder
  AdamConfig adam;
  GridStep grid_step = GridStep::Adam;

  ObjectiveConfig objective;
  bool precondition = true;
  PreconditionOptions precond;
  bool normal_latent = true;

  int keyframe = 0;  // 1-based; 0 selects automatically
  int occupancy_resolution = 128;
  double keyframe_bias = 0.001;

  // Decoder columns per work item. Fixed so the reduction order does not
  // depend on the worker count.
  int chunk_columns = 512;
  // Decoder activations are kept between forward and backward when they fit,
  // otherwise recomputed.
  double cache_budget_mb = 1024.0;

  double level_lambda(int level_1based) const;
  double level_lr(int level_1based) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Keyframe selection
// ---------------------------------------------------------------------------

struct KeyframeScores {
  int key = 1;  // 1-based
  std::vector<double> bias;
  std::vector<std::size_t> occupancy;
  std::vector<double> score;
};

// Number of distinct cells of a res^3 lattice over [-1,1]^3 holding a point.
std::size_t occupancy(const PointCloud& cloud, int resolution);

// score(t) = exp(-bias_rate ((t-1) - T/2)^2) * occupancy(P_t); argmax, ties to
// the smaller t.
KeyframeScores select_keyframe(const PointCloudSequence& clouds, int resolution = 128,
                               double bias_rate = 0.001);

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

template <typename T>
struct Moments {
  std::vector<T> m;
  std::vector<T> v;
};

// Observations and the reference surface in normalized coordinates.
template <typename T>
struct TrainData {
  std::vector<std::vector<Vec3<T>>> clouds;
  std::vector<KdTree<T>> cloud_trees;
  std::vector<Vec3<T>> vertices;  // keyframe reference
  std::vector<Vec3<T>> normals;
  std::vector<Edge> edges;
  std::vector<T> edge_lengths;  // of the reference
  std::vector<Face> faces;
  int frames() const { return static_cast<int>(clouds.size()); }
};

template <typename T>
TrainData<T> make_train_data(const PointCloudSequence& normalized_clouds,
                             const TriMesh& normalized_reference);

template <typename T>
struct TrainState {
  TrainConfig cfg;
  LatentGridPyramid<T> grids;
  Mlp<T> mlp;
  TimeEncoder<T> time;
  // Parameter-group order: MLP (weight, bias per layer), time encoder,
  // position levels, normal level.
  std::vector<Moments<T>> moments;
  int epoch = 0;
  int key = 0;  // 0-based
  std::vector<double> frame_cd;  // detached values of the last epoch
  std::vector<T> key_lengths;    // detached keyframe edge lengths
};

template <typename T>
TrainState<T> init_state(const TrainData<T>& data, const TrainConfig& cfg, int key);

// Gradients shaped like the parameters.
template <typename T>
struct Gradients {
  std::vector<DenseLayer<T>> mlp;
  std::vector<T> time;
  std::vector<std::vector<T>> levels;
  std::vector<T> normal;
};

template <typename T>
Gradients<T> zero_gradients(const TrainState<T>& s);

struct ParamGroup {
  std::string name;
  double lr = 0.0;
  std::size_t size = 0;
};

// Flat views over every trainable parameter group, in moment order.
template <typename T>
std::vector<std::span<T>> parameter_spans(TrainState<T>& s);
template <typename T>
std::vector<std::span<T>> gradient_spans(Gradients<T>& g);
template <typename T>
std::vector<ParamGroup> parameter_groups(const TrainState<T>& s);

// ---------------------------------------------------------------------------
// Forward / backward through grids, encoder and decoder
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardPass {
  MatX<T> z_p;  // position_channels x N
  MatX<T> z_n;  // normal_channels x N
  MatX<T> gamma;  // time_dim x T
  MatX<T> output;  // 7 x (N*T); column t*N + i
  std::vector<typename Mlp<T>::Cache> caches;  // per chunk, empty if recomputed
  std::vector<std::vector<Vec3<T>>> frames;    // predicted vertices per frame
};

template <typename T>
ForwardPass<T> forward(const TrainState<T>& s, const TrainData<T>& data,
                       kernels::Exec exec, bool keep_cache);

// Backpropagates d(loss)/d(predicted vertices) into parameter gradients.
template <typename T>
void backward(const TrainState<T>& s, const TrainData<T>& data, const ForwardPass<T>& fp,
              const std::vector<std::vector<Vec3<T>>>& d_frames, Gradients<T>& grads,
              kernels::Exec exec);

template <typename T>
ObjectiveInputs<T> objective_inputs(const TrainData<T>& data, int key, double epoch_fraction);

// Loss and raw (unfiltered) parameter gradients with the detached terms fixed.
template <typename T>
LossBreakdown loss_and_gradients(const TrainState<T>& s, const TrainData<T>& data,
                                 const DetachedTerms<T>& detached, double epoch_fraction,
                                 Gradients<T>* grads);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

// In-place Adam update with bias correction; `step` is 1-based.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, Moments<T>& mom, double lr,
                 const AdamConfig& cfg, int step);

// Replaces the grid gradients by their Sobolev-filtered versions.
template <typename T>
void precondition_gradients(const TrainState<T>& s, Gradients<T>& grads);

// One full-batch step. Throws ErrorKind::Numeric on a non-finite loss.
template <typename T>
LossBreakdown train_epoch(TrainState<T>& s, const TrainData<T>& data);

template <typename T>
std::vector<std::vector<Vec3<T>>> predict(const TrainState<T>& s, const TrainData<T>& data);

struct RunResult {
  int key = 1;  // 1-based
  KeyframeScores key_scores;
  std::vector<LossBreakdown> history;
  std::vector<std::vector<Vec3d>> frames;  // normalized coordinates
  double seconds = 0.0;
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;

template <typename T>
RunResult run(const TrainData<T>& data, const TrainConfig& cfg, int key,
              TrainState<T>* final_state = nullptr, const EpochCallback& on_epoch = {});

}  // namespace neupig
