#pragma once

#include "neupig/common.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace neupig {

// ---------------------------------------------------------------------------
// Time encodings
// ---------------------------------------------------------------------------

enum class TimeEncoding { Fourier, Polynomial, Gaussian, Learned };

std::string to_string(TimeEncoding e);
TimeEncoding parse_time_encoding(const std::string& s);

struct TimeEncoderConfig {
  TimeEncoding variant = TimeEncoding::Fourier;
  int frequencies = 4;      // M; the output has 2M components
  int learned_hidden = 64;  // width of the learned encoder's hidden layer
};

// (t - 1) / (T - 1) for 1-based frame t. A single-frame sequence maps to 0.
double normalized_time(int t, int frame_count);

// Leaky ReLU shared by the decoder and the learned time encoder.
template <typename T>
inline T leaky_relu(T x, T slope) {
  return x > T(0) ? x : slope * x;
}

template <typename T>
class TimeEncoder {
 public:
  TimeEncoder() = default;
  // Draws the Gaussian frequencies / learned weights from `seed`; other
  // variants ignore it.
  TimeEncoder(const TimeEncoderConfig& cfg, std::uint64_t seed, T slope = T(0.01));

  int output_dim() const { return 2 * cfg_.frequencies; }
  const TimeEncoderConfig& config() const { return cfg_; }

  VecX<T> encode(T t_norm) const;

  // Learned variant only: accumulates d(loss)/d(params) given d(loss)/d(gamma)
  // at t_norm into `grad` (laid out like params()).
  void backward(T t_norm, std::span<const T> d_gamma, std::span<T> grad) const;

  // Trainable parameters, flat: [W1 (H), b1 (H), W2 (2M x H col-major), b2 (2M)].
  // Empty unless the variant is Learned.
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }
  const VecX<T>& gaussian_frequencies() const { return gaussian_b_; }
  void set_gaussian_frequencies(const VecX<T>& b) { gaussian_b_ = b; }

 private:
  TimeEncoderConfig cfg_;
  T slope_ = T(0.01);
  VecX<T> gaussian_b_;
  std::vector<T> params_;
};

// ---------------------------------------------------------------------------
// Decoder MLP
// ---------------------------------------------------------------------------

struct MlpConfig {
  int input_dim = 40;
  std::vector<int> hidden = {512, 512, 512};
  int output_dim = 7;
  double leaky_slope = 0.01;
};

template <typename T>
struct DenseLayer {
  MatX<T> weight;  // out x in
  VecX<T> bias;
};

// Affine layers with leaky ReLU between them and none after the last.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  // Hidden layers: Kaiming-uniform with a = sqrt(5), i.e. weights and biases
  // drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)). The output layer is zero.
  Mlp(const MlpConfig& cfg, std::uint64_t seed);

  const MlpConfig& config() const { return cfg_; }
  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }
  T slope() const { return static_cast<T>(cfg_.leaky_slope); }
  std::size_t parameter_count() const;
  // Throws a numeric error naming the first layer holding a NaN or Inf.
  void check_finite() const;

  // Single input, plain loops. Reference path for the batched kernels.
  VecX<T> forward(const VecX<T>& y) const;

  // Batched: each column of `input` is one sample.
  struct Cache {
    std::vector<MatX<T>> pre;   // pre-activation of every layer
    std::vector<MatX<T>> post;  // post[0] = input, post[l+1] = act(pre[l])
  };
  MatX<T> forward_batch(const MatX<T>& input, Cache& cache) const;

  // Accumulates parameter gradients into `grads` (same shapes as layers())
  // and returns d(loss)/d(input).
  MatX<T> backward_batch(const Cache& cache, const MatX<T>& d_output,
                         std::vector<DenseLayer<T>>& grads) const;

  std::vector<DenseLayer<T>> zeros_like() const;

 private:
  MlpConfig cfg_;
  std::vector<DenseLayer<T>> layers_;
};

// ---------------------------------------------------------------------------
// Transformation mapping
// ---------------------------------------------------------------------------

enum class RotationVariant { Quaternion, Cayley, Exponential };

std::string to_string(RotationVariant v);
RotationVariant parse_rotation(const std::string& s);

// Rotation from the first four decoder outputs (qw, qx, qy, qz).
//  Quaternion: normalize (1 + qw, qx, qy, qz), Hamilton convention.
//  Cayley: (I - S)^-1 (I + S) with S = skew(qx, qy, qz).
//  Exponential: Rodrigues on the axis-angle vector (qx, qy, qz).
// A zero input yields the identity for every variant. To first order,
// quaternion(0, v) == cayley(v) == exponential(2v).
template <typename T>
Mat3<T> map_rotation(const std::array<T, 4>& q_raw, RotationVariant variant);

// d(loss)/d(q_raw) given d(loss)/d(R).
template <typename T>
std::array<T, 4> map_rotation_vjp(const std::array<T, 4>& q_raw,
                                  RotationVariant variant, const Mat3<T>& d_rot);

inline constexpr double kTranslationScale = 0.1;  // alpha

// tanh(alpha * d) componentwise.
template <typename T>
Vec3<T> map_translation(const Vec3<T>& d_raw, T alpha = T(kTranslationScale));

template <typename T>
struct VertexDeformation {
  Mat3<T> rotation = Mat3<T>::Identity();
  Vec3<T> translation = Vec3<T>::Zero();
};

template <typename T>
Vec3<T> apply_transform(const Vec3<T>& x, const VertexDeformation<T>& d) {
  return d.rotation * x + d.translation;
}

// Concatenation (z_n, z_p, gamma).
template <typename T>
VecX<T> assemble_input(const VecX<T>& z_n, const VecX<T>& z_p, const VecX<T>& gamma,
                       int normal_dim = 2, int position_dim = 30, int time_dim = 8);

}  // namespace neupig
