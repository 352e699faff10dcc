#include "neupig/deform_model.hpp"

#include <iostream>

namespace neupig {

std::string to_string(TimeEncoding e) {
  switch (e) {
    case TimeEncoding::Fourier: return "fourier";
    case TimeEncoding::Polynomial: return "polynomial";
    case TimeEncoding::Gaussian: return "gaussian";
    case TimeEncoding::Learned: return "learned";
  }
  return "?";
}

TimeEncoding parse_time_encoding(const std::string& s) {
  if (s == "fourier") return TimeEncoding::Fourier;
  if (s == "polynomial") return TimeEncoding::Polynomial;
  if (s == "gaussian") return TimeEncoding::Gaussian;
  if (s == "learned") return TimeEncoding::Learned;
  fail(ErrorKind::Parse, "unknown time encoding '" + s + "'");
}

double normalized_time(int t, int frame_count) {
  require(frame_count >= 1 && t >= 1 && t <= frame_count,
          "normalized_time: frame index out of range");
  if (frame_count == 1) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "warning: single-frame sequence, normalized time fixed to 0\n";
      warned = true;
    }
    return 0.0;
  }
  return static_cast<double>(t - 1) / static_cast<double>(frame_count - 1);
}

template <typename T>
TimeEncoder<T>::TimeEncoder(const TimeEncoderConfig& cfg, std::uint64_t seed, T slope)
    : cfg_(cfg), slope_(slope) {
  require(cfg.frequencies >= 1, "time encoder needs at least one frequency");
  const int M = cfg.frequencies;
  if (cfg.variant == TimeEncoding::Gaussian) {
    Rng rng(mix_seed(seed ^ stream::kTimeGaussian));
    gaussian_b_.resize(M);
    for (int j = 0; j < M; ++j) gaussian_b_[j] = static_cast<T>(rng.normal());
  } else if (cfg.variant == TimeEncoding::Learned) {
    require(cfg.learned_hidden >= 1, "learned time encoder needs hidden width >= 1");
    const int H = cfg.learned_hidden;
    const int D = 2 * M;
    Rng rng(mix_seed(seed ^ stream::kTimeLearned));
    params_.resize(static_cast<std::size_t>(H) * 2 + static_cast<std::size_t>(D) * H + D);
    T* p = params_.data();
    for (int i = 0; i < 2 * H; ++i) *p++ = static_cast<T>(rng.uniform(-1.0, 1.0));
    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    for (int i = 0; i < D * H + D; ++i) *p++ = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
VecX<T> TimeEncoder<T>::encode(T t) const {
  const int M = cfg_.frequencies;
  VecX<T> out(2 * M);
  switch (cfg_.variant) {
    case TimeEncoding::Fourier:
      for (int j = 0; j < M; ++j) {
        const T arg = static_cast<T>(std::numbers::pi) * std::ldexp(T(1), j) * t;
        out[2 * j] = std::sin(arg);
        out[2 * j + 1] = std::cos(arg);
      }
      break;
    case TimeEncoding::Polynomial: {
      T p = t;
      for (int j = 0; j < 2 * M; ++j) {
        out[j] = p;
        p *= t;
      }
      break;
    }
    case TimeEncoding::Gaussian:
      for (int j = 0; j < M; ++j) {
        const T arg = T(2) * static_cast<T>(std::numbers::pi) * gaussian_b_[j] * t;
        out[2 * j] = std::sin(arg);
        out[2 * j + 1] = std::cos(arg);
      }
      break;
    case TimeEncoding::Learned: {
      const int H = cfg_.learned_hidden;
      const int D = 2 * M;
      const T* w1 = params_.data();
      const T* b1 = w1 + H;
      const T* w2 = b1 + H;
      const T* b2 = w2 + static_cast<std::size_t>(D) * H;
      for (int d = 0; d < D; ++d) out[d] = b2[d];
      for (int h = 0; h < H; ++h) {
        const T a = leaky_relu(w1[h] * t + b1[h], slope_);
        for (int d = 0; d < D; ++d) out[d] += w2[d + D * h] * a;
      }
      break;
    }
  }
  return out;
}

template <typename T>
void TimeEncoder<T>::backward(T t, std::span<const T> d_gamma, std::span<T> grad) const {
  if (cfg_.variant != TimeEncoding::Learned) return;
  const int H = cfg_.learned_hidden;
  const int D = 2 * cfg_.frequencies;
  require(static_cast<int>(d_gamma.size()) == D && grad.size() == params_.size(),
          "time encoder backward: size mismatch");
  const T* w1 = params_.data();
  const T* b1 = w1 + H;
  const T* w2 = b1 + H;
  T* gw1 = grad.data();
  T* gb1 = gw1 + H;
  T* gw2 = gb1 + H;
  T* gb2 = gw2 + static_cast<std::size_t>(D) * H;
  for (int d = 0; d < D; ++d) gb2[d] += d_gamma[d];
  for (int h = 0; h < H; ++h) {
    const T pre = w1[h] * t + b1[h];
    const T a = leaky_relu(pre, slope_);
    T dh = 0;
    for (int d = 0; d < D; ++d) {
      gw2[d + D * h] += d_gamma[d] * a;
      dh += w2[d + D * h] * d_gamma[d];
    }
    const T dpre = pre > T(0) ? dh : slope_ * dh;
    gw1[h] += dpre * t;
    gb1[h] += dpre;
  }
}

template class TimeEncoder<float>;
template class TimeEncoder<double>;

}  // namespace neupig
