#include "neupig/deform_model.hpp"

namespace neupig {

template <typename T>
Mlp<T>::Mlp(const MlpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  require(cfg.input_dim >= 1 && cfg.output_dim >= 1, "mlp: bad dimensions");
  for (int h : cfg.hidden) require(h >= 1, "mlp: hidden width must be >= 1");
  Rng rng(mix_seed(seed ^ stream::kMlpInit));
  int fan_in = cfg.input_dim;
  const std::size_t n_layers = cfg.hidden.size() + 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const bool head = l + 1 == n_layers;
    const int fan_out = head ? cfg.output_dim : cfg.hidden[l];
    DenseLayer<T> layer;
    layer.weight = MatX<T>::Zero(fan_out, fan_in);
    layer.bias = VecX<T>::Zero(fan_out);
    if (!head) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  }
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
void Mlp<T>::check_finite() const {
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (!layers_[l].weight.allFinite() || !layers_[l].bias.allFinite())
      fail(ErrorKind::Numeric, "mlp: non-finite parameters in layer " + std::to_string(l + 1));
}

template <typename T>
VecX<T> Mlp<T>::forward(const VecX<T>& y) const {
  require(y.size() == cfg_.input_dim, "mlp_forward: input dimension mismatch");
  check_finite();
  VecX<T> x = y;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    VecX<T> z(L.weight.rows());
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r) {
      T acc = L.bias[r];
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c) acc += L.weight(r, c) * x[c];
      z[r] = acc;
    }
    if (l + 1 < layers_.size())
      for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = leaky_relu(z[r], slope());
    x = std::move(z);
  }
  return x;
}

template <typename T>
MatX<T> Mlp<T>::forward_batch(const MatX<T>& input, Cache& cache) const {
  require(input.rows() == cfg_.input_dim, "mlp_forward: input dimension mismatch");
  cache.pre.resize(layers_.size());
  cache.post.resize(layers_.size());
  cache.post[0] = input;
  const T a = slope();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    MatX<T>& z = cache.pre[l];
    z.noalias() = L.weight * cache.post[l];
    z.colwise() += L.bias;
    if (l + 1 == layers_.size()) break;
    cache.post[l + 1] = z.unaryExpr([a](T v) { return leaky_relu(v, a); });
  }
  return cache.pre.back();
}

template <typename T>
MatX<T> Mlp<T>::backward_batch(const Cache& cache, const MatX<T>& d_output,
                               std::vector<DenseLayer<T>>& grads) const {
  const T a = slope();
  MatX<T> delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads[l].weight.noalias() += delta * cache.post[l].transpose();
    grads[l].bias += delta.rowwise().sum();
    MatX<T> d_in = layers_[l].weight.transpose() * delta;
    if (l == 0) return d_in;
    // Through the activation that produced post[l] from pre[l-1].
    const MatX<T>& z = cache.pre[l - 1];
    delta = d_in.binaryExpr(z, [a](T g, T zz) { return zz > T(0) ? g : a * g; });
  }
  return delta;
}

template <typename T>
std::vector<DenseLayer<T>> Mlp<T>::zeros_like() const {
  std::vector<DenseLayer<T>> out;
  for (const auto& l : layers_)
    out.push_back({MatX<T>::Zero(l.weight.rows(), l.weight.cols()),
                   VecX<T>::Zero(l.bias.size())});
  return out;
}

template <typename T>
VecX<T> assemble_input(const VecX<T>& z_n, const VecX<T>& z_p, const VecX<T>& gamma,
                       int normal_dim, int position_dim, int time_dim) {
  if (z_n.size() != normal_dim || z_p.size() != position_dim || gamma.size() != time_dim)
    fail(ErrorKind::InvalidArgument, "assemble_input: dimension mismatch");
  VecX<T> y(normal_dim + position_dim + time_dim);
  y << z_n, z_p, gamma;
  return y;
}

template class Mlp<float>;
template class Mlp<double>;
template VecX<float> assemble_input(const VecX<float>&, const VecX<float>&,
                                    const VecX<float>&, int, int, int);
template VecX<double> assemble_input(const VecX<double>&, const VecX<double>&,
                                     const VecX<double>&, int, int, int);

}  // namespace neupig
