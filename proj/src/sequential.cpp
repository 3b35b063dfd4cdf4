#include "mrq/sequential.hpp"

#include <cmath>
#include <limits>

namespace mrq::nn {

template <typename T>
ad::Matrix<T> sample_gumbel(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  ad::Matrix<T> g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<T>(-std::log(-std::log(u(rng))));
  return g;
}

template <typename T>
std::vector<T> gumbel_softmax(std::span<const T> logits, std::span<const T> noise, double tau) {
  if (!(tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be positive");
  if (noise.size() != logits.size()) throw ConfigError("gumbel-softmax noise size mismatch");
  std::vector<double> z(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < z.size(); ++i) {
    z[i] = (static_cast<double>(logits[i]) + static_cast<double>(noise[i])) / tau;
    mx = std::max(mx, z[i]);
  }
  double sum = 0.0;
  for (auto& v : z) sum += (v = std::exp(v - mx));
  std::vector<T> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = static_cast<T>(z[i] / sum);
  return out;
}

template <typename T>
std::vector<T> gumbel_softmax_sample(std::span<const T> logits, double tau, std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw ConfigError("gumbel-softmax temperature must be positive");
  ad::Matrix<T> g = sample_gumbel<T>(1, static_cast<Eigen::Index>(logits.size()), rng);
  return gumbel_softmax<T>(logits, std::span<const T>(g.data(), logits.size()), tau);
}

template <typename T>
Sequential<T>::Sequential(std::vector<LayerSpec> specs, std::mt19937_64& rng) : specs_(std::move(specs)) {
  if (specs_.empty()) throw ConfigError("empty layer list");
  int width = -1;
  for (size_t i = 0; i < specs_.size(); ++i) {
    const LayerSpec& s = specs_[i];
    const std::string name = "layer" + std::to_string(i);
    switch (s.kind) {
      case LayerKind::kDense:
        if (width >= 0 && s.in_size != width) {
          throw ConfigError(name + ": in-size " + std::to_string(s.in_size) + " does not match previous width " +
                            std::to_string(width));
        }
        if (width < 0) in_size_ = s.in_size;
        dense_.emplace_back(s.in_size, s.out_size, rng, name);
        width = s.out_size;
        break;
      case LayerKind::kConv2d:
        if (width >= 0 && s.conv.in_size() != width) throw ConfigError(name + ": conv input size mismatch");
        if (width < 0) in_size_ = s.conv.in_size();
        conv_.emplace_back(s.conv, rng, name);
        width = s.conv.out_size();
        break;
      case LayerKind::kActivation:
        if (s.activation == ActivationKind::kGumbelSoftmax && !(s.tau > 0.0)) {
          throw ConfigError(name + ": gumbel-softmax temperature must be positive");
        }
        break;
      case LayerKind::kLayerNorm:
        break;
    }
  }
  if (in_size_ == 0) throw ConfigError("layer list has no sized layer");
}

template <typename T>
ad::Var<T> Sequential<T>::forward(ad::Tape<T>& tape, ad::Var<T> x, bool trainable, const ad::Matrix<T>* gumbel_noise) {
  if (x.cols() != in_size_) {
    throw ConfigError("input size " + std::to_string(x.cols()) + " does not match first layer in-size " +
                      std::to_string(in_size_));
  }
  size_t di = 0, ci = 0;
  for (const LayerSpec& s : specs_) {
    switch (s.kind) {
      case LayerKind::kDense:
        x = dense_[di++](tape, x, trainable);
        break;
      case LayerKind::kConv2d:
        x = conv_[ci++](tape, x, trainable);
        break;
      case LayerKind::kLayerNorm:
        x = ad::layer_norm(x);
        break;
      case LayerKind::kActivation:
        switch (s.activation) {
          case ActivationKind::kElu: x = ad::elu(x); break;
          case ActivationKind::kRelu: x = ad::relu(x); break;
          case ActivationKind::kTanh: x = ad::tanh(x); break;
          case ActivationKind::kGumbelSoftmax: {
            ad::Var<T> noisy = x;
            if (gumbel_noise) noisy = ad::add(x, tape.constant(*gumbel_noise));
            x = ad::softmax(ad::scale(noisy, static_cast<T>(1.0 / s.tau)));
            break;
          }
        }
        break;
    }
  }
  return x;
}

template <typename T>
std::vector<T> Sequential<T>::forward(std::span<const T> input) {
  ad::Tape<T> tape(false);
  ad::Matrix<T> row(1, static_cast<Eigen::Index>(input.size()));
  for (size_t i = 0; i < input.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = input[i];
  ad::Var<T> y = forward(tape, tape.constant(row), false);
  return std::vector<T>(y.value().data(), y.value().data() + y.value().size());
}

template <typename T>
std::vector<ad::Parameter<T>*> Sequential<T>::parameters() {
  std::vector<ad::Parameter<T>*> out;
  size_t di = 0, ci = 0;
  for (const LayerSpec& s : specs_) {
    if (s.kind == LayerKind::kDense) dense_[di++].collect(out);
    if (s.kind == LayerKind::kConv2d) conv_[ci++].collect(out);
  }
  return out;
}

template ad::Matrix<float> sample_gumbel<float>(Eigen::Index, Eigen::Index, std::mt19937_64&);
template ad::Matrix<double> sample_gumbel<double>(Eigen::Index, Eigen::Index, std::mt19937_64&);
template std::vector<float> gumbel_softmax<float>(std::span<const float>, std::span<const float>, double);
template std::vector<double> gumbel_softmax<double>(std::span<const double>, std::span<const double>, double);
template std::vector<float> gumbel_softmax_sample<float>(std::span<const float>, double, std::mt19937_64&);
template std::vector<double> gumbel_softmax_sample<double>(std::span<const double>, double, std::mt19937_64&);
template class Sequential<float>;
template class Sequential<double>;

}  // namespace mrq::nn
