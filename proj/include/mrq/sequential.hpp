#pragma once

#include <random>
#include <span>
#include <vector>

#include "mrq/autodiff.hpp"
#include "mrq/nn.hpp"

namespace mrq::nn {

enum class LayerKind { kDense, kConv2d, kLayerNorm, kActivation };
enum class ActivationKind { kElu, kRelu, kTanh, kGumbelSoftmax };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in_size = 0;
  int out_size = 0;
  ad::ConvGeometry conv;
  ActivationKind activation = ActivationKind::kElu;
  double tau = 10.0;

  static LayerSpec dense(int in, int out) { return {LayerKind::kDense, in, out, {}, ActivationKind::kElu, 10.0}; }
  static LayerSpec conv2d(const ad::ConvGeometry& g) {
    return {LayerKind::kConv2d, g.in_size(), g.out_size(), g, ActivationKind::kElu, 10.0};
  }
  static LayerSpec layer_norm() { return {LayerKind::kLayerNorm, 0, 0, {}, ActivationKind::kElu, 10.0}; }
  static LayerSpec activation_layer(ActivationKind a, double tau = 10.0) {
    return {LayerKind::kActivation, 0, 0, {}, a, tau};
  }
};

// softmax((logits + g) / tau) with g_i = -log(-log(u_i)).
template <typename T>
std::vector<T> gumbel_softmax_sample(std::span<const T> logits, double tau, std::mt19937_64& rng);

// Same operator with caller-supplied Gumbel noise.
template <typename T>
std::vector<T> gumbel_softmax(std::span<const T> logits, std::span<const T> noise, double tau);

template <typename T>
ad::Matrix<T> sample_gumbel(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

// Layers applied in order; weights are Xavier-uniform, biases zero.
template <typename T>
class Sequential {
 public:
  Sequential(std::vector<LayerSpec> specs, std::mt19937_64& rng);

  // `gumbel_noise` supplies the noise for a Gumbel-Softmax layer; zero noise when null.
  ad::Var<T> forward(ad::Tape<T>& tape, ad::Var<T> x, bool trainable, const ad::Matrix<T>* gumbel_noise = nullptr);
  std::vector<T> forward(std::span<const T> input);

  std::vector<ad::Parameter<T>*> parameters();
  const std::vector<LayerSpec>& specs() const { return specs_; }
  int in_size() const { return in_size_; }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Dense<T>> dense_;
  std::vector<Conv2d<T>> conv_;
  int in_size_ = 0;
};

}  // namespace mrq::nn
