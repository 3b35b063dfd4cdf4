#pragma once

// Layers and the five networks used by the agent: state encoder f,
// state-action encoder g, MDP predictor m, value Q and policy pi.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrq/autodiff.hpp"
#include "mrq/env_spec.hpp"

namespace mrq::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// Fills `m` from U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void xavier_uniform(Matrix<T>& m, int fan_in, int fan_out, std::mt19937_64& rng);

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, std::mt19937_64& rng, const std::string& name);

  Var<T> operator()(Tape<T>& tape, Var<T> x, bool trainable);
  void collect(std::vector<Parameter<T>*>& out) { out.push_back(&weight); out.push_back(&bias); }

  int in_size() const { return static_cast<int>(weight.value.cols()); }
  int out_size() const { return static_cast<int>(weight.value.rows()); }

  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;    // [1, out]
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const ad::ConvGeometry& geo, std::mt19937_64& rng, const std::string& name);

  Var<T> operator()(Tape<T>& tape, Var<T> x, bool trainable);
  void collect(std::vector<Parameter<T>*>& out) { out.push_back(&weight); out.push_back(&bias); }

  ad::ConvGeometry geometry;
  Parameter<T> weight;  // [Cout, Cin*k*k]
  Parameter<T> bias;    // [1, Cout]
};

enum class Activation { kElu, kRelu };

template <typename T>
Var<T> activate(Var<T> x, Activation a) {
  return a == Activation::kElu ? ad::elu(x) : ad::relu(x);
}

// Layer norm over the feature dimension followed by the activation.
template <typename T>
Var<T> ln_activ(Var<T> x, Activation a) {
  return activate(ad::layer_norm(x), a);
}

// Four stride-(2,2,2,1) 3x3 convolutions with 32 channels for pixel input.
std::vector<ad::ConvGeometry> pixel_conv_stack(int channels, int height, int width);

struct EncoderDims {
  int zs_dim = 512;
  int za_dim = 256;
  int zsa_dim = 512;
  int hidden = 512;
};

template <typename T>
class StateEncoder {
 public:
  StateEncoder() = default;
  StateEncoder(const EnvSpec& spec, const EncoderDims& dims, std::mt19937_64& rng);

  // obs: [B, obs_size]; pixel inputs are raw byte values and are mapped to x/255 - 0.5.
  Var<T> forward(Tape<T>& tape, const Matrix<T>& obs, bool trainable);
  void collect(std::vector<Parameter<T>*>& out);

  bool pixel() const { return pixel_; }
  int obs_size() const { return obs_size_; }

 private:
  bool pixel_ = false;
  int obs_size_ = 0;
  std::vector<Conv2d<T>> convs_;
  std::vector<Dense<T>> mlp_;
};

template <typename T>
class StateActionEncoder {
 public:
  StateActionEncoder() = default;
  StateActionEncoder(int action_dim, const EncoderDims& dims, std::mt19937_64& rng);

  Var<T> forward(Tape<T>& tape, Var<T> zs, Var<T> action, bool trainable);
  void collect(std::vector<Parameter<T>*>& out);

 private:
  Dense<T> za_, zsa1_, zsa2_, zsa3_;
};

struct ModelOutputs {
  int dynamics = 512;
  int reward = 65;
  int terminal = 1;
  int total() const { return dynamics + reward + terminal; }
};

template <typename T>
struct Prediction {
  Var<T> next_embedding;
  Var<T> reward;
  Var<T> terminal;
};

// Linear map z_sa -> [dynamics | reward | terminal]. With `nonlinear`, each
// component gets its own two-layer network instead.
template <typename T>
class MdpPredictor {
 public:
  MdpPredictor() = default;
  MdpPredictor(int zsa_dim, const ModelOutputs& outputs, bool nonlinear, int hidden, std::mt19937_64& rng);

  Prediction<T> forward(Tape<T>& tape, Var<T> zsa, bool trainable);
  void collect(std::vector<Parameter<T>*>& out);

  bool nonlinear() const { return nonlinear_; }
  const ModelOutputs& outputs() const { return outputs_; }

 private:
  ModelOutputs outputs_;
  bool nonlinear_ = false;
  Dense<T> linear_;
  std::vector<Dense<T>> heads_;  // nonlinear: (hidden, out) pairs for dynamics, reward, terminal
};

// f, g and m trained end-to-end as a single unit.
template <typename T>
struct Encoder {
  StateEncoder<T> state;
  StateActionEncoder<T> state_action;
  MdpPredictor<T> model;

  std::vector<Parameter<T>*> parameters();
};

template <typename T>
class ValueNetwork {
 public:
  ValueNetwork() = default;
  ValueNetwork(int zsa_dim, int hidden, bool linear, std::mt19937_64& rng, const std::string& name);

  Var<T> forward(Tape<T>& tape, Var<T> zsa, bool trainable);
  std::vector<Parameter<T>*> parameters();
  bool linear() const { return layers_.size() == 1; }

 private:
  std::vector<Dense<T>> layers_;
};

// Returns pre-activations z_pi; the agent applies Tanh or Gumbel-Softmax.
template <typename T>
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(int zs_dim, int hidden, int action_dim, std::mt19937_64& rng);

  Var<T> forward(Tape<T>& tape, Var<T> zs, bool trainable);
  std::vector<Parameter<T>*> parameters();

 private:
  Dense<T> l1_, l2_, l3_;
};

// Copies parameter values elementwise; both sides must come from the same architecture.
template <typename T>
void copy_parameters(const std::vector<Parameter<T>*>& from, const std::vector<Parameter<T>*>& to);

// FNV-1a over the raw bytes of every parameter value.
template <typename T>
std::uint64_t hash_parameters(const std::vector<Parameter<T>*>& params);

template <typename T>
std::size_t count_parameters(const std::vector<Parameter<T>*>& params);

}  // namespace mrq::nn
