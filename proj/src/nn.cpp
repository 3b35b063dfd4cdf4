#include "mrq/nn.hpp"

#include <cmath>
#include <cstring>

namespace mrq::nn {

template <typename T>
void xavier_uniform(Matrix<T>& m, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
Dense<T>::Dense(int in, int out, std::mt19937_64& rng, const std::string& name) {
  if (in <= 0 || out <= 0) throw ConfigError("dense layer '" + name + "' needs positive sizes");
  weight.name = name + ".weight";
  weight.value.resize(out, in);
  xavier_uniform(weight.value, in, out, rng);
  bias.name = name + ".bias";
  bias.value = Matrix<T>::Zero(1, out);
}

template <typename T>
Var<T> Dense<T>::operator()(Tape<T>& tape, Var<T> x, bool trainable) {
  return ad::linear(x, tape.parameter(weight, trainable), tape.parameter(bias, trainable));
}

template <typename T>
Conv2d<T>::Conv2d(const ad::ConvGeometry& geo, std::mt19937_64& rng, const std::string& name) : geometry(geo) {
  weight.name = name + ".weight";
  weight.value.resize(geo.out_channels, geo.patch_size());
  xavier_uniform(weight.value, geo.patch_size(), geo.out_channels * geo.kernel * geo.kernel, rng);
  bias.name = name + ".bias";
  bias.value = Matrix<T>::Zero(1, geo.out_channels);
}

template <typename T>
Var<T> Conv2d<T>::operator()(Tape<T>& tape, Var<T> x, bool trainable) {
  return ad::conv2d(x, tape.parameter(weight, trainable), tape.parameter(bias, trainable), geometry);
}

std::vector<ad::ConvGeometry> pixel_conv_stack(int channels, int height, int width) {
  std::vector<ad::ConvGeometry> stack;
  const int strides[4] = {2, 2, 2, 1};
  int c = channels, h = height, w = width;
  for (int s : strides) {
    ad::ConvGeometry g;
    g.in_channels = c;
    g.in_height = h;
    g.in_width = w;
    g.out_channels = 32;
    g.kernel = 3;
    g.stride = s;
    if (g.out_height() < 1 || g.out_width() < 1) {
      throw ConfigError("pixel input " + std::to_string(height) + "x" + std::to_string(width) +
                        " is too small for the convolution stack");
    }
    stack.push_back(g);
    c = g.out_channels;
    h = g.out_height();
    w = g.out_width();
  }
  return stack;
}

template <typename T>
StateEncoder<T>::StateEncoder(const EnvSpec& spec, const EncoderDims& dims, std::mt19937_64& rng)
    : pixel_(spec.pixel()), obs_size_(spec.obs_size()) {
  if (pixel_) {
    if (spec.obs_shape.size() != 3) throw ConfigError("pixel observations must be [C, H, W]");
    auto stack = pixel_conv_stack(spec.obs_shape[0], spec.obs_shape[1], spec.obs_shape[2]);
    for (size_t i = 0; i < stack.size(); ++i) convs_.emplace_back(stack[i], rng, "zs_cnn" + std::to_string(i + 1));
    mlp_.emplace_back(stack.back().out_size(), dims.zs_dim, rng, "zs_lin");
  } else {
    mlp_.emplace_back(obs_size_, dims.hidden, rng, "zs_mlp1");
    mlp_.emplace_back(dims.hidden, dims.hidden, rng, "zs_mlp2");
    mlp_.emplace_back(dims.hidden, dims.zs_dim, rng, "zs_mlp3");
  }
}

template <typename T>
Var<T> StateEncoder<T>::forward(Tape<T>& tape, const Matrix<T>& obs, bool trainable) {
  if (obs.cols() != obs_size_) {
    throw ConfigError("state encoder expects " + std::to_string(obs_size_) + " inputs, got " +
                      std::to_string(obs.cols()));
  }
  if (!obs.allFinite()) throw NumericError("non-finite value in encoder input");
  if (pixel_) {
    Var<T> x = tape.constant((obs.array() / T(255) - T(0.5)).matrix());
    for (auto& conv : convs_) x = ad::elu(conv(tape, x, trainable));
    return ln_activ(mlp_[0](tape, x, trainable), Activation::kElu);
  }
  Var<T> x = tape.constant(obs);
  for (auto& layer : mlp_) x = ln_activ(layer(tape, x, trainable), Activation::kElu);
  return x;
}

template <typename T>
void StateEncoder<T>::collect(std::vector<Parameter<T>*>& out) {
  for (auto& c : convs_) c.collect(out);
  for (auto& d : mlp_) d.collect(out);
}

template <typename T>
StateActionEncoder<T>::StateActionEncoder(int action_dim, const EncoderDims& dims, std::mt19937_64& rng)
    : za_(action_dim, dims.za_dim, rng, "za"),
      zsa1_(dims.zs_dim + dims.za_dim, dims.hidden, rng, "zsa1"),
      zsa2_(dims.hidden, dims.hidden, rng, "zsa2"),
      zsa3_(dims.hidden, dims.zsa_dim, rng, "zsa3") {}

template <typename T>
Var<T> StateActionEncoder<T>::forward(Tape<T>& tape, Var<T> zs, Var<T> action, bool trainable) {
  Var<T> za = ad::elu(za_(tape, action, trainable));
  Var<T> x = ad::concat_cols(zs, za);
  x = ln_activ(zsa1_(tape, x, trainable), Activation::kElu);
  x = ln_activ(zsa2_(tape, x, trainable), Activation::kElu);
  return zsa3_(tape, x, trainable);
}

template <typename T>
void StateActionEncoder<T>::collect(std::vector<Parameter<T>*>& out) {
  za_.collect(out);
  zsa1_.collect(out);
  zsa2_.collect(out);
  zsa3_.collect(out);
}

template <typename T>
MdpPredictor<T>::MdpPredictor(int zsa_dim, const ModelOutputs& outputs, bool nonlinear, int hidden,
                              std::mt19937_64& rng)
    : outputs_(outputs), nonlinear_(nonlinear) {
  if (!nonlinear_) {
    linear_ = Dense<T>(zsa_dim, outputs.total(), rng, "model");
    return;
  }
  const int sizes[3] = {outputs.dynamics, outputs.reward, outputs.terminal};
  const char* names[3] = {"model_dyn", "model_reward", "model_term"};
  for (int i = 0; i < 3; ++i) {
    heads_.emplace_back(zsa_dim, hidden, rng, std::string(names[i]) + "1");
    heads_.emplace_back(hidden, sizes[i], rng, std::string(names[i]) + "2");
  }
}

template <typename T>
Prediction<T> MdpPredictor<T>::forward(Tape<T>& tape, Var<T> zsa, bool trainable) {
  if (!nonlinear_) {
    Var<T> out = linear_(tape, zsa, trainable);
    return {ad::slice_cols(out, 0, outputs_.dynamics), ad::slice_cols(out, outputs_.dynamics, outputs_.reward),
            ad::slice_cols(out, outputs_.dynamics + outputs_.reward, outputs_.terminal)};
  }
  Var<T> parts[3];
  for (int i = 0; i < 3; ++i) {
    Var<T> h = ln_activ(heads_[2 * i](tape, zsa, trainable), Activation::kElu);
    parts[i] = heads_[2 * i + 1](tape, h, trainable);
  }
  return {parts[0], parts[1], parts[2]};
}

template <typename T>
void MdpPredictor<T>::collect(std::vector<Parameter<T>*>& out) {
  if (!nonlinear_) {
    linear_.collect(out);
    return;
  }
  for (auto& h : heads_) h.collect(out);
}

template <typename T>
std::vector<Parameter<T>*> Encoder<T>::parameters() {
  std::vector<Parameter<T>*> out;
  state.collect(out);
  state_action.collect(out);
  model.collect(out);
  return out;
}

template <typename T>
ValueNetwork<T>::ValueNetwork(int zsa_dim, int hidden, bool linear, std::mt19937_64& rng, const std::string& name) {
  if (linear) {
    layers_.emplace_back(zsa_dim, 1, rng, name + ".l1");
    return;
  }
  layers_.emplace_back(zsa_dim, hidden, rng, name + ".l1");
  layers_.emplace_back(hidden, hidden, rng, name + ".l2");
  layers_.emplace_back(hidden, hidden, rng, name + ".l3");
  layers_.emplace_back(hidden, 1, rng, name + ".l4");
}

template <typename T>
Var<T> ValueNetwork<T>::forward(Tape<T>& tape, Var<T> zsa, bool trainable) {
  Var<T> x = zsa;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) x = ln_activ(layers_[i](tape, x, trainable), Activation::kElu);
  return layers_.back()(tape, x, trainable);
}

template <typename T>
std::vector<Parameter<T>*> ValueNetwork<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_) l.collect(out);
  return out;
}

template <typename T>
PolicyNetwork<T>::PolicyNetwork(int zs_dim, int hidden, int action_dim, std::mt19937_64& rng)
    : l1_(zs_dim, hidden, rng, "policy.l1"), l2_(hidden, hidden, rng, "policy.l2"), l3_(hidden, action_dim, rng, "policy.l3") {}

template <typename T>
Var<T> PolicyNetwork<T>::forward(Tape<T>& tape, Var<T> zs, bool trainable) {
  Var<T> x = ln_activ(l1_(tape, zs, trainable), Activation::kRelu);
  x = ln_activ(l2_(tape, x, trainable), Activation::kRelu);
  return l3_(tape, x, trainable);
}

template <typename T>
std::vector<Parameter<T>*> PolicyNetwork<T>::parameters() {
  std::vector<Parameter<T>*> out;
  l1_.collect(out);
  l2_.collect(out);
  l3_.collect(out);
  return out;
}

template <typename T>
void copy_parameters(const std::vector<Parameter<T>*>& from, const std::vector<Parameter<T>*>& to) {
  if (from.size() != to.size()) throw ContractViolation("copy_parameters: architecture mismatch");
  for (size_t i = 0; i < from.size(); ++i) {
    if (from[i]->value.rows() != to[i]->value.rows() || from[i]->value.cols() != to[i]->value.cols()) {
      throw ContractViolation("copy_parameters: shape mismatch at " + from[i]->name);
    }
    to[i]->value = from[i]->value;
  }
}

template <typename T>
std::uint64_t hash_parameters(const std::vector<Parameter<T>*>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const size_t n = static_cast<size_t>(p->value.size()) * sizeof(T);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

template <typename T>
std::size_t count_parameters(const std::vector<Parameter<T>*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

#define MRQ_INSTANTIATE_NN(T)                                                                        \
  template void xavier_uniform<T>(Matrix<T>&, int, int, std::mt19937_64&);                          \
  template class Dense<T>;                                                                           \
  template class Conv2d<T>;                                                                          \
  template class StateEncoder<T>;                                                                    \
  template class StateActionEncoder<T>;                                                              \
  template class MdpPredictor<T>;                                                                    \
  template struct Encoder<T>;                                                                        \
  template class ValueNetwork<T>;                                                                    \
  template class PolicyNetwork<T>;                                                                   \
  template void copy_parameters<T>(const std::vector<Parameter<T>*>&, const std::vector<Parameter<T>*>&); \
  template std::uint64_t hash_parameters<T>(const std::vector<Parameter<T>*>&);                      \
  template std::size_t count_parameters<T>(const std::vector<Parameter<T>*>&);

MRQ_INSTANTIATE_NN(float)
MRQ_INSTANTIATE_NN(double)

}  // namespace mrq::nn
