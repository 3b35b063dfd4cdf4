#include "mrq/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrq/errors.hpp"
#include "mrq/sequential.hpp"

namespace mrq {

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {
      "linear-value-function", "dynamics-target-sa", "no-target-encoder", "revert",
      "non-linear-model",      "mse-reward-loss",    "no-reward-scaling", "no-min",
      "no-lap",                "no-mr",              "one-step-return",   "no-unroll"};
  return names;
}

std::string to_string(Ablation a) { return ablation_names()[static_cast<size_t>(a)]; }

Ablation parse_ablation(const std::string& name) {
  const auto& names = ablation_names();
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Ablation>(i);
  }
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown ablation '" + name + "' (valid: " + valid + ")");
}

void AgentConfig::apply(Ablation a) {
  if (std::find(ablations.begin(), ablations.end(), a) != ablations.end()) return;
  ablations.push_back(a);
  switch (a) {
    case Ablation::kLinearValueFunction: linear_value = true; break;
    case Ablation::kDynamicsTargetSA: dynamics_target = DynamicsTarget::kTargetStateAction; break;
    case Ablation::kNoTargetEncoder: dynamics_target = DynamicsTarget::kOnlineState; break;
    case Ablation::kRevert:
      linear_value = true;
      dynamics_target = DynamicsTarget::kOnlineStateAction;
      break;
    case Ablation::kNonLinearModel: nonlinear_model = true; break;
    case Ablation::kMseRewardLoss: mse_reward = true; break;
    case Ablation::kNoRewardScaling: reward_scaling = false; break;
    case Ablation::kNoMin: min_target = false; break;
    case Ablation::kNoLap:
      prioritized = false;
      huber = false;
      break;
    case Ablation::kNoMr: model_based_repr = false; break;
    case Ablation::kOneStepReturn: q_horizon = 1; break;
    case Ablation::kNoUnroll: enc_horizon = 1; break;
  }
}

void AgentConfig::validate() const {
  auto req = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  req(gamma > 0.0 && gamma < 1.0, "agent.gamma must lie in (0, 1)");
  req(batch_size >= 1, "agent.batch_size must be >= 1");
  req(target_update_freq >= 1, "agent.target_update_freq must be >= 1");
  req(buffer_capacity >= 1, "agent.buffer_capacity must be >= 1");
  req(replay_ratio >= 1, "agent.replay_ratio must be >= 1");
  req(enc_horizon >= 1, "agent.enc_horizon must be >= 1");
  req(q_horizon >= 1, "agent.q_horizon must be >= 1");
  req(lambda_dynamics >= 0 && lambda_reward >= 0 && lambda_terminal >= 0 && lambda_preactiv >= 0,
      "loss weights must be nonnegative");
  req(target_noise >= 0 && noise_clip >= 0 && exploration_noise >= 0, "noise scales must be nonnegative");
  req(initial_random_steps >= 0, "agent.initial_random_steps must be >= 0");
  req(lap_alpha > 0, "agent.lap_alpha must be positive");
  req(min_priority > 0, "agent.min_priority must be positive");
  req(encoder_optim.lr > 0 && value_optim.lr > 0 && policy_optim.lr > 0, "learning rates must be positive");
  req(zs_dim >= 1 && za_dim >= 1 && zsa_dim >= 1 && enc_hidden >= 1 && value_hidden >= 1 && policy_hidden >= 1,
      "network widths must be positive");
  req(num_bins >= 2, "agent.num_bins must be >= 2");
  req(reward_range > 0, "agent.reward_range must be positive");
  req(gumbel_tau > 0, "agent.gumbel_tau must be positive");
  req(reward_scale_floor > 0, "agent.reward_scale_floor must be positive");
  const bool sa = dynamics_target == DynamicsTarget::kTargetStateAction ||
                  dynamics_target == DynamicsTarget::kOnlineStateAction;
  req(!sa || zs_dim == zsa_dim, "state-action dynamics targets need agent.zs_dim == agent.zsa_dim");
}

std::vector<float> perturb_action(std::span<const double> policy_out, std::span<const double> eps, double clip,
                                  bool discrete) {
  if (policy_out.size() != eps.size()) throw ContractViolation("perturb_action: size mismatch");
  std::vector<double> a(policy_out.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] = policy_out[i] + std::clamp(eps[i], -clip, clip);
  std::vector<float> out(a.size(), 0.0f);
  if (discrete) {
    out[static_cast<size_t>(std::max_element(a.begin(), a.end()) - a.begin())] = 1.0f;
  } else {
    for (size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(std::clamp(a[i], -1.0, 1.0));
  }
  return out;
}

double scaled_value_target(std::span<const double> rewards, int valid_length, bool ends_terminal, double gamma,
                           double r_bar, double r_bar_target, double q_next) {
  if (valid_length < 1 || static_cast<size_t>(valid_length) > rewards.size()) {
    throw ContractViolation("value target needs 1 <= valid_length <= horizon");
  }
  double ret = 0.0, disc = 1.0;
  for (int t = 0; t < valid_length; ++t) {
    ret += disc * rewards[static_cast<size_t>(t)];
    disc *= gamma;
  }
  if (!ends_terminal) ret += disc * r_bar_target * q_next;
  return ret / r_bar;
}

namespace {

template <typename T>
int argmax_row(const ad::Matrix<T>& m, Eigen::Index r) {
  Eigen::Index i;
  m.row(r).maxCoeff(&i);
  return static_cast<int>(i);
}

template <typename T>
ad::Matrix<T> to_row(std::span<const float> v) {
  ad::Matrix<T> m(1, static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = static_cast<T>(v[i]);
  return m;
}

}  // namespace

template <typename T>
Agent<T>::Agent(const EnvSpec& spec, const AgentConfig& cfg, std::uint64_t seed)
    : spec_(spec), cfg_(cfg), codec_(cfg.num_bins, cfg.reward_range), rng_(seed) {
  cfg_.validate();
  const bool sa = cfg_.dynamics_target == DynamicsTarget::kTargetStateAction ||
                  cfg_.dynamics_target == DynamicsTarget::kOnlineStateAction;
  nn::ModelOutputs outputs;
  outputs.dynamics = sa ? cfg_.zsa_dim : cfg_.zs_dim;
  outputs.reward = cfg_.mse_reward ? 1 : cfg_.num_bins;
  outputs.terminal = 1;
  encoder_ = make_encoder<T>(spec_, cfg_.encoder_dims(), outputs, cfg_.nonlinear_model, rng_);
  encoder_target_ = encoder_;
  q1_ = nn::ValueNetwork<T>(cfg_.zsa_dim, cfg_.value_hidden, cfg_.linear_value, rng_, "value1");
  q2_ = nn::ValueNetwork<T>(cfg_.zsa_dim, cfg_.value_hidden, cfg_.linear_value, rng_, "value2");
  q1_target_ = q1_;
  q2_target_ = q2_;
  policy_ = nn::PolicyNetwork<T>(cfg_.zs_dim, cfg_.policy_hidden, spec_.action_dim, rng_);
  policy_target_ = policy_;
  encoder_opt_ = optim::AdamW<T>(encoder_.parameters(), cfg_.encoder_optim);
  value_opt_ = optim::AdamW<T>(value_parameters(), cfg_.value_optim);
  policy_opt_ = optim::AdamW<T>(policy_.parameters(), cfg_.policy_optim);
}

template <typename T>
std::vector<ad::Parameter<T>*> Agent<T>::value_parameters() {
  auto out = q1_.parameters();
  for (auto* p : q2_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<ad::Parameter<T>*> Agent<T>::online_parameters() {
  auto out = encoder_.parameters();
  for (auto* p : value_parameters()) out.push_back(p);
  for (auto* p : policy_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<ad::Parameter<T>*> Agent<T>::target_parameters() {
  auto out = encoder_target_.parameters();
  for (auto* p : q1_target_.parameters()) out.push_back(p);
  for (auto* p : q2_target_.parameters()) out.push_back(p);
  for (auto* p : policy_target_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
typename Agent<T>::Matrix Agent<T>::noise(Eigen::Index rows, Eigen::Index cols, double sigma, double clip) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double scale = spec_.discrete() ? 1.0 : (spec_.action_high - spec_.action_low) / 2.0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(std::clamp(sigma * scale * n(rng_), -clip * scale, clip * scale));
  }
  return m;
}

template <typename T>
typename Agent<T>::Matrix Agent<T>::encode_states(const Matrix& obs, nn::Encoder<T>& enc) {
  ad::Tape<T> tape(false);
  return enc.state.forward(tape, obs, false).value();
}

template <typename T>
std::vector<float> Agent<T>::random_action() {
  std::vector<float> a(static_cast<size_t>(spec_.action_dim), 0.0f);
  if (spec_.discrete()) {
    std::uniform_int_distribution<int> pick(0, spec_.action_dim - 1);
    a[static_cast<size_t>(pick(rng_))] = 1.0f;
  } else {
    std::uniform_real_distribution<double> u(spec_.action_low, spec_.action_high);
    for (auto& x : a) x = static_cast<float>(u(rng_));
  }
  return a;
}

template <typename T>
ad::Var<T> Agent<T>::policy_activation(ad::Var<T> preact, const Matrix* gumbel_noise) {
  if (!spec_.discrete()) {
    ++counters_.continuous_head_calls;
    return ad::tanh(preact);
  }
  ++counters_.discrete_head_calls;
  ad::Var<T> x = preact;
  if (gumbel_noise) x = ad::add(x, preact.tape().constant(*gumbel_noise));
  return ad::softmax(ad::scale(x, static_cast<T>(1.0 / cfg_.gumbel_tau)));
}

template <typename T>
std::vector<float> Agent<T>::select_action(std::span<const float> obs, bool explore) {
  ad::Tape<T> tape(false);
  ad::Var<T> zs = encoder_.state.forward(tape, to_row<T>(obs), false);
  ad::Var<T> z = policy_.forward(tape, zs, false);
  const Eigen::Index A = spec_.action_dim;
  std::vector<float> a(static_cast<size_t>(A), 0.0f);
  if (!explore) {
    if (spec_.discrete()) {
      a[static_cast<size_t>(argmax_row(z.value(), 0))] = 1.0f;
    } else {
      for (Eigen::Index i = 0; i < A; ++i) a[static_cast<size_t>(i)] = static_cast<float>(std::tanh(z.value()(0, i)));
    }
    return a;
  }
  Matrix g;
  if (spec_.discrete()) g = nn::sample_gumbel<T>(1, A, rng_);
  Matrix out = policy_activation(z, spec_.discrete() ? &g : nullptr).value();
  if (spec_.discrete() && cfg_.discrete_noise == DiscreteNoise::kOneHot) {
    const int k = argmax_row(out, 0);
    out.setZero();
    out(0, k) = T(1);
  }
  const Matrix eps = noise(1, A, cfg_.exploration_noise, INFINITY);
  std::vector<double> po(static_cast<size_t>(A)), ep(static_cast<size_t>(A));
  for (Eigen::Index i = 0; i < A; ++i) {
    po[static_cast<size_t>(i)] = static_cast<double>(out(0, i));
    ep[static_cast<size_t>(i)] = static_cast<double>(eps(0, i));
  }
  return perturb_action(po, ep, INFINITY, spec_.discrete());
}

template <typename T>
std::vector<float> Agent<T>::act(std::span<const float> obs, long env_step, bool explore) {
  if (explore && env_step < cfg_.initial_random_steps) return random_action();
  return select_action(obs, explore);
}

template <typename T>
typename Agent<T>::Matrix Agent<T>::target_action(const Matrix& next_obs, const Matrix* eps, const Matrix* gumbel_noise) {
  ad::Tape<T> tape(false);
  ad::Var<T> zs = encoder_target_.state.forward(tape, next_obs, false);
  ad::Var<T> z = policy_target_.forward(tape, zs, false);
  const Eigen::Index B = z.rows(), A = z.cols();
  Matrix g;
  if (spec_.discrete() && !gumbel_noise) {
    g = nn::sample_gumbel<T>(B, A, rng_);
    gumbel_noise = &g;
  }
  Matrix out = policy_activation(z, gumbel_noise).value();
  Matrix e;
  if (!eps) {
    e = noise(B, A, cfg_.target_noise, cfg_.noise_clip);
    eps = &e;
  }
  const double scale = spec_.discrete() ? 1.0 : (spec_.action_high - spec_.action_low) / 2.0;
  Matrix actions(B, A);
  std::vector<double> po(static_cast<size_t>(A)), ep(static_cast<size_t>(A));
  for (Eigen::Index b = 0; b < B; ++b) {
    if (spec_.discrete() && cfg_.discrete_noise == DiscreteNoise::kOneHot) {
      const int k = argmax_row(out, b);
      out.row(b).setZero();
      out(b, k) = T(1);
    }
    for (Eigen::Index i = 0; i < A; ++i) {
      po[static_cast<size_t>(i)] = static_cast<double>(out(b, i));
      ep[static_cast<size_t>(i)] = static_cast<double>((*eps)(b, i));
    }
    const auto a = perturb_action(po, ep, cfg_.noise_clip * scale, spec_.discrete());
    for (Eigen::Index i = 0; i < A; ++i) actions(b, i) = static_cast<T>(a[static_cast<size_t>(i)]);
  }
  return actions;
}

template <typename T>
typename Agent<T>::Matrix Agent<T>::value_target(const SegmentBatch& batch, const Matrix* eps, const Matrix* gumbel_noise) {
  const Eigen::Index B = batch.batch_size;
  const int obs = static_cast<int>(batch.states[0].cols());
  Matrix boot(B, obs);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int L = batch.valid_length[static_cast<size_t>(b)];
    boot.row(b) = batch.states[static_cast<size_t>(L)].row(b).template cast<T>();
  }
  const Matrix a_next = target_action(boot, eps, gumbel_noise);
  ad::Tape<T> tape(false);
  ad::Var<T> zs = encoder_target_.state.forward(tape, boot, false);
  ad::Var<T> zsa = encoder_target_.state_action.forward(tape, zs, tape.constant(a_next), false);
  const Matrix q1 = q1_target_.forward(tape, zsa, false).value();
  const Matrix q2 = q2_target_.forward(tape, zsa, false).value();
  const double rb = cfg_.reward_scaling ? r_bar_ : 1.0;
  const double rbt = cfg_.reward_scaling ? r_bar_target_ : 1.0;
  Matrix y(B, 1);
  std::vector<double> rewards(static_cast<size_t>(batch.horizon));
  for (Eigen::Index b = 0; b < B; ++b) {
    const int L = batch.valid_length[static_cast<size_t>(b)];
    for (int t = 0; t < batch.horizon; ++t) rewards[static_cast<size_t>(t)] = batch.rewards(b, t);
    const double a = static_cast<double>(q1(b, 0)), c = static_cast<double>(q2(b, 0));
    const double qn = cfg_.min_target ? std::min(a, c) : 0.5 * (a + c);
    y(b, 0) = static_cast<T>(
        scaled_value_target(rewards, L, batch.terminals(b, L - 1) > 0.5, cfg_.gamma, rb, rbt, qn));
  }
  if (!y.allFinite()) {
    throw NumericError("value target is not finite (r_bar " + std::to_string(rb) + ", r_bar' " + std::to_string(rbt) +
                       ", max |Q'| " + std::to_string(static_cast<double>(q1.cwiseAbs().maxCoeff())) + ")");
  }
  return y;
}

template <typename T>
ValueLoss<T> Agent<T>::value_loss(ad::Tape<T>& tape, const SegmentBatch& batch, const Matrix& targets) {
  const bool train_encoder = !cfg_.model_based_repr;
  ad::Var<T> zs = encoder_.state.forward(tape, batch.states[0].template cast<T>(), train_encoder);
  ad::Var<T> zsa =
      encoder_.state_action.forward(tape, zs, tape.constant(batch.actions[0].template cast<T>()), train_encoder);
  ad::Var<T> y = tape.constant(targets);
  ValueLoss<T> out;
  Matrix deltas[2];
  ad::Var<T> total;
  for (int i = 0; i < 2; ++i) {
    ad::Var<T> q = value(i).forward(tape, zsa, true);
    ad::Var<T> d = ad::sub(q, y);
    deltas[i] = d.value();
    ad::Var<T> l = ad::mean_all(cfg_.huber ? ad::huber(d) : ad::square(d));
    total = i == 0 ? l : ad::add(total, l);
  }
  out.loss = total;
  out.td_abs.resize(static_cast<size_t>(targets.rows()));
  for (Eigen::Index b = 0; b < targets.rows(); ++b) {
    const double d1 = std::abs(static_cast<double>(deltas[0](b, 0)));
    const double d2 = std::abs(static_cast<double>(deltas[1](b, 0)));
    out.td_abs[static_cast<size_t>(b)] = cfg_.priority_reduction == PriorityReduction::kMean ? 0.5 * (d1 + d2)
                                                                                             : std::min(d1, d2);
  }
  if (!std::isfinite(static_cast<double>(total.value()(0, 0)))) {
    throw NumericError("value loss is not finite (r_bar " + std::to_string(r_bar_) + ", max |y| " +
                       std::to_string(static_cast<double>(targets.cwiseAbs().maxCoeff())) + ")");
  }
  return out;
}

template <typename T>
ad::Var<T> Agent<T>::policy_loss(ad::Tape<T>& tape, const Matrix& states, const Matrix* gumbel_noise) {
  ad::Var<T> zs = tape.constant(encode_states(states, encoder_));
  ad::Var<T> z = policy_.forward(tape, zs, true);
  Matrix g;
  if (spec_.discrete() && !gumbel_noise) {
    g = nn::sample_gumbel<T>(z.rows(), z.cols(), rng_);
    gumbel_noise = &g;
  }
  ad::Var<T> a = policy_activation(z, gumbel_noise);
  ad::Var<T> zsa = encoder_.state_action.forward(tape, zs, a, false);
  ad::Var<T> q = ad::add(q1_.forward(tape, zsa, false), q2_.forward(tape, zsa, false));
  ad::Var<T> loss = ad::add(ad::scale(ad::mean_all(q), T(-0.5)),
                            ad::scale(ad::mean_all(ad::square(z)), static_cast<T>(cfg_.lambda_preactiv)));
  if (!std::isfinite(static_cast<double>(loss.value()(0, 0)))) throw NumericError("policy loss is not finite");
  return loss;
}

template <typename T>
std::vector<typename Agent<T>::Matrix> Agent<T>::next_actions_for(const SegmentBatch& batch) {
  std::vector<Matrix> out;
  for (int t = 1; t <= batch.horizon; ++t) {
    ad::Tape<T> tape(false);
    ad::Var<T> zs = encoder_target_.state.forward(tape, batch.states[static_cast<size_t>(t)].template cast<T>(), false);
    const Matrix z = policy_target_.forward(tape, zs, false).value();
    Matrix a(z.rows(), z.cols());
    if (spec_.discrete()) {
      a.setZero();
      for (Eigen::Index b = 0; b < z.rows(); ++b) a(b, argmax_row(z, b)) = T(1);
    } else {
      a = z.array().tanh().matrix();
    }
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
EncoderLoss<T> Agent<T>::encoder_loss(ad::Tape<T>& tape, const SegmentBatch& batch, bool terminal_seen) {
  EncoderLossOptions opts;
  opts.lambda_reward = cfg_.lambda_reward;
  opts.lambda_dynamics = cfg_.lambda_dynamics;
  opts.lambda_terminal = cfg_.lambda_terminal;
  opts.terminal_seen = terminal_seen;
  opts.target = cfg_.dynamics_target;
  opts.mse_reward = cfg_.mse_reward;
  const bool sa = opts.target == DynamicsTarget::kTargetStateAction ||
                  opts.target == DynamicsTarget::kOnlineStateAction;
  if (sa) {
    const auto next = next_actions_for(batch);
    return mrq::encoder_loss<T>(tape, encoder_, encoder_target_, batch, codec_, opts, &next);
  }
  return mrq::encoder_loss<T>(tape, encoder_, encoder_target_, batch, codec_, opts, nullptr);
}

template <typename T>
double Agent<T>::reward_scale(const ReplayBuffer& buffer) const {
  if (!cfg_.reward_scaling || buffer.size() == 0) return 1.0;
  const double m = cfg_.reward_scale_mode == RewardScaleMode::kMeanAbs ? buffer.mean_abs_reward()
                                                                       : std::abs(buffer.mean_reward());
  if (m == 0.0) return 1.0;
  return std::max(m, cfg_.reward_scale_floor);
}

template <typename T>
void Agent<T>::sync_targets(const ReplayBuffer& buffer) {
  nn::copy_parameters(encoder_.parameters(), encoder_target_.parameters());
  nn::copy_parameters(q1_.parameters(), q1_target_.parameters());
  nn::copy_parameters(q2_.parameters(), q2_target_.parameters());
  nn::copy_parameters(policy_.parameters(), policy_target_.parameters());
  r_bar_target_ = r_bar_;
  r_bar_ = reward_scale(buffer);
  ++counters_.syncs;
}

template <typename T>
EncoderStats Agent<T>::update_encoder(const ReplayBuffer& buffer) {
  const SegmentBatch batch = buffer.sample_segments(cfg_.batch_size, cfg_.enc_horizon, rng_);
  ad::Tape<T> tape;
  const EncoderLoss<T> loss = encoder_loss(tape, batch, buffer.terminal_seen());
  encoder_opt_.zero_grad();
  tape.backward(loss.total);
  encoder_opt_.step();
  ++counters_.encoder_updates;
  return {static_cast<double>(loss.total.value()(0, 0)), loss.reward, loss.dynamics, loss.terminal};
}

template <typename T>
double Agent<T>::update_value(ReplayBuffer& buffer, SegmentBatch* batch_out) {
  SegmentBatch batch = buffer.sample_segments(cfg_.batch_size, cfg_.q_horizon, rng_);
  const Matrix y = value_target(batch);
  ad::Tape<T> tape;
  const ValueLoss<T> vl = value_loss(tape, batch, y);
  value_opt_.zero_grad();
  if (!cfg_.model_based_repr) encoder_opt_.zero_grad();
  tape.backward(vl.loss);
  value_opt_.step();
  if (!cfg_.model_based_repr) encoder_opt_.step();
  if (cfg_.prioritized) buffer.update_priorities(batch.indices, vl.td_abs);
  ++counters_.value_updates;
  const double loss = static_cast<double>(vl.loss.value()(0, 0));
  if (batch_out) *batch_out = std::move(batch);
  return loss;
}

template <typename T>
double Agent<T>::update_policy(const SegmentBatch& batch) {
  ad::Tape<T> tape;
  ad::Var<T> loss = policy_loss(tape, batch.states[0].template cast<T>());
  policy_opt_.zero_grad();
  tape.backward(loss);
  policy_opt_.step();
  ++counters_.policy_updates;
  return static_cast<double>(loss.value()(0, 0));
}

template <typename T>
TrainMetrics Agent<T>::train_step(ReplayBuffer& buffer) {
  TrainMetrics m;
  m.r_bar = r_bar_;
  m.mean_priority = buffer.mean_priority();
  if (buffer.size() < static_cast<std::size_t>(cfg_.batch_size)) return m;

  auto accumulate = [](EncoderStats& acc, const EncoderStats& s, double w) {
    acc.total += w * s.total;
    acc.reward += w * s.reward;
    acc.dynamics += w * s.dynamics;
    acc.terminal += w * s.terminal;
  };
  if (counters_.train_steps % cfg_.target_update_freq == 0) {
    sync_targets(buffer);
    m.synced = true;
    if (cfg_.model_based_repr && cfg_.encoder_schedule == EncoderSchedule::kBlock) {
      EncoderStats mean;
      for (int k = 0; k < cfg_.target_update_freq; ++k) {
        accumulate(mean, update_encoder(buffer), 1.0 / cfg_.target_update_freq);
      }
      last_encoder_ = mean;
    }
  }
  if (cfg_.model_based_repr && cfg_.encoder_schedule == EncoderSchedule::kAmortized) {
    last_encoder_ = update_encoder(buffer);
  }
  SegmentBatch batch;
  m.loss_value = update_value(buffer, &batch);
  m.loss_policy = update_policy(batch);
  ++counters_.train_steps;

  m.trained = true;
  m.loss_encoder = last_encoder_.total;
  m.loss_reward = last_encoder_.reward;
  m.loss_dynamics = last_encoder_.dynamics;
  m.loss_terminal = last_encoder_.terminal;
  m.r_bar = r_bar_;
  m.mean_priority = buffer.mean_priority();
  return m;
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'R', 'Q', 'C', 'K', 'P', 'T', '1'};

template <typename V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw ConfigError("truncated checkpoint");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1u << 30)) throw ConfigError("corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw ConfigError("truncated checkpoint");
  return s;
}

template <typename T>
void put_matrix(std::ostream& os, const ad::Matrix<T>& m) {
  put<std::int64_t>(os, m.rows());
  put<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(T)));
}

template <typename T>
void get_matrix(std::istream& is, ad::Matrix<T>& m, const std::string& what) {
  const auto r = get<std::int64_t>(is), c = get<std::int64_t>(is);
  if (r != m.rows() || c != m.cols()) throw ConfigError("checkpoint shape mismatch for " + what);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(T)));
  if (!is) throw ConfigError("truncated checkpoint");
}

}  // namespace

template <typename T>
void Agent<T>::save(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, sizeof(T));
  auto params = online_parameters();
  for (auto* p : target_parameters()) params.push_back(p);
  put<std::uint64_t>(os, params.size());
  for (auto* p : params) {
    put_string(os, p->name);
    put_matrix(os, p->value);
  }
  for (auto* opt : {&encoder_opt_, &value_opt_, &policy_opt_}) {
    put<std::int64_t>(os, opt->step_count());
    for (const auto& m : opt->first_moments()) put_matrix(os, m);
    for (const auto& v : opt->second_moments()) put_matrix(os, v);
  }
  put(os, r_bar_);
  put(os, r_bar_target_);
  put(os, counters_);
  put(os, last_encoder_);
  std::ostringstream rs;
  rs << rng_;
  put_string(os, rs.str());
  if (!os) throw ConfigError("failed writing checkpoint " + path.string());
}

template <typename T>
void Agent<T>::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ConfigError("not a checkpoint: " + path.string());
  }
  if (get<std::uint32_t>(is) != sizeof(T)) throw ConfigError("checkpoint precision mismatch");
  auto params = online_parameters();
  for (auto* p : target_parameters()) params.push_back(p);
  if (get<std::uint64_t>(is) != params.size()) throw ConfigError("checkpoint architecture mismatch");
  for (auto* p : params) {
    const std::string name = get_string(is);
    if (name != p->name) throw ConfigError("checkpoint parameter order mismatch: " + name + " vs " + p->name);
    get_matrix(is, p->value, name);
  }
  for (auto* opt : {&encoder_opt_, &value_opt_, &policy_opt_}) {
    opt->set_step_count(get<std::int64_t>(is));
    for (auto& m : opt->first_moments()) get_matrix(is, m, "optimizer state");
    for (auto& v : opt->second_moments()) get_matrix(is, v, "optimizer state");
  }
  r_bar_ = get<double>(is);
  r_bar_target_ = get<double>(is);
  counters_ = get<Instrumentation>(is);
  last_encoder_ = get<EncoderStats>(is);
  std::istringstream rs(get_string(is));
  rs >> rng_;
}

template class Agent<float>;
template class Agent<double>;

}  // namespace mrq
