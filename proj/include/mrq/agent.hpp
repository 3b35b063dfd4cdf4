#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrq/autodiff.hpp"
#include "mrq/encoder.hpp"
#include "mrq/env_spec.hpp"
#include "mrq/nn.hpp"
#include "mrq/optim.hpp"
#include "mrq/replay_buffer.hpp"
#include "mrq/reward_codec.hpp"

namespace mrq {

enum class Ablation {
  kLinearValueFunction,
  kDynamicsTargetSA,
  kNoTargetEncoder,
  kRevert,
  kNonLinearModel,
  kMseRewardLoss,
  kNoRewardScaling,
  kNoMin,
  kNoLap,
  kNoMr,
  kOneStepReturn,
  kNoUnroll,
};

const std::vector<std::string>& ablation_names();
std::string to_string(Ablation a);
// Throws ConfigError listing the valid names.
Ablation parse_ablation(const std::string& name);

enum class RewardScaleMode { kMeanAbs, kMeanSigned };
enum class PriorityReduction { kMean, kMin };
enum class EncoderSchedule { kBlock, kAmortized };
enum class DiscreteNoise { kSoftOutput, kOneHot };

struct AgentConfig {
  double gamma = 0.99;
  int batch_size = 256;
  int target_update_freq = 250;
  std::size_t buffer_capacity = 1'000'000;
  int replay_ratio = 1;
  int enc_horizon = 5;
  int q_horizon = 3;
  double lambda_dynamics = 1.0;
  double lambda_reward = 0.1;
  double lambda_terminal = 0.1;
  double lambda_preactiv = 1e-5;
  double target_noise = 0.2;
  double noise_clip = 0.3;
  double exploration_noise = 0.2;
  long initial_random_steps = 10'000;
  double lap_alpha = 0.4;
  double min_priority = 1.0;
  optim::AdamWConfig encoder_optim{1e-4, 1e-4, 0.9, 0.999, 1e-8, std::nullopt};
  optim::AdamWConfig value_optim{3e-4, 1e-4, 0.9, 0.999, 1e-8, 20.0};
  optim::AdamWConfig policy_optim{3e-4, 1e-4, 0.9, 0.999, 1e-8, std::nullopt};
  int zs_dim = 512;
  int za_dim = 256;
  int zsa_dim = 512;
  int enc_hidden = 512;
  int value_hidden = 512;
  int policy_hidden = 512;
  int num_bins = 65;
  double reward_range = 10.0;
  double gumbel_tau = 10.0;
  double reward_scale_floor = 1e-8;
  RewardScaleMode reward_scale_mode = RewardScaleMode::kMeanAbs;
  PriorityReduction priority_reduction = PriorityReduction::kMean;
  EncoderSchedule encoder_schedule = EncoderSchedule::kBlock;
  DiscreteNoise discrete_noise = DiscreteNoise::kSoftOutput;

  // Wiring switches; the ablations below toggle them.
  bool linear_value = false;
  bool nonlinear_model = false;
  bool mse_reward = false;
  bool reward_scaling = true;
  bool min_target = true;
  bool prioritized = true;
  bool huber = true;
  bool model_based_repr = true;
  DynamicsTarget dynamics_target = DynamicsTarget::kTargetState;
  std::vector<Ablation> ablations;

  // Records the switch and rewires the matching fields; repeated names are ignored.
  void apply(Ablation a);
  // Throws ConfigError for out-of-range values.
  void validate() const;
  nn::EncoderDims encoder_dims() const { return {zs_dim, za_dim, zsa_dim, enc_hidden}; }
};

struct TrainMetrics {
  bool trained = false;
  bool synced = false;
  double loss_encoder = 0.0;
  double loss_reward = 0.0;
  double loss_dynamics = 0.0;
  double loss_terminal = 0.0;
  double loss_value = 0.0;
  double loss_policy = 0.0;
  double r_bar = 1.0;
  double mean_priority = 0.0;
};

// Call counts along the update path; used to assert which code ran.
struct Instrumentation {
  long train_steps = 0;
  long syncs = 0;
  long encoder_updates = 0;
  long value_updates = 0;
  long policy_updates = 0;
  long discrete_head_calls = 0;
  long continuous_head_calls = 0;
};

struct EncoderStats {
  double total = 0.0;
  double reward = 0.0;
  double dynamics = 0.0;
  double terminal = 0.0;
};

template <typename T>
struct ValueLoss {
  ad::Var<T> loss;
  std::vector<double> td_abs;  // per sample, for priorities
};

// Target action from a policy output a: clip(a + clip(eps, -c, c), -1, 1)
// for continuous actions, one-hot(argmax(a + clip(eps, -c, c))) for discrete.
std::vector<float> perturb_action(std::span<const double> policy_out, std::span<const double> eps, double clip,
                                  bool discrete);

// (sum_{t<L} gamma^t r_t + [not terminal] gamma^L r_bar_target q_next) / r_bar
double scaled_value_target(std::span<const double> rewards, int valid_length, bool ends_terminal, double gamma,
                           double r_bar, double r_bar_target, double q_next);

template <typename T>
class Agent {
 public:
  using Matrix = ad::Matrix<T>;

  Agent(const EnvSpec& spec, const AgentConfig& cfg, std::uint64_t seed);
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const EnvSpec& spec() const { return spec_; }
  const AgentConfig& config() const { return cfg_; }
  const RewardCodec& codec() const { return codec_; }
  std::mt19937_64& rng() { return rng_; }

  // Uniform over discrete actions (one-hot) or over [-1, 1]^d.
  std::vector<float> random_action();
  // Policy action with exploration noise when `explore`, noiseless otherwise.
  std::vector<float> select_action(std::span<const float> obs, bool explore);
  // Random during the initial exploration phase, then select_action.
  std::vector<float> act(std::span<const float> obs, long env_step, bool explore);

  // Final policy activation: Tanh, or Gumbel-Softmax with the given noise (zero noise when null).
  ad::Var<T> policy_activation(ad::Var<T> preact, const Matrix* gumbel_noise);

  // Target-policy actions for next observations; noise is sampled when null.
  Matrix target_action(const Matrix& next_obs, const Matrix* eps = nullptr, const Matrix* gumbel_noise = nullptr);
  // Scaled multi-step targets y, [B, 1].
  Matrix value_target(const SegmentBatch& batch, const Matrix* eps = nullptr, const Matrix* gumbel_noise = nullptr);
  ValueLoss<T> value_loss(ad::Tape<T>& tape, const SegmentBatch& batch, const Matrix& targets);
  ad::Var<T> policy_loss(ad::Tape<T>& tape, const Matrix& states, const Matrix* gumbel_noise = nullptr);
  EncoderLoss<T> encoder_loss(ad::Tape<T>& tape, const SegmentBatch& batch, bool terminal_seen);

  // Copies online networks into targets and refreshes the reward scales.
  void sync_targets(const ReplayBuffer& buffer);
  EncoderStats update_encoder(const ReplayBuffer& buffer);
  double update_value(ReplayBuffer& buffer, SegmentBatch* batch_out = nullptr);
  double update_policy(const SegmentBatch& batch);
  // One gradient step of the synchronized schedule.
  TrainMetrics train_step(ReplayBuffer& buffer);

  double reward_scale(const ReplayBuffer& buffer) const;
  double r_bar() const { return r_bar_; }
  double r_bar_target() const { return r_bar_target_; }
  long train_steps() const { return counters_.train_steps; }
  const Instrumentation& counters() const { return counters_; }

  nn::Encoder<T>& encoder() { return encoder_; }
  nn::Encoder<T>& encoder_target() { return encoder_target_; }
  nn::ValueNetwork<T>& value(int i) { return i == 0 ? q1_ : q2_; }
  nn::ValueNetwork<T>& value_target_net(int i) { return i == 0 ? q1_target_ : q2_target_; }
  nn::PolicyNetwork<T>& policy() { return policy_; }
  nn::PolicyNetwork<T>& policy_target() { return policy_target_; }

  std::vector<ad::Parameter<T>*> online_parameters();
  std::vector<ad::Parameter<T>*> target_parameters();
  std::uint64_t hash_online() { return nn::hash_parameters(online_parameters()); }
  std::uint64_t hash_targets() { return nn::hash_parameters(target_parameters()); }
  std::uint64_t hash_encoder() { return nn::hash_parameters(encoder_.parameters()); }

  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);

 private:
  std::vector<ad::Parameter<T>*> value_parameters();
  Matrix noise(Eigen::Index rows, Eigen::Index cols, double sigma, double clip);
  Matrix encode_states(const Matrix& obs, nn::Encoder<T>& enc);
  std::vector<Matrix> next_actions_for(const SegmentBatch& batch);

  EnvSpec spec_;
  AgentConfig cfg_;
  RewardCodec codec_;
  std::mt19937_64 rng_;

  nn::Encoder<T> encoder_, encoder_target_;
  nn::ValueNetwork<T> q1_, q2_, q1_target_, q2_target_;
  nn::PolicyNetwork<T> policy_, policy_target_;
  optim::AdamW<T> encoder_opt_, value_opt_, policy_opt_;

  double r_bar_ = 1.0;
  double r_bar_target_ = 1.0;
  Instrumentation counters_;
  EncoderStats last_encoder_{};
};

}  // namespace mrq
