#pragma once

#include <random>
#include <vector>

#include "mrq/autodiff.hpp"
#include "mrq/nn.hpp"
#include "mrq/replay_buffer.hpp"
#include "mrq/reward_codec.hpp"

namespace mrq {

template <typename T>
nn::Encoder<T> make_encoder(const EnvSpec& spec, const nn::EncoderDims& dims, const nn::ModelOutputs& outputs,
                            bool nonlinear_model, std::mt19937_64& rng);

// What the predicted next embedding is regressed onto.
enum class DynamicsTarget {
  kTargetState,        // f'(s_t), no gradient (default)
  kTargetStateAction,  // g'(f'(s_t), a'_t), no gradient
  kOnlineState,        // f(s_t), trained jointly
  kOnlineStateAction,  // g(f(s_t), a'_t), trained jointly
};

struct EncoderLossOptions {
  double lambda_reward = 0.1;
  double lambda_dynamics = 1.0;
  double lambda_terminal = 0.1;
  bool terminal_seen = false;  // the terminal term is dropped while false
  DynamicsTarget target = DynamicsTarget::kTargetState;
  bool mse_reward = false;  // scalar reward head trained by squared error
};

template <typename T>
struct EncoderLoss {
  ad::Var<T> total;
  double reward = 0.0;
  double dynamics = 0.0;
  double terminal = 0.0;
};

// Latent rollout: z^0 = f(s_0), (z^t, r^t, d^t) = m(g(z^{t-1}, a^{t-1})).
template <typename T>
std::vector<nn::Prediction<T>> unroll(ad::Tape<T>& tape, nn::Encoder<T>& encoder, const ad::Matrix<T>& s0,
                                      const std::vector<ad::Matrix<T>>& actions, bool trainable);

// Sum over t = 1..H of the weighted reward, dynamics and terminal terms, each
// averaged over the batch. Steps past a segment's valid length are masked.
// `next_actions[t]` is the action paired with s_{t+1} for state-action targets.
template <typename T>
EncoderLoss<T> encoder_loss(ad::Tape<T>& tape, nn::Encoder<T>& online, nn::Encoder<T>& target,
                            const SegmentBatch& batch, const RewardCodec& codec, const EncoderLossOptions& opts,
                            const std::vector<ad::Matrix<T>>* next_actions = nullptr);

}  // namespace mrq
