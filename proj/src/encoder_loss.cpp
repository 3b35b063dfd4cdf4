#include "mrq/encoder.hpp"

#include <cmath>
#include <string>

#include "mrq/errors.hpp"

namespace mrq {

template <typename T>
nn::Encoder<T> make_encoder(const EnvSpec& spec, const nn::EncoderDims& dims, const nn::ModelOutputs& outputs,
                            bool nonlinear_model, std::mt19937_64& rng) {
  nn::Encoder<T> enc;
  enc.state = nn::StateEncoder<T>(spec, dims, rng);
  enc.state_action = nn::StateActionEncoder<T>(spec.action_dim, dims, rng);
  enc.model = nn::MdpPredictor<T>(dims.zsa_dim, outputs, nonlinear_model, dims.hidden, rng);
  return enc;
}

template <typename T>
std::vector<nn::Prediction<T>> unroll(ad::Tape<T>& tape, nn::Encoder<T>& encoder, const ad::Matrix<T>& s0,
                                      const std::vector<ad::Matrix<T>>& actions, bool trainable) {
  std::vector<nn::Prediction<T>> out;
  out.reserve(actions.size());
  ad::Var<T> z = encoder.state.forward(tape, s0, trainable);
  for (const auto& a : actions) {
    ad::Var<T> zsa = encoder.state_action.forward(tape, z, tape.constant(a), trainable);
    out.push_back(encoder.model.forward(tape, zsa, trainable));
    z = out.back().next_embedding;
  }
  return out;
}

namespace {

template <typename T>
ad::Var<T> masked_batch_mean(ad::Tape<T>& tape, ad::Var<T> per_sample, const ad::Matrix<T>& mask) {
  return ad::scale(ad::sum_all(ad::mul(per_sample, tape.constant(mask))), T(1) / static_cast<T>(mask.rows()));
}

}  // namespace

template <typename T>
EncoderLoss<T> encoder_loss(ad::Tape<T>& tape, nn::Encoder<T>& online, nn::Encoder<T>& target,
                            const SegmentBatch& batch, const RewardCodec& codec, const EncoderLossOptions& opts,
                            const std::vector<ad::Matrix<T>>* next_actions) {
  const int H = batch.horizon;
  const bool sa_target =
      opts.target == DynamicsTarget::kTargetStateAction || opts.target == DynamicsTarget::kOnlineStateAction;
  if (sa_target && (!next_actions || static_cast<int>(next_actions->size()) < H)) {
    throw ConfigError("state-action dynamics targets need an action for every unrolled next state");
  }
  std::vector<ad::Matrix<T>> actions;
  actions.reserve(static_cast<size_t>(H));
  for (int t = 0; t < H; ++t) actions.push_back(batch.actions[static_cast<size_t>(t)].template cast<T>());
  const ad::Matrix<T> s0 = batch.states[0].template cast<T>();
  const auto preds = unroll<T>(tape, online, s0, actions, true);

  EncoderLoss<T> out;
  ad::Var<T> total = tape.constant(ad::Matrix<T>::Zero(1, 1));
  for (int t = 0; t < H; ++t) {
    const auto ts = static_cast<size_t>(t);
    const nn::Prediction<T>& p = preds[ts];
    const ad::Matrix<T> mask = batch.mask.col(t).template cast<T>();
    const ad::Matrix<T> next_state = batch.states[ts + 1].template cast<T>();

    ad::Var<T> dyn_target;
    switch (opts.target) {
      case DynamicsTarget::kTargetState: {
        ad::Tape<T> frozen(false);
        dyn_target = tape.constant(target.state.forward(frozen, next_state, false).value());
        break;
      }
      case DynamicsTarget::kTargetStateAction: {
        ad::Tape<T> frozen(false);
        ad::Var<T> zs = target.state.forward(frozen, next_state, false);
        ad::Var<T> zsa = target.state_action.forward(frozen, zs, frozen.constant((*next_actions)[ts]), false);
        dyn_target = tape.constant(zsa.value());
        break;
      }
      case DynamicsTarget::kOnlineState:
        dyn_target = online.state.forward(tape, next_state, true);
        break;
      case DynamicsTarget::kOnlineStateAction: {
        ad::Var<T> zs = online.state.forward(tape, next_state, true);
        dyn_target = online.state_action.forward(tape, zs, tape.constant((*next_actions)[ts]), true);
        break;
      }
    }
    ad::Var<T> dyn = masked_batch_mean(tape, ad::sum_cols(ad::square(ad::sub(p.next_embedding, dyn_target))), mask);

    const ad::Matrix<double> rcol = batch.rewards.col(t);
    ad::Var<T> rew;
    if (opts.mse_reward) {
      rew = masked_batch_mean(tape, ad::square(ad::sub(p.reward, tape.constant(rcol.template cast<T>()))), mask);
    } else {
      const std::vector<double> rv(rcol.data(), rcol.data() + rcol.size());
      rew = masked_batch_mean(tape, ad::softmax_cross_entropy(p.reward, codec.encode_batch<T>(rv)), mask);
    }

    total = ad::add(total, ad::add(ad::scale(rew, static_cast<T>(opts.lambda_reward)),
                                   ad::scale(dyn, static_cast<T>(opts.lambda_dynamics))));
    out.reward += static_cast<double>(rew.value()(0, 0));
    out.dynamics += static_cast<double>(dyn.value()(0, 0));

    if (opts.terminal_seen && opts.lambda_terminal != 0.0) {
      const ad::Matrix<T> d = batch.terminals.col(t).template cast<T>();
      ad::Var<T> term = masked_batch_mean(tape, ad::square(ad::sub(p.terminal, tape.constant(d))), mask);
      total = ad::add(total, ad::scale(term, static_cast<T>(opts.lambda_terminal)));
      out.terminal += static_cast<double>(term.value()(0, 0));
    }
  }
  if (!std::isfinite(static_cast<double>(total.value()(0, 0)))) {
    throw NumericError("encoder loss is not finite (reward " + std::to_string(out.reward) + ", dynamics " +
                       std::to_string(out.dynamics) + ", terminal " + std::to_string(out.terminal) + ")");
  }
  out.total = total;
  return out;
}

#define MRQ_INSTANTIATE_ENCODER(T)                                                                              \
  template nn::Encoder<T> make_encoder<T>(const EnvSpec&, const nn::EncoderDims&, const nn::ModelOutputs&, bool, \
                                          std::mt19937_64&);                                                     \
  template std::vector<nn::Prediction<T>> unroll<T>(ad::Tape<T>&, nn::Encoder<T>&, const ad::Matrix<T>&,         \
                                                    const std::vector<ad::Matrix<T>>&, bool);                    \
  template EncoderLoss<T> encoder_loss<T>(ad::Tape<T>&, nn::Encoder<T>&, nn::Encoder<T>&, const SegmentBatch&,   \
                                          const RewardCodec&, const EncoderLossOptions&,                         \
                                          const std::vector<ad::Matrix<T>>*);

MRQ_INSTANTIATE_ENCODER(float)
MRQ_INSTANTIATE_ENCODER(double)

}  // namespace mrq
