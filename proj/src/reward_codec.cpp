#include "mrq/reward_codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrq/errors.hpp"

namespace mrq {

double symexp(double x) {
  const double m = std::expm1(std::abs(x));
  return x < 0.0 ? -m : m;
}

double symlog(double y) {
  const double m = std::log1p(std::abs(y));
  return y < 0.0 ? -m : m;
}

RewardCodec::RewardCodec(int num_bins, double range) {
  if (num_bins < 2) throw ConfigError("reward codec needs at least 2 bins");
  if (!(range > 0.0)) throw ConfigError("reward codec range must be positive");
  bins_.resize(static_cast<size_t>(num_bins));
  const double step = 2.0 * range / static_cast<double>(num_bins - 1);
  for (int i = 0; i < num_bins; ++i) bins_[static_cast<size_t>(i)] = symexp(-range + step * i);
}

RewardCodec::RewardCodec(const RewardCodec& other) : bins_(other.bins_), clamped_(other.clamped_.load()) {}

RewardCodec& RewardCodec::operator=(const RewardCodec& other) {
  bins_ = other.bins_;
  clamped_ = other.clamped_.load();
  return *this;
}

std::pair<int, double> RewardCodec::bracket(double r) const {
  if (!std::isfinite(r)) throw ContractViolation("cannot encode non-finite reward");
  const int last = num_bins() - 1;
  if (r <= bins_.front()) {
    if (r < bins_.front()) ++clamped_;
    return {0, 1.0};
  }
  if (r >= bins_.back()) {
    if (r > bins_.back()) ++clamped_;
    return {last, 1.0};
  }
  const auto it = std::upper_bound(bins_.begin(), bins_.end(), r);
  const int hi = static_cast<int>(it - bins_.begin());
  const int lo = hi - 1;
  const double b_lo = bins_[static_cast<size_t>(lo)], b_hi = bins_[static_cast<size_t>(hi)];
  return {lo, (b_hi - r) / (b_hi - b_lo)};
}

std::vector<double> RewardCodec::encode(double r) const {
  std::vector<double> w(bins_.size(), 0.0);
  const auto [lo, w_lo] = bracket(r);
  if (w_lo == 1.0 || lo + 1 >= num_bins()) {
    w[static_cast<size_t>(lo)] = 1.0;
    return w;
  }
  const double b_lo = bins_[static_cast<size_t>(lo)], b_hi = bins_[static_cast<size_t>(lo + 1)];
  w[static_cast<size_t>(lo)] = w_lo;
  w[static_cast<size_t>(lo + 1)] = (r - b_lo) / (b_hi - b_lo);
  return w;
}

double RewardCodec::decode(std::span<const double> weights) const {
  if (weights.size() != bins_.size()) throw ContractViolation("decode: expected " + std::to_string(bins_.size()) + " weights");
  double sum = 0.0, out = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ContractViolation("decode: weights must be nonnegative");
    sum += weights[i];
    out += weights[i] * bins_[i];
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ContractViolation("decode: weights must sum to 1");
  return out;
}

template <typename T>
ad::Matrix<T> RewardCodec::encode_batch(std::span<const double> rewards) const {
  ad::Matrix<T> out = ad::Matrix<T>::Zero(static_cast<Eigen::Index>(rewards.size()), num_bins());
  for (size_t b = 0; b < rewards.size(); ++b) {
    const auto w = encode(rewards[b]);
    for (size_t i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0) out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = static_cast<T>(w[i]);
    }
  }
  return out;
}

double RewardCodec::reward_loss(std::span<const double> logits, double r) const {
  if (logits.size() != bins_.size()) throw ConfigError("reward_loss: expected " + std::to_string(bins_.size()) + " logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  lse = std::log(lse) + mx;
  const auto target = encode(r);
  double loss = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) loss -= target[i] * (logits[i] - lse);
  return loss;
}

template ad::Matrix<float> RewardCodec::encode_batch<float>(std::span<const double>) const;
template ad::Matrix<double> RewardCodec::encode_batch<double>(std::span<const double>) const;

}  // namespace mrq
