#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "mrq/autodiff.hpp"

namespace mrq {

// sign(x) (exp(|x|) - 1)
double symexp(double x);
// sign(y) ln(1 + |y|), the inverse of symexp.
double symlog(double y);

// Two-hot categorical representation of scalar rewards over bins placed at
// symexp of a uniform grid on [-range, range]. Interpolation is linear in
// reward space, so decode(encode(r)) == r for any r inside the bin span.
class RewardCodec {
 public:
  explicit RewardCodec(int num_bins = 65, double range = 10.0);
  RewardCodec(const RewardCodec& other);
  RewardCodec& operator=(const RewardCodec& other);

  int num_bins() const { return static_cast<int>(bins_.size()); }
  const std::vector<double>& bins() const { return bins_; }
  int center() const { return num_bins() / 2; }

  // Rewards outside [b_0, b_{n-1}] are clamped and counted.
  std::vector<double> encode(double r) const;
  double decode(std::span<const double> weights) const;

  template <typename T>
  ad::Matrix<T> encode_batch(std::span<const double> rewards) const;

  // Cross entropy between softmax(logits) and encode(r).
  double reward_loss(std::span<const double> logits, double r) const;

  std::uint64_t clamped_count() const { return clamped_.load(); }

 private:
  // Index i of the bracketing pair (i, i+1) and the weight on i.
  std::pair<int, double> bracket(double r) const;

  std::vector<double> bins_;
  mutable std::atomic<std::uint64_t> clamped_{0};
};

}  // namespace mrq
