#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "mrq/autodiff.hpp"

namespace mrq {

struct Transition {
  std::vector<float> state;
  std::vector<float> action;  // one-hot for discrete action spaces
  double reward = 0.0;
  bool terminal = false;   // environment termination (absorbing)
  bool truncated = false;  // time-limit cutoff, bootstraps normally
  std::vector<float> next_state;
};

// One anchor extended forward by up to `horizon` steps. Entry t of rewards /
// terminals belongs to the transition (states[t], actions[t]) -> states[t+1].
// Entries at t >= valid_length are padding and must be masked out.
struct EpisodeSegment {
  std::vector<std::vector<float>> states;   // horizon + 1
  std::vector<std::vector<float>> actions;  // horizon
  std::vector<double> rewards;              // horizon
  std::vector<double> terminals;            // horizon
  int valid_length = 0;
};

struct SegmentBatch {
  int batch_size = 0;
  int horizon = 0;
  std::vector<ad::Matrix<float>> states;   // horizon + 1 entries of [B, obs]
  std::vector<ad::Matrix<float>> actions;  // horizon entries of [B, A]
  ad::Matrix<double> rewards;              // [B, H]
  ad::Matrix<double> terminals;            // [B, H]
  ad::Matrix<double> mask;                 // [B, H]
  std::vector<int> valid_length;
  std::vector<std::size_t> indices;
};

// Binary tree of partial sums over `capacity` leaves; O(log n) update and search.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 1);

  void set(std::size_t index, double value);
  double get(std::size_t index) const { return nodes_[leaf_base_ + index]; }
  double total() const { return nodes_[1]; }
  // Leaf i with prefix(i) <= mass < prefix(i + 1); mass must lie in [0, total).
  std::size_t find(double mass) const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t leaf_base_;
  std::vector<double> nodes_;
};

struct BufferConfig {
  int obs_size = 1;
  bool pixel = false;  // store observations as bytes
  int action_dim = 1;
  std::size_t capacity = 1'000'000;
  double alpha = 0.4;
  double min_priority = 1.0;
  bool prioritized = true;  // false: uniform sampling
};

// FIFO ring of transitions with loss-adjusted priorities:
// p_i = max(|delta_i|^alpha, min_priority); new entries get the running max.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(BufferConfig cfg);

  std::size_t add(const Transition& t);

  SegmentBatch sample_segments(int batch, int horizon, std::mt19937_64& rng) const;
  EpisodeSegment segment_at(std::size_t index, int horizon) const;
  // Anchor indices only, drawn with probability proportional to priority.
  std::vector<std::size_t> sample_indices(int batch, std::mt19937_64& rng) const;

  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_abs);

  double priority(std::size_t index) const;
  double max_priority() const { return max_priority_; }
  double mean_priority() const;
  double sampling_probability(std::size_t index) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return cfg_.capacity; }
  const BufferConfig& config() const { return cfg_; }
  bool terminal_seen() const { return terminal_seen_; }
  double mean_abs_reward() const;
  double mean_reward() const;
  double reward_at(std::size_t index) const { return rewards_[index]; }
  // Physical indices from oldest to newest.
  std::vector<std::size_t> logical_order() const;

  void save(const std::filesystem::path& path) const;
  static ReplayBuffer load(const std::filesystem::path& path);

 private:
  void write_obs(std::vector<float>& vf, std::vector<std::uint8_t>& vb, std::size_t slot, std::span<const float> obs);
  void read_obs(const std::vector<float>& vf, const std::vector<std::uint8_t>& vb, std::size_t slot, float* out) const;
  bool has_successor(std::size_t index) const;
  std::size_t stored_slots() const { return rewards_.size(); }

  BufferConfig cfg_;
  SumTree tree_;
  std::vector<float> states_f_, next_f_, actions_;
  std::vector<std::uint8_t> states_b_, next_b_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> terminal_, episode_end_;
  std::size_t write_pos_ = 0;
  std::size_t size_ = 0;
  double max_priority_;
  double sum_abs_reward_ = 0.0;
  double sum_reward_ = 0.0;
  bool terminal_seen_ = false;
};

}  // namespace mrq
