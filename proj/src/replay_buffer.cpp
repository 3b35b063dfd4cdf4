#include "mrq/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "mrq/errors.hpp"

namespace mrq {

SumTree::SumTree(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {
  leaf_base_ = 1;
  while (leaf_base_ < capacity_) leaf_base_ <<= 1;
  nodes_.assign(2 * leaf_base_, 0.0);
}

void SumTree::set(std::size_t index, double value) {
  if (index >= capacity_) throw ContractViolation("sum-tree index out of range");
  std::size_t node = leaf_base_ + index;
  nodes_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t node = 1;
  while (node < leaf_base_) {
    const double left = nodes_[2 * node];
    if (mass < left || nodes_[2 * node + 1] <= 0.0) {
      node = 2 * node;
    } else {
      mass -= left;
      node = 2 * node + 1;
    }
  }
  return std::min(node - leaf_base_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(BufferConfig cfg)
    : cfg_(cfg), tree_(cfg.capacity), max_priority_(cfg.min_priority) {
  if (cfg_.capacity == 0) throw ConfigError("replay capacity must be positive");
  if (cfg_.obs_size <= 0 || cfg_.action_dim <= 0) throw ConfigError("replay buffer needs positive obs/action sizes");
  if (!(cfg_.alpha > 0.0)) throw ConfigError("priority smoothing alpha must be positive");
  if (!(cfg_.min_priority > 0.0)) throw ConfigError("minimum priority must be positive");
}

void ReplayBuffer::write_obs(std::vector<float>& vf, std::vector<std::uint8_t>& vb, std::size_t slot,
                             std::span<const float> obs) {
  const std::size_t n = static_cast<std::size_t>(cfg_.obs_size);
  if (cfg_.pixel) {
    if (vb.size() < (slot + 1) * n) vb.resize((slot + 1) * n);
    for (std::size_t i = 0; i < n; ++i) {
      vb[slot * n + i] = static_cast<std::uint8_t>(std::clamp(std::lround(obs[i]), 0L, 255L));
    }
  } else {
    if (vf.size() < (slot + 1) * n) vf.resize((slot + 1) * n);
    std::copy(obs.begin(), obs.end(), vf.begin() + static_cast<std::ptrdiff_t>(slot * n));
  }
}

void ReplayBuffer::read_obs(const std::vector<float>& vf, const std::vector<std::uint8_t>& vb, std::size_t slot,
                            float* out) const {
  const std::size_t n = static_cast<std::size_t>(cfg_.obs_size);
  if (cfg_.pixel) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(vb[slot * n + i]);
  } else {
    std::copy_n(vf.begin() + static_cast<std::ptrdiff_t>(slot * n), n, out);
  }
}

std::size_t ReplayBuffer::add(const Transition& t) {
  if (static_cast<int>(t.state.size()) != cfg_.obs_size || static_cast<int>(t.next_state.size()) != cfg_.obs_size) {
    throw ConfigError("transition observation size " + std::to_string(t.state.size()) + " does not match buffer spec " +
                      std::to_string(cfg_.obs_size));
  }
  if (static_cast<int>(t.action.size()) != cfg_.action_dim) {
    throw ConfigError("transition action size " + std::to_string(t.action.size()) + " does not match buffer spec " +
                      std::to_string(cfg_.action_dim));
  }
  if (t.terminal && t.truncated) throw ContractViolation("transition cannot be both terminal and truncated");
  if (!std::isfinite(t.reward)) throw ContractViolation("transition reward is not finite");

  const std::size_t slot = write_pos_;
  write_obs(states_f_, states_b_, slot, t.state);
  write_obs(next_f_, next_b_, slot, t.next_state);
  const std::size_t a = static_cast<std::size_t>(cfg_.action_dim);
  if (actions_.size() < (slot + 1) * a) actions_.resize((slot + 1) * a);
  std::copy(t.action.begin(), t.action.end(), actions_.begin() + static_cast<std::ptrdiff_t>(slot * a));
  if (rewards_.size() <= slot) {
    rewards_.resize(slot + 1);
    terminal_.resize(slot + 1);
    episode_end_.resize(slot + 1);
  }
  rewards_[slot] = t.reward;
  terminal_[slot] = t.terminal ? 1 : 0;
  episode_end_[slot] = (t.terminal || t.truncated) ? 1 : 0;
  terminal_seen_ = terminal_seen_ || t.terminal;
  tree_.set(slot, max_priority_);

  write_pos_ = (write_pos_ + 1) % cfg_.capacity;
  size_ = std::min(size_ + 1, cfg_.capacity);
  return slot;
}

bool ReplayBuffer::has_successor(std::size_t index) const {
  // The slot right after `index` holds the next step of the same episode
  // only if it has already been written and is newer than `index`.
  const std::size_t oldest = size_ < cfg_.capacity ? 0 : write_pos_;
  const std::size_t pos = (index + cfg_.capacity - oldest) % cfg_.capacity;
  return pos + 1 < size_ && !episode_end_[index];
}

EpisodeSegment ReplayBuffer::segment_at(std::size_t index, int horizon) const {
  if (index >= size_) throw ContractViolation("segment anchor out of range");
  if (horizon < 1) throw ContractViolation("segment horizon must be >= 1");
  const std::size_t n = static_cast<std::size_t>(cfg_.obs_size);
  const std::size_t a = static_cast<std::size_t>(cfg_.action_dim);
  EpisodeSegment seg;
  seg.states.assign(static_cast<std::size_t>(horizon) + 1, std::vector<float>(n, 0.0f));
  seg.actions.assign(static_cast<std::size_t>(horizon), std::vector<float>(a, 0.0f));
  seg.rewards.assign(static_cast<std::size_t>(horizon), 0.0);
  seg.terminals.assign(static_cast<std::size_t>(horizon), 0.0);
  read_obs(states_f_, states_b_, index, seg.states[0].data());
  std::size_t slot = index;
  int t = 0;
  for (; t < horizon; ++t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    std::copy_n(actions_.begin() + static_cast<std::ptrdiff_t>(slot * a), a, seg.actions[ti].begin());
    seg.rewards[ti] = rewards_[slot];
    seg.terminals[ti] = terminal_[slot];
    read_obs(next_f_, next_b_, slot, seg.states[ti + 1].data());
    if (t + 1 == horizon || !has_successor(slot)) break;
    slot = (slot + 1) % cfg_.capacity;
  }
  seg.valid_length = std::min(t + 1, horizon);
  // Padding repeats the last valid next-state so masked steps stay finite.
  for (std::size_t ti = static_cast<std::size_t>(seg.valid_length); ti < static_cast<std::size_t>(horizon); ++ti) {
    seg.states[ti + 1] = seg.states[ti];
  }
  return seg;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int batch, std::mt19937_64& rng) const {
  if (size_ == 0) throw SamplingError("cannot sample from an empty replay buffer");
  if (batch < 1) throw ContractViolation("batch size must be >= 1");
  std::vector<std::size_t> out(static_cast<std::size_t>(batch));
  if (cfg_.prioritized) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double total = tree_.total();
    for (auto& i : out) i = std::min(tree_.find(u(rng) * total), size_ - 1);
  } else {
    std::uniform_int_distribution<std::size_t> u(0, size_ - 1);
    for (auto& i : out) i = u(rng);
  }
  return out;
}

SegmentBatch ReplayBuffer::sample_segments(int batch, int horizon, std::mt19937_64& rng) const {
  if (horizon < 1) throw ContractViolation("segment horizon must be >= 1");
  SegmentBatch out;
  out.batch_size = batch;
  out.horizon = horizon;
  out.indices = sample_indices(batch, rng);
  const Eigen::Index B = batch;
  out.states.assign(static_cast<std::size_t>(horizon) + 1, ad::Matrix<float>(B, cfg_.obs_size));
  out.actions.assign(static_cast<std::size_t>(horizon), ad::Matrix<float>(B, cfg_.action_dim));
  out.rewards = ad::Matrix<double>::Zero(B, horizon);
  out.terminals = ad::Matrix<double>::Zero(B, horizon);
  out.mask = ad::Matrix<double>::Zero(B, horizon);
  out.valid_length.resize(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < B; ++b) {
    const EpisodeSegment seg = segment_at(out.indices[static_cast<std::size_t>(b)], horizon);
    for (std::size_t t = 0; t <= static_cast<std::size_t>(horizon); ++t) {
      std::copy(seg.states[t].begin(), seg.states[t].end(), out.states[t].row(b).data());
    }
    for (std::size_t t = 0; t < static_cast<std::size_t>(horizon); ++t) {
      std::copy(seg.actions[t].begin(), seg.actions[t].end(), out.actions[t].row(b).data());
      const auto ti = static_cast<Eigen::Index>(t);
      out.rewards(b, ti) = seg.rewards[t];
      out.terminals(b, ti) = seg.terminals[t];
      out.mask(b, ti) = static_cast<int>(t) < seg.valid_length ? 1.0 : 0.0;
    }
    out.valid_length[static_cast<std::size_t>(b)] = seg.valid_length;
  }
  return out;
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices, std::span<const double> td_abs) {
  if (indices.size() != td_abs.size()) throw ContractViolation("update_priorities: size mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size_) throw ContractViolation("update_priorities: index out of range");
    if (!(td_abs[k] >= 0.0) || !std::isfinite(td_abs[k])) {
      throw ContractViolation("update_priorities: td magnitude must be finite and nonnegative");
    }
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double p = std::max(std::pow(td_abs[k], cfg_.alpha), cfg_.min_priority);
    tree_.set(indices[k], p);
    max_priority_ = std::max(max_priority_, p);
  }
}

double ReplayBuffer::priority(std::size_t index) const {
  if (index >= size_) throw ContractViolation("priority: index out of range");
  return tree_.get(index);
}

double ReplayBuffer::mean_priority() const { return size_ == 0 ? 0.0 : tree_.total() / static_cast<double>(size_); }

double ReplayBuffer::sampling_probability(std::size_t index) const {
  if (index >= size_) throw ContractViolation("sampling_probability: index out of range");
  if (!cfg_.prioritized) return 1.0 / static_cast<double>(size_);
  return tree_.get(index) / tree_.total();
}

double ReplayBuffer::mean_abs_reward() const {
  if (size_ == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < size_; ++i) s += std::abs(rewards_[i]);
  return s / static_cast<double>(size_);
}

double ReplayBuffer::mean_reward() const {
  if (size_ == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < size_; ++i) s += rewards_[i];
  return s / static_cast<double>(size_);
}

std::vector<std::size_t> ReplayBuffer::logical_order() const {
  std::vector<std::size_t> out(size_);
  const std::size_t oldest = size_ < cfg_.capacity ? 0 : write_pos_;
  for (std::size_t k = 0; k < size_; ++k) out[k] = (oldest + k) % cfg_.capacity;
  return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'R', 'Q', 'R', 'E', 'P', 'L', 'Y'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw ConfigError("truncated replay snapshot");
  return v;
}

template <typename V>
void put_vec(std::ostream& os, const std::vector<V>& v) {
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(V)));
}

template <typename V>
std::vector<V> get_vec(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::vector<V> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(V)));
  if (!is) throw ConfigError("truncated replay snapshot");
  return v;
}

}  // namespace

void ReplayBuffer::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write replay snapshot " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put<std::int32_t>(os, cfg_.obs_size);
  put<std::uint8_t>(os, cfg_.pixel);
  put<std::int32_t>(os, cfg_.action_dim);
  put<std::uint64_t>(os, cfg_.capacity);
  put(os, cfg_.alpha);
  put(os, cfg_.min_priority);
  put<std::uint8_t>(os, cfg_.prioritized);
  put<std::uint64_t>(os, write_pos_);
  put<std::uint64_t>(os, size_);
  put(os, max_priority_);
  put<std::uint8_t>(os, terminal_seen_);
  put_vec(os, states_f_);
  put_vec(os, next_f_);
  put_vec(os, states_b_);
  put_vec(os, next_b_);
  put_vec(os, actions_);
  put_vec(os, rewards_);
  put_vec(os, terminal_);
  put_vec(os, episode_end_);
  std::vector<double> prio(size_);
  for (std::size_t i = 0; i < size_; ++i) prio[i] = tree_.get(i);
  put_vec(os, prio);
  if (!os) throw ConfigError("failed writing replay snapshot " + path.string());
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open replay snapshot " + path.string());
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ConfigError("not a replay snapshot: " + path.string());
  if (get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported replay snapshot version");
  BufferConfig cfg;
  cfg.obs_size = get<std::int32_t>(is);
  cfg.pixel = get<std::uint8_t>(is) != 0;
  cfg.action_dim = get<std::int32_t>(is);
  cfg.capacity = get<std::uint64_t>(is);
  cfg.alpha = get<double>(is);
  cfg.min_priority = get<double>(is);
  cfg.prioritized = get<std::uint8_t>(is) != 0;
  ReplayBuffer buf(cfg);
  buf.write_pos_ = get<std::uint64_t>(is);
  buf.size_ = get<std::uint64_t>(is);
  buf.max_priority_ = get<double>(is);
  buf.terminal_seen_ = get<std::uint8_t>(is) != 0;
  buf.states_f_ = get_vec<float>(is);
  buf.next_f_ = get_vec<float>(is);
  buf.states_b_ = get_vec<std::uint8_t>(is);
  buf.next_b_ = get_vec<std::uint8_t>(is);
  buf.actions_ = get_vec<float>(is);
  buf.rewards_ = get_vec<double>(is);
  buf.terminal_ = get_vec<std::uint8_t>(is);
  buf.episode_end_ = get_vec<std::uint8_t>(is);
  const auto prio = get_vec<double>(is);
  if (prio.size() != buf.size_ || buf.rewards_.size() < buf.size_) throw ConfigError("inconsistent replay snapshot");
  for (std::size_t i = 0; i < prio.size(); ++i) buf.tree_.set(i, prio[i]);
  return buf;
}

}  // namespace mrq
