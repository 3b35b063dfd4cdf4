#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mrq/errors.hpp"
#include "mrq/replay_buffer.hpp"

using namespace mrq;

namespace {

BufferConfig small_config(std::size_t capacity = 100) {
  BufferConfig c;
  c.obs_size = 2;
  c.action_dim = 2;
  c.capacity = capacity;
  return c;
}

// State encodes (episode, step) so segments can be traced back.
Transition step(int episode, int t, double reward = 0.0, bool terminal = false, bool truncated = false) {
  const float e = static_cast<float>(episode), s = static_cast<float>(t);
  return {{e, s}, {1.0f, 0.0f}, reward, terminal, truncated, {e, s + 1}};
}

// Pearson statistic of observed counts against expected probabilities.
bool chi_square_passes(const std::vector<long>& counts, const std::vector<double>& probs, double significance) {
  long n = 0;
  for (long c : counts) n += c;
  double stat = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * static_cast<double>(n);
    stat += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return stat <= boost::math::quantile(boost::math::complement(dist, significance));
}

}  // namespace

TEST(ReplayAdd, FirstInsertionHasPriorityOne) {
  ReplayBuffer buf(small_config());
  const auto i = buf.add(step(0, 0));
  EXPECT_EQ(buf.priority(i), 1.0);
  EXPECT_EQ(buf.size(), 1u);
}

TEST(ReplayAdd, NewEntriesInheritTheRunningMax) {
  ReplayBuffer buf(small_config());
  const auto i = buf.add(step(0, 0));
  const std::vector<std::size_t> idx = {i};
  const std::vector<double> td = {32.0};
  buf.update_priorities(idx, td);
  EXPECT_DOUBLE_EQ(buf.priority(i), 4.0);
  const auto j = buf.add(step(0, 1));
  EXPECT_DOUBLE_EQ(buf.priority(j), 4.0);
  EXPECT_DOUBLE_EQ(buf.max_priority(), 4.0);
  // Lowering a priority does not lower the running max.
  const std::vector<double> zero = {0.0};
  buf.update_priorities(idx, zero);
  EXPECT_DOUBLE_EQ(buf.priority(buf.add(step(0, 2))), 4.0);
}

TEST(ReplayAdd, RingEvictsTheOldest) {
  ReplayBuffer buf(small_config(3));
  for (int t = 0; t < 4; ++t) buf.add(step(0, t));
  EXPECT_EQ(buf.size(), 3u);
  const auto order = buf.logical_order();
  ASSERT_EQ(order.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(buf.segment_at(order[static_cast<size_t>(k)], 1).states[0][1], k + 1);
}

TEST(ReplayAdd, MismatchedShapesAndFlagsAreRejected) {
  ReplayBuffer buf(small_config());
  Transition bad = step(0, 0);
  bad.state.push_back(0.0f);
  EXPECT_THROW(buf.add(bad), ConfigError);
  EXPECT_THROW(buf.add(step(0, 0, 0.0, true, true)), ContractViolation);
}

TEST(Priorities, LossAdjustedFormula) {
  ReplayBuffer buf(small_config());
  for (int t = 0; t < 4; ++t) buf.add(step(0, t));
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const std::vector<double> td = {0.0, 32.0, 1.0, 0.5};
  buf.update_priorities(idx, td);
  EXPECT_EQ(buf.priority(0), 1.0);
  EXPECT_DOUBLE_EQ(buf.priority(1), 4.0);
  EXPECT_EQ(buf.priority(2), 1.0);
  EXPECT_EQ(buf.priority(3), 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_GE(buf.priority(i), 1.0);
}

TEST(Priorities, NegativeMagnitudeIsContractViolation) {
  ReplayBuffer buf(small_config());
  buf.add(step(0, 0));
  const std::vector<std::size_t> idx = {0};
  const std::vector<double> td = {-0.1};
  EXPECT_THROW(buf.update_priorities(idx, td), ContractViolation);
}

TEST(Sampling, ProbabilitiesAreProportionalToPriority) {
  ReplayBuffer buf(small_config());
  for (int t = 0; t < 3; ++t) buf.add(step(0, t));
  const std::vector<std::size_t> idx = {2};
  const std::vector<double> td = {std::pow(2.0, 1.0 / 0.4)};
  buf.update_priorities(idx, td);
  EXPECT_NEAR(buf.sampling_probability(0), 0.25, 1e-12);
  EXPECT_NEAR(buf.sampling_probability(1), 0.25, 1e-12);
  EXPECT_NEAR(buf.sampling_probability(2), 0.5, 1e-12);
}

TEST(Sampling, EqualPrioritiesPassUniformChiSquare) {
  ReplayBuffer buf(small_config());
  for (int t = 0; t < 3; ++t) buf.add(step(0, t));
  std::mt19937_64 rng(1);
  std::vector<long> counts(3, 0);
  for (auto i : buf.sample_indices(100'000, rng)) ++counts[i];
  EXPECT_TRUE(chi_square_passes(counts, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.01));
}

TEST(Sampling, SkewedPrioritiesPassChiSquare) {
  ReplayBuffer buf(small_config());
  for (int t = 0; t < 5; ++t) buf.add(step(0, t));
  const std::vector<std::size_t> idx = {0, 1, 2, 3, 4};
  const std::vector<double> td = {0.0, 32.0, 5.0, 100.0, 2.0};
  buf.update_priorities(idx, td);
  std::vector<double> probs;
  for (std::size_t i = 0; i < 5; ++i) probs.push_back(buf.sampling_probability(i));
  std::mt19937_64 rng(2);
  std::vector<long> counts(5, 0);
  for (auto i : buf.sample_indices(100'000, rng)) ++counts[i];
  EXPECT_TRUE(chi_square_passes(counts, probs, 0.01));
}

TEST(Sampling, EmptyBufferIsSamplingError) {
  ReplayBuffer buf(small_config());
  std::mt19937_64 rng(3);
  EXPECT_THROW(buf.sample_segments(4, 3, rng), SamplingError);
}

TEST(Sampling, UniformModeIgnoresPriorities) {
  auto cfg = small_config();
  cfg.prioritized = false;
  ReplayBuffer buf(cfg);
  for (int t = 0; t < 4; ++t) buf.add(step(0, t));
  const std::vector<std::size_t> idx = {0};
  const std::vector<double> td = {1000.0};
  buf.update_priorities(idx, td);
  EXPECT_DOUBLE_EQ(buf.sampling_probability(0), 0.25);
}

TEST(Segments, AnchorOneStepBeforeTerminalIsMaskedAfterOneStep) {
  ReplayBuffer buf(small_config());
  buf.add(step(0, 0));
  buf.add(step(0, 1));
  const auto anchor = buf.add(step(0, 2, 1.0, true));
  buf.add(step(1, 0));
  const EpisodeSegment seg = buf.segment_at(anchor, 3);
  EXPECT_EQ(seg.valid_length, 1);
  EXPECT_EQ(seg.terminals[0], 1.0);
  EXPECT_EQ(seg.rewards[0], 1.0);
  EXPECT_EQ(seg.rewards[1], 0.0);
  EXPECT_EQ(seg.terminals[1], 0.0);
}

TEST(Segments, TruncationEndsTheSegmentWithoutTerminal) {
  ReplayBuffer buf(small_config());
  const auto a = buf.add(step(0, 0));
  buf.add(step(0, 1, 0.0, false, true));
  buf.add(step(1, 0));
  const EpisodeSegment seg = buf.segment_at(a, 5);
  EXPECT_EQ(seg.valid_length, 2);
  EXPECT_EQ(seg.terminals[1], 0.0);
}

TEST(Segments, NewestTransitionHasNoSuccessorYet) {
  ReplayBuffer buf(small_config());
  buf.add(step(0, 0));
  const auto last = buf.add(step(0, 1));
  EXPECT_EQ(buf.segment_at(last, 3).valid_length, 1);
  EXPECT_EQ(buf.segment_at(0, 3).valid_length, 2);
}

TEST(Segments, BatchMaskMatchesValidLength) {
  ReplayBuffer buf(small_config());
  for (int e = 0; e < 3; ++e) {
    for (int t = 0; t < 4; ++t) buf.add(step(e, t, 0.0, t == 3));
  }
  std::mt19937_64 rng(4);
  const SegmentBatch b = buf.sample_segments(64, 3, rng);
  for (int i = 0; i < 64; ++i) {
    for (int t = 0; t < 3; ++t) EXPECT_EQ(b.mask(i, t), t < b.valid_length[static_cast<size_t>(i)] ? 1.0 : 0.0);
  }
}

// Randomized episode lengths with a wrapping ring: no valid step of a segment
// belongs to a different episode than its anchor, and steps are consecutive.
TEST(Segments, NeverCrossEpisodesProperty) {
  std::mt19937_64 rng(5);
  ReplayBuffer buf(small_config(37));
  std::uniform_int_distribution<int> len(1, 9);
  std::bernoulli_distribution term(0.5);
  for (int e = 0; e < 40; ++e) {
    const int L = len(rng);
    const bool t = term(rng);
    for (int k = 0; k < L; ++k) buf.add(step(e, k, 0.0, k == L - 1 && t, k == L - 1 && !t));
  }
  const SegmentBatch b = buf.sample_segments(500, 5, rng);
  for (int i = 0; i < 500; ++i) {
    const float ep = b.states[0](i, 0), t0 = b.states[0](i, 1);
    for (int t = 1; t <= b.valid_length[static_cast<size_t>(i)]; ++t) {
      EXPECT_EQ(b.states[static_cast<size_t>(t)](i, 0), ep);
      EXPECT_EQ(b.states[static_cast<size_t>(t)](i, 1), t0 + static_cast<float>(t));
    }
  }
}

TEST(Segments, PixelObservationsRoundTripAsBytes) {
  BufferConfig c;
  c.obs_size = 4;
  c.pixel = true;
  c.action_dim = 1;
  c.capacity = 10;
  ReplayBuffer buf(c);
  buf.add({{0.0f, 128.0f, 255.0f, 7.0f}, {0.5f}, 0.0, false, false, {1.0f, 2.0f, 3.0f, 4.0f}});
  const auto seg = buf.segment_at(0, 1);
  EXPECT_EQ(seg.states[0], (std::vector<float>{0.0f, 128.0f, 255.0f, 7.0f}));
  EXPECT_EQ(seg.states[1], (std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f}));
}

TEST(Snapshot, RoundTripPreservesContentsAndPriorities) {
  ReplayBuffer buf(small_config(5));
  for (int t = 0; t < 7; ++t) buf.add(step(0, t, 0.1 * t, t == 6));
  const std::vector<std::size_t> idx = {1, 3};
  const std::vector<double> td = {32.0, 3.0};
  buf.update_priorities(idx, td);
  const auto path = std::filesystem::temp_directory_path() / "mrq_replay_snapshot.bin";
  buf.save(path);
  const ReplayBuffer back = ReplayBuffer::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.size(), buf.size());
  EXPECT_EQ(back.terminal_seen(), buf.terminal_seen());
  EXPECT_EQ(back.logical_order(), buf.logical_order());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    EXPECT_EQ(back.priority(i), buf.priority(i));
    const auto s1 = buf.segment_at(i, 3), s2 = back.segment_at(i, 3);
    EXPECT_EQ(s1.states, s2.states);
    EXPECT_EQ(s1.rewards, s2.rewards);
    EXPECT_EQ(s1.valid_length, s2.valid_length);
  }
  std::mt19937_64 r1(9), r2(9);
  EXPECT_EQ(buf.sample_indices(50, r1), back.sample_indices(50, r2));
}

TEST(Snapshot, GarbageFileIsRejected) {
  const auto path = std::filesystem::temp_directory_path() / "mrq_not_a_snapshot.bin";
  { std::ofstream(path) << "hello"; }
  EXPECT_THROW(ReplayBuffer::load(path), ConfigError);
  std::filesystem::remove(path);
}

TEST(RewardStats, MeanAbsoluteReward) {
  ReplayBuffer buf(small_config());
  buf.add(step(0, 0, 1.0));
  buf.add(step(0, 1, -1.0));
  buf.add(step(0, 2, 2.0));
  EXPECT_DOUBLE_EQ(buf.mean_abs_reward(), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(buf.mean_reward(), 2.0 / 3.0);
}

TEST(SumTree, FindWalksPrefixSums) {
  SumTree tree(5);
  const double v[5] = {1, 0, 2, 3, 4};
  for (int i = 0; i < 5; ++i) tree.set(static_cast<size_t>(i), v[i]);
  EXPECT_DOUBLE_EQ(tree.total(), 10.0);
  EXPECT_EQ(tree.find(0.0), 0u);
  EXPECT_EQ(tree.find(0.999), 0u);
  EXPECT_EQ(tree.find(1.0), 2u);
  EXPECT_EQ(tree.find(2.999), 2u);
  EXPECT_EQ(tree.find(3.0), 3u);
  EXPECT_EQ(tree.find(9.999), 4u);
}
