#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <deque>
#include <random>

#include "mrq/envs.hpp"
#include "mrq/errors.hpp"
#include "mrq/tabular.hpp"

using namespace mrq;

namespace {

std::vector<float> one_hot(int k, int n) {
  std::vector<float> v(static_cast<size_t>(n), 0.0f);
  v[static_cast<size_t>(k)] = 1.0f;
  return v;
}

// Shortest path length from (0,0) to the far corner by breadth-first search.
int bfs_distance(int n) {
  std::vector<int> dist(static_cast<size_t>(n * n), -1);
  std::deque<int> q = {0};
  dist[0] = 0;
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    const int s = q.front();
    q.pop_front();
    for (int a = 0; a < 4; ++a) {
      const int r = s / n + dr[a], c = s % n + dc[a];
      if (r < 0 || c < 0 || r >= n || c >= n) continue;
      const int s2 = r * n + c;
      if (dist[static_cast<size_t>(s2)] < 0) {
        dist[static_cast<size_t>(s2)] = dist[static_cast<size_t>(s)] + 1;
        q.push_back(s2);
      }
    }
  }
  return dist.back();
}

}  // namespace

TEST(Registry, BuildsEveryNamedEnvironment) {
  EnvConfig c;
  c.image_size = 20;
  for (const auto& name : env_names()) {
    auto env = make_env(name, c, 0);
    EXPECT_EQ(env->spec().name, name);
    const auto obs = env->reset();
    EXPECT_EQ(static_cast<int>(obs.size()), env->spec().obs_size());
  }
  EXPECT_THROW(make_env("cartpole", c, 0), ConfigError);
}

TEST(Registry, SpecsOfTheFourQuadrants) {
  EnvConfig c;
  auto grid = make_env("gridworld-discrete", c, 0);
  EXPECT_EQ(grid->spec().obs_shape, std::vector<int>{25});
  EXPECT_TRUE(grid->spec().discrete());
  EXPECT_EQ(grid->spec().action_dim, 4);

  auto pm = make_env("pointmass-continuous", c, 0);
  EXPECT_EQ(pm->spec().obs_shape, std::vector<int>{4});
  EXPECT_FALSE(pm->spec().discrete());
  EXPECT_EQ(pm->spec().action_dim, 2);
  EXPECT_EQ(pm->spec().action_low, -1.0);
  EXPECT_EQ(pm->spec().action_high, 1.0);

  auto px = make_env("pixel-gridworld", c, 0);
  EXPECT_EQ(px->spec().obs_shape, (std::vector<int>{1, 84, 84}));
  EXPECT_TRUE(px->spec().pixel());
  EXPECT_TRUE(px->spec().discrete());

  c.pixel_action_kind = ActionKind::kContinuous;
  auto pxc = make_env("pixel-gridworld", c, 0);
  EXPECT_TRUE(pxc->spec().pixel());
  EXPECT_FALSE(pxc->spec().discrete());
}

TEST(GridWorld, EnteringTheGoalPaysOneAndTerminates) {
  GridWorld env(5, 50, 0);
  env.reset();
  StepResult r;
  for (int i = 0; i < 4; ++i) {
    r = env.step(one_hot(1, 4));  // down
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.terminal);
  }
  for (int i = 0; i < 3; ++i) r = env.step(one_hot(3, 4));  // right
  EXPECT_FALSE(r.terminal);
  r = env.step(one_hot(3, 4));
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_TRUE(r.terminal);
  EXPECT_FALSE(r.truncated);
  EXPECT_TRUE(env.success());
  EXPECT_EQ(r.obs, one_hot(24, 25));
}

TEST(GridWorld, StepAfterTerminalIsContractViolation) {
  GridWorld env(2, 50, 0);
  env.reset();
  env.step(one_hot(1, 4));
  ASSERT_TRUE(env.step(one_hot(3, 4)).terminal);
  EXPECT_THROW(env.step(one_hot(0, 4)), ContractViolation);
}

TEST(GridWorld, TimeLimitTruncatesWithoutTerminal) {
  GridWorld env(5, 3, 0);
  env.reset();
  env.step(one_hot(0, 4));
  env.step(one_hot(0, 4));
  const auto r = env.step(one_hot(0, 4));
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminal);
  EXPECT_TRUE(env.done());
  EXPECT_THROW(env.step(one_hot(0, 4)), ContractViolation);
}

TEST(OptimalReturn, GridworldMatchesBreadthFirstSearch) {
  EXPECT_EQ(bfs_distance(5), 8);
  auto env = make_env("gridworld-discrete", EnvConfig{}, 0);
  EXPECT_NEAR(optimal_return(*env), 1.0, 1e-12);
  // One step short of the shortest path cannot collect the reward.
  EnvConfig c;
  c.max_episode_steps = bfs_distance(5) - 1;
  EXPECT_EQ(optimal_return(*make_env("gridworld-discrete", c, 0)), 0.0);
  c.max_episode_steps = bfs_distance(5);
  EXPECT_NEAR(optimal_return(*make_env("gridworld-discrete", c, 0)), 1.0, 1e-12);
}

TEST(OptimalReturn, ContinuousEnvIsUnsupported) {
  auto env = make_env("pointmass-continuous", EnvConfig{}, 0);
  EXPECT_THROW(optimal_return(*env), UnsupportedError);
}

TEST(ValueIteration, OneStateOneActionIsGeometricSeries) {
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = 1;
  m.P = Eigen::MatrixXd::Ones(1, 1);
  m.R = Eigen::MatrixXd::Ones(1, 1);
  m.gamma = 0.99;
  m.initial = Eigen::VectorXd::Ones(1);
  const auto vi = value_iteration(m);
  EXPECT_NEAR(vi.V(0), 100.0, 1e-8);
}

TEST(ValueIteration, RandomMdpFixedPointHasSmallResidual) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [mdp, phi] = random_linear_mdp(4, 12, 3, seed);
    const auto vi = value_iteration(mdp);
    EXPECT_LE(bellman_residual(mdp, vi.V), 1e-10);
  }
}

TEST(PointMass, ZeroActionFromRestDoesNotMove) {
  PointMass env(100, 0);
  const auto obs = env.reset();
  const std::vector<float> zero = {0.0f, 0.0f};
  const auto r = env.step(zero);
  EXPECT_EQ(r.obs, obs);
  EXPECT_NEAR(r.reward, -std::min(1.0, std::hypot(0.6, 0.6)), 1e-12);
  EXPECT_GE(r.reward, -1.0);
  EXPECT_LE(r.reward, 0.0);
}

TEST(PointMass, OutOfRangeActionsAreClippedAndCounted) {
  PointMass env(100, 0);
  env.reset();
  const std::vector<float> big = {3.0f, -0.5f};
  env.step(big);
  EXPECT_EQ(env.clipped_action_count(), 1u);
  const std::vector<float> in = {1.0f, -1.0f};
  env.step(in);
  EXPECT_EQ(env.clipped_action_count(), 1u);
}

TEST(PointMass, ReturnBoundDominatesSimpleControllers) {
  const double bound = pointmass_return_bound(100);
  EXPECT_GT(bound, pointmass_zero_action_return(100));
  EXPECT_NEAR(pointmass_zero_action_return(100), -84.8528137, 1e-6);
  // Proportional-derivative controllers with a range of gains never beat the bound.
  double best = -INFINITY;
  for (double kp : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    for (double kd : {0.0, 1.0, 2.0, 4.0, 8.0}) {
      PointMass env(100, 0);
      auto obs = env.reset();
      double ret = 0.0;
      while (!env.done()) {
        std::vector<float> a(2);
        for (int i = 0; i < 2; ++i) {
          a[static_cast<size_t>(i)] = static_cast<float>(std::clamp(-kp * obs[static_cast<size_t>(i)] -
                                                                        kd * obs[static_cast<size_t>(i + 2)],
                                                                    -1.0, 1.0));
        }
        const auto r = env.step(a);
        ret += r.reward;
        obs = r.obs;
      }
      EXPECT_LE(ret, bound + 1e-9);
      best = std::max(best, ret);
    }
  }
  // And a reasonable controller gets most of the way there.
  EXPECT_GT((best - pointmass_zero_action_return(100)) / (bound - pointmass_zero_action_return(100)), 0.8);
}

TEST(PixelGridWorld, ImageMarksAgentAndGoal) {
  PixelGridWorld env(5, 20, ActionKind::kDiscrete, 50, 3);
  const auto img = env.reset();
  ASSERT_EQ(img.size(), 400u);
  int agent = 0, goal = 0;
  for (float v : img) {
    EXPECT_TRUE(v == 0.0f || v == 128.0f || v == 255.0f);
    agent += v == 255.0f;
    goal += v == 128.0f;
  }
  EXPECT_EQ(agent, 16);  // one 4x4 cell
  EXPECT_EQ(goal, 16);
}

TEST(PixelGridWorld, ContinuousVariantReachesGoal) {
  PixelGridWorld env(3, 12, ActionKind::kContinuous, 50, 0);
  env.reset();
  const std::vector<float> push = {1.0f, 1.0f};
  StepResult r;
  int steps = 0;
  while (!env.done()) {
    r = env.step(push);
    ++steps;
  }
  EXPECT_TRUE(r.terminal);
  EXPECT_TRUE(env.success());
  EXPECT_LE(steps, 4);
}

TEST(Determinism, SameSeedSameTrajectoryBitwise) {
  EnvConfig c;
  c.image_size = 16;
  for (const auto& name : env_names()) {
    auto a = make_env(name, c, 42), b = make_env(name, c, 42);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    auto oa = a->reset(), ob = b->reset();
    EXPECT_EQ(oa, ob);
    for (int t = 0; t < 200; ++t) {
      if (a->done()) {
        oa = a->reset();
        ob = b->reset();
        EXPECT_EQ(oa, ob);
      }
      std::vector<float> act(static_cast<size_t>(a->spec().action_dim));
      for (auto& x : act) x = u(rng);
      const auto ra = a->step(act), rb = b->step(act);
      ASSERT_EQ(ra.obs, rb.obs) << name;
      ASSERT_EQ(std::memcmp(&ra.reward, &rb.reward, sizeof(double)), 0) << name;
      ASSERT_EQ(ra.terminal, rb.terminal);
      ASSERT_EQ(ra.truncated, rb.truncated);
    }
  }
}

TEST(RandomLinearMdp, FeaturesHaveFullColumnRank) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [mdp, fm] = random_linear_mdp(6, 10, 3, seed);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fm.phi);
    const auto& sv = svd.singularValues();
    EXPECT_GT(sv(sv.size() - 1) / sv(0), 1e-8);
    EXPECT_EQ(fm.dim(), 6);
    EXPECT_NO_THROW(mdp.validate());
  }
}

TEST(RandomLinearMdp, FixedSeedGivesIdenticalBytes) {
  const auto [m1, f1] = random_linear_mdp(5, 8, 2, 99);
  const auto [m2, f2] = random_linear_mdp(5, 8, 2, 99);
  EXPECT_EQ(std::memcmp(m1.P.data(), m2.P.data(), sizeof(double) * static_cast<size_t>(m1.P.size())), 0);
  EXPECT_EQ(std::memcmp(m1.R.data(), m2.R.data(), sizeof(double) * static_cast<size_t>(m1.R.size())), 0);
  EXPECT_EQ(std::memcmp(f1.phi.data(), f2.phi.data(), sizeof(double) * static_cast<size_t>(f1.phi.size())), 0);
}

TEST(RandomLinearMdp, DimensionBeyondPairsIsConfigError) {
  EXPECT_THROW(random_linear_mdp(7, 3, 2, 0), ConfigError);
}

TEST(TabularMdp, ValidateRejectsNonStochasticRows) {
  auto [mdp, fm] = random_linear_mdp(3, 4, 2, 1);
  mdp.P(0, 0) += 1e-6;
  EXPECT_THROW(mdp.validate(), ConfigError);
}
