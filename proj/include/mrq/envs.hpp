#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrq/env_spec.hpp"
#include "mrq/tabular.hpp"

namespace mrq {

struct StepResult {
  std::vector<float> obs;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

struct EnvConfig {
  int grid_size = 5;
  int image_size = 84;
  ActionKind pixel_action_kind = ActionKind::kDiscrete;
  int max_episode_steps = 0;  // 0: environment default
  // linear-random-mdp
  int mdp_states = 10;
  int mdp_actions = 3;
  std::uint64_t mdp_seed = 0;
};

class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }
  std::vector<float> reset();
  // Discrete actions are given as a length-action_dim vector and resolved by
  // argmax; continuous actions outside [-1, 1] are clipped and counted.
  StepResult step(std::span<const float> action);

  int elapsed_steps() const { return steps_; }
  bool done() const { return done_; }
  std::uint64_t clipped_action_count() const { return clipped_; }
  // True when the last episode ended by reaching the goal (for success rates).
  virtual bool success() const { return false; }

 protected:
  Env(EnvSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {}
  virtual std::vector<float> do_reset() = 0;
  // Returns reward and terminal flag; the base class handles truncation.
  virtual std::pair<double, bool> do_step(std::span<const float> action) = 0;
  virtual std::vector<float> observe() const = 0;

  EnvSpec spec_;
  std::mt19937_64 rng_;

 private:
  int steps_ = 0;
  bool done_ = true;
  std::uint64_t clipped_ = 0;
};

// Builds a registered environment. Unknown names raise ConfigError.
std::unique_ptr<Env> make_env(const std::string& name, const EnvConfig& config, std::uint64_t seed);
const std::vector<std::string>& env_names();

// Grid with start (0,0) and goal (n-1,n-1); actions up, down, left, right.
// Reward 1 and termination on entering the goal, 0 otherwise.
class GridWorld : public Env {
 public:
  GridWorld(int size, int max_steps, std::uint64_t seed);
  bool success() const override { return reached_; }
  int row() const { return r_; }
  int col() const { return c_; }
  int size() const { return n_; }

 protected:
  std::vector<float> do_reset() override;
  std::pair<double, bool> do_step(std::span<const float> action) override;
  std::vector<float> observe() const override;

 private:
  int n_, r_ = 0, c_ = 0;
  bool reached_ = false;
};

// 2-d point with velocity control in the box [-1, 1]^2. v' = clip(v + 0.05 a, +-0.25),
// p' = clip(p + v', -1, 1); reward -min(1, |p'|); starts at (0.6, 0.6), never terminates.
class PointMass : public Env {
 public:
  static constexpr double kAccel = 0.05;
  static constexpr double kMaxSpeed = 0.25;
  static constexpr double kStart = 0.6;

  PointMass(int max_steps, std::uint64_t seed);

 protected:
  std::vector<float> do_reset() override;
  std::pair<double, bool> do_step(std::span<const float> action) override;
  std::vector<float> observe() const override;

 private:
  double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0;
};

// Upper bound on the pointmass episode return: each axis can close at most
// sum_{k<=t} min(0.05 k, 0.25) of its 0.6 offset after t steps.
double pointmass_return_bound(int max_steps);
// Return of the all-zero action policy (the point never moves).
double pointmass_zero_action_return(int max_steps);

// The gridworld rendered as a single-channel image. The agent cell is 255,
// the goal cell 128, the rest 0. Starts are uniform over non-goal cells. The
// continuous variant moves a real-valued position by 0.5 * a cells per step and
// succeeds once within half a cell of the goal center.
class PixelGridWorld : public Env {
 public:
  PixelGridWorld(int grid, int image_size, ActionKind kind, int max_steps, std::uint64_t seed);
  bool success() const override { return reached_; }
  int grid() const { return n_; }

 protected:
  std::vector<float> do_reset() override;
  std::pair<double, bool> do_step(std::span<const float> action) override;
  std::vector<float> observe() const override;

 private:
  int n_, img_;
  double x_ = 0, y_ = 0;  // column, row in cell units
  bool reached_ = false;
};

// A TabularMDP as an environment with one-hot state observations.
class TabularEnv : public Env {
 public:
  TabularEnv(TabularMDP mdp, int max_steps, std::uint64_t seed, std::string name = "linear-random-mdp");
  const TabularMDP& mdp() const { return mdp_; }
  int state() const { return s_; }

 protected:
  std::vector<float> do_reset() override;
  std::pair<double, bool> do_step(std::span<const float> action) override;
  std::vector<float> observe() const override;

 private:
  TabularMDP mdp_;
  int s_ = 0;
};

// Tabular form of the gridworld; the goal is absorbing. Used by optimal_return.
TabularMDP gridworld_mdp(int size, bool random_start);

// Exact optimal undiscounted expected episode return by backward induction.
// Continuous-action environments raise UnsupportedError.
double optimal_return(const Env& env);

}  // namespace mrq
