#include "mrq/envs.hpp"

#include <algorithm>
#include <cmath>

#include "mrq/errors.hpp"

namespace mrq {

namespace {

int argmax(std::span<const float> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// up, down, left, right as (drow, dcol)
constexpr int kMoves[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

}  // namespace

std::vector<float> Env::reset() {
  steps_ = 0;
  done_ = false;
  return do_reset();
}

StepResult Env::step(std::span<const float> action) {
  if (done_) throw ContractViolation(spec_.name + ": step() called on a finished episode; call reset()");
  if (static_cast<int>(action.size()) != spec_.action_dim) {
    throw ContractViolation(spec_.name + ": action has " + std::to_string(action.size()) + " components, expected " +
                            std::to_string(spec_.action_dim));
  }
  std::vector<float> a(action.begin(), action.end());
  if (!spec_.discrete()) {
    for (float& x : a) {
      if (!std::isfinite(x)) throw ContractViolation(spec_.name + ": non-finite action");
      if (x < spec_.action_low || x > spec_.action_high) {
        x = std::clamp(x, static_cast<float>(spec_.action_low), static_cast<float>(spec_.action_high));
        ++clipped_;
      }
    }
  }
  const auto [reward, terminal] = do_step(a);
  ++steps_;
  StepResult out;
  out.obs = observe();
  out.reward = reward;
  out.terminal = terminal;
  out.truncated = !terminal && steps_ >= spec_.max_episode_steps;
  done_ = out.terminal || out.truncated;
  return out;
}

GridWorld::GridWorld(int size, int max_steps, std::uint64_t seed)
    : Env(EnvSpec{"gridworld-discrete", ObsKind::kVector, {size * size}, ActionKind::kDiscrete, 4, -1, 1, max_steps},
          seed),
      n_(size) {
  if (size < 2) throw ConfigError("gridworld size must be >= 2");
}

std::vector<float> GridWorld::do_reset() {
  r_ = c_ = 0;
  reached_ = false;
  return observe();
}

std::pair<double, bool> GridWorld::do_step(std::span<const float> action) {
  const int a = argmax(action);
  r_ = std::clamp(r_ + kMoves[a][0], 0, n_ - 1);
  c_ = std::clamp(c_ + kMoves[a][1], 0, n_ - 1);
  reached_ = r_ == n_ - 1 && c_ == n_ - 1;
  return {reached_ ? 1.0 : 0.0, reached_};
}

std::vector<float> GridWorld::observe() const {
  std::vector<float> obs(static_cast<size_t>(n_ * n_), 0.0f);
  obs[static_cast<size_t>(r_ * n_ + c_)] = 1.0f;
  return obs;
}

PointMass::PointMass(int max_steps, std::uint64_t seed)
    : Env(EnvSpec{"pointmass-continuous", ObsKind::kVector, {4}, ActionKind::kContinuous, 2, -1, 1, max_steps}, seed) {}

std::vector<float> PointMass::do_reset() {
  px_ = py_ = kStart;
  vx_ = vy_ = 0.0;
  return observe();
}

std::pair<double, bool> PointMass::do_step(std::span<const float> action) {
  vx_ = std::clamp(vx_ + kAccel * action[0], -kMaxSpeed, kMaxSpeed);
  vy_ = std::clamp(vy_ + kAccel * action[1], -kMaxSpeed, kMaxSpeed);
  px_ = std::clamp(px_ + vx_, -1.0, 1.0);
  py_ = std::clamp(py_ + vy_, -1.0, 1.0);
  return {-std::min(1.0, std::hypot(px_, py_)), false};
}

std::vector<float> PointMass::observe() const {
  return {static_cast<float>(px_), static_cast<float>(py_), static_cast<float>(vx_), static_cast<float>(vy_)};
}

double pointmass_return_bound(int max_steps) {
  double total = 0.0, reach = 0.0;
  for (int t = 1; t <= max_steps; ++t) {
    reach += std::min(PointMass::kAccel * t, PointMass::kMaxSpeed);
    const double per_axis = std::max(0.0, PointMass::kStart - reach);
    total -= std::min(1.0, std::sqrt(2.0) * per_axis);
  }
  return total;
}

double pointmass_zero_action_return(int max_steps) {
  return -max_steps * std::min(1.0, std::sqrt(2.0) * PointMass::kStart);
}

PixelGridWorld::PixelGridWorld(int grid, int image_size, ActionKind kind, int max_steps, std::uint64_t seed)
    : Env(EnvSpec{"pixel-gridworld", ObsKind::kPixel, {1, image_size, image_size}, kind,
                  kind == ActionKind::kDiscrete ? 4 : 2, -1, 1, max_steps},
          seed),
      n_(grid),
      img_(image_size) {
  if (grid < 2) throw ConfigError("pixel-gridworld grid size must be >= 2");
  if (image_size < grid) throw ConfigError("pixel-gridworld image must have at least one pixel per cell");
}

std::vector<float> PixelGridWorld::do_reset() {
  std::uniform_int_distribution<int> cell(0, n_ * n_ - 2);  // excludes the goal, the last cell
  const int k = cell(rng_);
  y_ = k / n_;
  x_ = k % n_;
  reached_ = false;
  return observe();
}

std::pair<double, bool> PixelGridWorld::do_step(std::span<const float> action) {
  const double goal = n_ - 1;
  if (spec_.discrete()) {
    const int a = argmax(action);
    y_ = std::clamp<double>(y_ + kMoves[a][0], 0, goal);
    x_ = std::clamp<double>(x_ + kMoves[a][1], 0, goal);
    reached_ = y_ == goal && x_ == goal;
  } else {
    x_ = std::clamp(x_ + 0.5 * action[0], 0.0, goal);
    y_ = std::clamp(y_ + 0.5 * action[1], 0.0, goal);
    reached_ = std::abs(x_ - goal) <= 0.5 && std::abs(y_ - goal) <= 0.5;
  }
  return {reached_ ? 1.0 : 0.0, reached_};
}

std::vector<float> PixelGridWorld::observe() const {
  std::vector<float> img(static_cast<size_t>(img_ * img_), 0.0f);
  const int ar = static_cast<int>(std::lround(y_)), ac = static_cast<int>(std::lround(x_));
  for (int i = 0; i < img_; ++i) {
    const int cr = i * n_ / img_;
    for (int j = 0; j < img_; ++j) {
      const int cc = j * n_ / img_;
      float v = 0.0f;
      if (cr == n_ - 1 && cc == n_ - 1) v = 128.0f;
      if (cr == ar && cc == ac) v = 255.0f;
      img[static_cast<size_t>(i * img_ + j)] = v;
    }
  }
  return img;
}

TabularEnv::TabularEnv(TabularMDP mdp, int max_steps, std::uint64_t seed, std::string name)
    : Env(EnvSpec{std::move(name), ObsKind::kVector, {mdp.n_states}, ActionKind::kDiscrete, mdp.n_actions, -1, 1,
                  max_steps},
          seed),
      mdp_(std::move(mdp)) {
  mdp_.validate();
}

namespace {

int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng), acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (x < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = p.size() - 1; i >= 0; --i) {
    if (p(i) > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

std::vector<float> TabularEnv::do_reset() {
  s_ = sample_categorical(mdp_.initial.transpose(), rng_);
  return observe();
}

std::pair<double, bool> TabularEnv::do_step(std::span<const float> action) {
  const int a = argmax(action);
  const double r = mdp_.R(s_, a);
  s_ = sample_categorical(mdp_.P.row(mdp_.row(s_, a)), rng_);
  const bool term = !mdp_.absorbing.empty() && mdp_.absorbing[static_cast<size_t>(s_)];
  return {r, term};
}

std::vector<float> TabularEnv::observe() const {
  std::vector<float> obs(static_cast<size_t>(mdp_.n_states), 0.0f);
  obs[static_cast<size_t>(s_)] = 1.0f;
  return obs;
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names = {"gridworld-discrete", "pointmass-continuous", "pixel-gridworld",
                                                 "linear-random-mdp"};
  return names;
}

std::unique_ptr<Env> make_env(const std::string& name, const EnvConfig& c, std::uint64_t seed) {
  auto steps = [&](int def) { return c.max_episode_steps > 0 ? c.max_episode_steps : def; };
  if (name == "gridworld-discrete") return std::make_unique<GridWorld>(c.grid_size, steps(50), seed);
  if (name == "pointmass-continuous") return std::make_unique<PointMass>(steps(100), seed);
  if (name == "pixel-gridworld") {
    return std::make_unique<PixelGridWorld>(c.grid_size, c.image_size, c.pixel_action_kind, steps(50), seed);
  }
  if (name == "linear-random-mdp") {
    const int d = std::min(4, c.mdp_states * c.mdp_actions);
    auto [mdp, features] = random_linear_mdp(d, c.mdp_states, c.mdp_actions, c.mdp_seed);
    return std::make_unique<TabularEnv>(std::move(mdp), steps(100), seed);
  }
  std::string valid;
  for (const auto& n : env_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown environment '" + name + "' (valid: " + valid + ")");
}

TabularMDP gridworld_mdp(int size, bool random_start) {
  TabularMDP m;
  m.n_states = size * size;
  m.n_actions = 4;
  m.gamma = 0.99;
  m.P = Eigen::MatrixXd::Zero(m.pairs(), m.n_states);
  m.R = Eigen::MatrixXd::Zero(m.n_states, m.n_actions);
  const int goal = m.n_states - 1;
  m.absorbing.assign(static_cast<size_t>(m.n_states), false);
  m.absorbing[static_cast<size_t>(goal)] = true;
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      if (s == goal) {
        m.P(m.row(s, a), s) = 1.0;
        continue;
      }
      const int r = std::clamp(s / size + kMoves[a][0], 0, size - 1);
      const int c = std::clamp(s % size + kMoves[a][1], 0, size - 1);
      const int s2 = r * size + c;
      m.P(m.row(s, a), s2) = 1.0;
      if (s2 == goal) m.R(s, a) = 1.0;
    }
  }
  m.initial = Eigen::VectorXd::Zero(m.n_states);
  if (random_start) {
    m.initial.head(goal).setConstant(1.0 / goal);
  } else {
    m.initial(0) = 1.0;
  }
  return m;
}

double optimal_return(const Env& env) {
  const EnvSpec& s = env.spec();
  if (!s.discrete()) throw UnsupportedError(s.name + ": no exact optimum for continuous actions; see pointmass_return_bound");
  if (const auto* g = dynamic_cast<const GridWorld*>(&env)) {
    return finite_horizon_optimal_return(gridworld_mdp(g->size(), false), s.max_episode_steps);
  }
  if (const auto* p = dynamic_cast<const PixelGridWorld*>(&env)) {
    return finite_horizon_optimal_return(gridworld_mdp(p->grid(), true), s.max_episode_steps);
  }
  if (const auto* t = dynamic_cast<const TabularEnv*>(&env)) {
    return finite_horizon_optimal_return(t->mdp(), s.max_episode_steps);
  }
  throw UnsupportedError(s.name + ": no exact optimum available");
}

}  // namespace mrq
