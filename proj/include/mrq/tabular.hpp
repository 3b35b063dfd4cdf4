#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace mrq {

// Enumerable MDP. Index convention for state-action rows: s * n_actions + a.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  Eigen::MatrixXd P;  // [S*A, S]
  Eigen::MatrixXd R;  // [S, A] expected rewards
  double gamma = 0.99;
  Eigen::VectorXd initial;  // [S]
  std::vector<bool> absorbing;  // optional; absorbing states end the episode

  int pairs() const { return n_states * n_actions; }
  int row(int s, int a) const { return s * n_actions + a; }
  double p(int s, int a, int s2) const { return P(row(s, a), s2); }

  // Throws ConfigError on shape errors or rows that are not probability vectors (tolerance 1e-12).
  void validate() const;
  // Flattened R as a [S*A] vector in row order.
  Eigen::VectorXd reward_vector() const;
};

struct ValueIterationResult {
  Eigen::VectorXd V;  // [S]
  Eigen::MatrixXd Q;  // [S, A]
  double residual = 0.0;
  int iterations = 0;
};

// Discounted optimal values; iterates until the Bellman residual is <= tol.
ValueIterationResult value_iteration(const TabularMDP& mdp, double tol = 1e-10, int max_iter = 1'000'000);

// max over states of |V - max_a (R + gamma P V)|.
double bellman_residual(const TabularMDP& mdp, const Eigen::VectorXd& V);

// Exact Q^pi = (I - gamma P^pi)^{-1} r as a [S*A] vector. policy is [S, A].
Eigen::VectorXd policy_evaluation(const TabularMDP& mdp, const Eigen::MatrixXd& policy);

// P^pi over state-action pairs: [S*A, S*A].
Eigen::MatrixXd state_action_transition(const TabularMDP& mdp, const Eigen::MatrixXd& policy);

// Expected optimal undiscounted return over `horizon` steps from the initial
// distribution, by backward induction. Absorbing states collect no further reward.
double finite_horizon_optimal_return(const TabularMDP& mdp, int horizon);

struct FeatureMap {
  Eigen::MatrixXd phi;  // [S*A, d]
  int dim() const { return static_cast<int>(phi.cols()); }
};

int numerical_rank(const Eigen::MatrixXd& m);

struct RandomMdpOptions {
  double gamma = 0.99;
  double reward_scale = 1.0;
};

// Random MDP with Dirichlet-like transition rows and a full-column-rank
// feature matrix. Rank-deficient draws are perturbed and rechecked up to 3 times.
std::pair<TabularMDP, FeatureMap> random_linear_mdp(int d, int n_states, int n_actions, std::uint64_t seed,
                                                    const RandomMdpOptions& opts = {});

// Uniformly random stochastic policy table [S, A].
Eigen::MatrixXd random_policy(int n_states, int n_actions, std::uint64_t seed);

}  // namespace mrq
