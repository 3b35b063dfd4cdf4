#include "mrq/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mrq/errors.hpp"

namespace mrq {

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1) throw ConfigError("MDP needs at least one state and one action");
  if (P.rows() != pairs() || P.cols() != n_states) throw ConfigError("transition tensor has wrong shape");
  if (R.rows() != n_states || R.cols() != n_actions) throw ConfigError("reward matrix has wrong shape");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  if (initial.size() != n_states) throw ConfigError("initial distribution has wrong size");
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    if ((P.row(r).array() < 0.0).any() || std::abs(P.row(r).sum() - 1.0) > 1e-12) {
      throw ConfigError("transition row " + std::to_string(r) + " is not a probability vector");
    }
  }
  if ((initial.array() < 0.0).any() || std::abs(initial.sum() - 1.0) > 1e-12) {
    throw ConfigError("initial distribution is not a probability vector");
  }
}

Eigen::VectorXd TabularMDP::reward_vector() const {
  Eigen::VectorXd r(pairs());
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) r(row(s, a)) = R(s, a);
  }
  return r;
}

namespace {

Eigen::MatrixXd backup(const TabularMDP& mdp, const Eigen::VectorXd& V) {
  const Eigen::VectorXd next = mdp.P * V;
  Eigen::MatrixXd Q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) Q(s, a) = mdp.R(s, a) + mdp.gamma * next(mdp.row(s, a));
  }
  return Q;
}

}  // namespace

double bellman_residual(const TabularMDP& mdp, const Eigen::VectorXd& V) {
  const Eigen::MatrixXd Q = backup(mdp, V);
  return (Q.rowwise().maxCoeff() - V).cwiseAbs().maxCoeff();
}

ValueIterationResult value_iteration(const TabularMDP& mdp, double tol, int max_iter) {
  mdp.validate();
  ValueIterationResult out;
  out.V = Eigen::VectorXd::Zero(mdp.n_states);
  for (int it = 0; it < max_iter; ++it) {
    out.Q = backup(mdp, out.V);
    const Eigen::VectorXd V2 = out.Q.rowwise().maxCoeff();
    out.residual = (V2 - out.V).cwiseAbs().maxCoeff();
    out.V = V2;
    out.iterations = it + 1;
    // The residual of the new iterate is at most gamma times this change.
    if (out.residual * mdp.gamma <= tol) break;
  }
  out.Q = backup(mdp, out.V);
  out.residual = bellman_residual(mdp, out.V);
  // Finish with policy iteration when the contraction is too slow to reach
  // tol in floating point; it terminates exactly in finitely many steps.
  for (int round = 0; round < 100 && out.residual > tol; ++round) {
    Eigen::MatrixXd greedy = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    std::vector<Eigen::Index> choice(static_cast<size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
      out.Q.row(s).maxCoeff(&choice[static_cast<size_t>(s)]);
      greedy(s, choice[static_cast<size_t>(s)]) = 1.0;
    }
    const Eigen::VectorXd q = policy_evaluation(mdp, greedy);
    for (int s = 0; s < mdp.n_states; ++s) out.V(s) = q(mdp.row(s, static_cast<int>(choice[static_cast<size_t>(s)])));
    out.Q = backup(mdp, out.V);
    out.residual = bellman_residual(mdp, out.V);
  }
  return out;
}

Eigen::MatrixXd state_action_transition(const TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions) throw ConfigError("policy table has wrong shape");
  Eigen::MatrixXd Ppi = Eigen::MatrixXd::Zero(mdp.pairs(), mdp.pairs());
  for (int r = 0; r < mdp.pairs(); ++r) {
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
      const double p = mdp.P(r, s2);
      if (p == 0.0) continue;
      for (int a2 = 0; a2 < mdp.n_actions; ++a2) Ppi(r, mdp.row(s2, a2)) += p * policy(s2, a2);
    }
  }
  return Ppi;
}

Eigen::VectorXd policy_evaluation(const TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  const Eigen::MatrixXd Ppi = state_action_transition(mdp, policy);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(mdp.pairs(), mdp.pairs()) - mdp.gamma * Ppi;
  return A.partialPivLu().solve(mdp.reward_vector());
}

double finite_horizon_optimal_return(const TabularMDP& mdp, int horizon) {
  if (horizon < 0) throw ConfigError("horizon must be nonnegative");
  Eigen::VectorXd V = Eigen::VectorXd::Zero(mdp.n_states);
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd next = mdp.P * V;
    Eigen::VectorXd V2(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (!mdp.absorbing.empty() && mdp.absorbing[static_cast<size_t>(s)]) {
        V2(s) = 0.0;
        continue;
      }
      double best = -INFINITY;
      for (int a = 0; a < mdp.n_actions; ++a) best = std::max(best, mdp.R(s, a) + next(mdp.row(s, a)));
      V2(s) = best;
    }
    V = V2;
  }
  return mdp.initial.dot(V);
}

int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  return static_cast<int>(qr.rank());
}

std::pair<TabularMDP, FeatureMap> random_linear_mdp(int d, int n_states, int n_actions, std::uint64_t seed,
                                                    const RandomMdpOptions& opts) {
  if (n_states < 1 || n_actions < 1) throw ConfigError("random MDP needs positive sizes");
  if (d < 1 || d > n_states * n_actions) {
    throw ConfigError("feature dimension " + std::to_string(d) + " must lie in [1, S*A]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = opts.gamma;
  mdp.P.resize(mdp.pairs(), n_states);
  for (int r = 0; r < mdp.pairs(); ++r) {
    // Exponential draws normalized to a simplex are Dirichlet(1,...,1).
    for (int s2 = 0; s2 < n_states; ++s2) mdp.P(r, s2) = -std::log(1.0 - unit(rng));
    mdp.P.row(r) /= mdp.P.row(r).sum();
  }
  mdp.R.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) mdp.R(s, a) = opts.reward_scale * (2.0 * unit(rng) - 1.0);
  }
  mdp.initial = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);

  FeatureMap fm;
  fm.phi.resize(mdp.pairs(), d);
  for (Eigen::Index i = 0; i < fm.phi.size(); ++i) fm.phi.data()[i] = normal(rng);
  int attempt = 0;
  while (numerical_rank(fm.phi) < d) {
    if (++attempt > 3) throw NumericError("could not generate a full-rank feature matrix after 3 retries");
    for (Eigen::Index i = 0; i < fm.phi.size(); ++i) fm.phi.data()[i] += 1e-3 * normal(rng);
  }
  return {std::move(mdp), std::move(fm)};
}

Eigen::MatrixXd random_policy(int n_states, int n_actions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) pi(s, a) = -std::log(1.0 - unit(rng));
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

}  // namespace mrq
