#include "mrq/linear_theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mrq/errors.hpp"

namespace mrq::linear {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kSingularCondition = 1e12;

void check_policy(const TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions) {
    throw ContractViolation("policy table must be [S, A]");
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    if ((policy.row(s).array() < 0.0).any() || std::abs(policy.row(s).sum() - 1.0) > kStochasticTol) {
      throw ContractViolation("policy row " + std::to_string(s) + " is not a probability vector");
    }
  }
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double lo = sv(sv.size() - 1);
  return lo == 0.0 ? INFINITY : sv(0) / lo;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Matrices build_matrices(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features) {
  check_policy(mdp, policy);
  if (features.phi.rows() != mdp.pairs()) throw ConfigError("feature map must have S*A rows");
  if (numerical_rank(features.phi) < features.dim()) throw ConfigError("feature map is not full column rank");
  Matrices m;
  m.Z = features.phi;
  m.Znext = state_action_transition(mdp, policy) * features.phi;
  m.R = mdp.reward_vector();
  return m;
}

Matrices sample_matrices(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features, int n,
                         std::uint64_t seed) {
  check_policy(mdp, policy);
  if (n < 1) throw ConfigError("dataset size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pair(0, mdp.pairs() - 1);
  auto draw = [&](const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    std::discrete_distribution<int> d(p.data(), p.data() + p.size());
    return d(rng);
  };
  const int d = features.dim();
  Matrices m{Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    const int k = pair(rng);
    const int s = k / mdp.n_actions, a = k % mdp.n_actions;
    const Eigen::RowVectorXd prow = mdp.P.row(k);
    const int s2 = draw(prow);
    const Eigen::RowVectorXd pirow = policy.row(s2);
    const int a2 = draw(pirow);
    m.Z.row(i) = features.phi.row(k);
    m.Znext.row(i) = features.phi.row(mdp.row(s2, a2));
    m.R(i) = mdp.R(s, a);
  }
  return m;
}

ModelBased model_based_weights(const Matrices& m, double gamma, int series_terms) {
  const Eigen::Index d = m.Z.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.Z);
  if (qr.rank() < d) {
    throw NumericError("features are rank deficient (rank " + std::to_string(qr.rank()) + " < " + std::to_string(d) +
                       ")");
  }
  ModelBased out;
  out.feature_condition = condition_number(m.Z);
  out.w_r = qr.solve(m.R);
  out.W_p = qr.solve(m.Znext);
  const Eigen::MatrixXd gW = gamma * out.W_p;
  out.spectral_radius = spectral_radius(gW);
  const Eigen::MatrixXd I_gW = Eigen::MatrixXd::Identity(d, d) - gW;
  const double cond = condition_number(I_gW);
  if (!(cond < kSingularCondition)) {
    std::ostringstream msg;
    msg << "I - gamma W_p is singular (condition " << cond << ", spectral radius of gamma W_p " << out.spectral_radius
        << ")";
    throw NumericError(msg.str());
  }
  out.w_mb = I_gW.partialPivLu().solve(out.w_r);
  if (series_terms > 0 && out.spectral_radius < 1.0) {
    Eigen::VectorXd term = out.w_r, sum = out.w_r;
    for (int t = 1; t <= series_terms; ++t) {
      term = gW * term;
      sum += term;
      if (term.cwiseAbs().maxCoeff() < 1e-300) break;
    }
    out.series_gap = (sum - out.w_mb).cwiseAbs().maxCoeff();
  }
  return out;
}

ModelFree td_fixed_point(const Matrices& m, double gamma, bool iterate, int max_iterations) {
  ModelFree out;
  out.A = m.Z.transpose() * m.Z - gamma * m.Z.transpose() * m.Znext;
  out.B = m.Z.transpose() * m.R;
  out.condition = condition_number(out.A);
  if (!(out.condition < kSingularCondition)) {
    std::ostringstream msg;
    msg << "TD matrix A is singular (condition " << out.condition << ")";
    throw NumericError(msg.str());
  }
  out.w_mf = out.A.fullPivLu().solve(out.B);
  out.residual = (out.A * out.w_mf - out.B).cwiseAbs().maxCoeff();
  if (!iterate) return out;

  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(out.A, false).eigenvalues();
  double alpha = INFINITY;
  out.iteration_contracts = true;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const double re = eig(i).real();
    if (re <= 0.0) {
      out.iteration_contracts = false;
      break;
    }
    // |1 - alpha lambda|^2 <= 1 - alpha Re(lambda) whenever alpha |lambda|^2 <= Re(lambda).
    alpha = std::min(alpha, re / std::norm(eig(i)));
  }
  if (!out.iteration_contracts) return out;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(out.B.size());
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd dw = alpha * (out.B - out.A * w);
    w += dw;
    out.iterations = it;
    if (dw.cwiseAbs().maxCoeff() <= 1e-12) break;
  }
  out.iteration_gap = (w - out.w_mf).cwiseAbs().maxCoeff();
  return out;
}

BoundCheck value_error_bound_check(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features) {
  const Matrices m = build_matrices(mdp, policy, features);
  const ModelBased mb = model_based_weights(m, mdp.gamma);
  const ModelFree mf = td_fixed_point(m, mdp.gamma);
  const Eigen::VectorXd q_pi = policy_evaluation(mdp, policy);
  BoundCheck out;
  out.max_value_error = (m.Z * mf.w_mf - q_pi).cwiseAbs().maxCoeff();
  const Eigen::VectorXd reward_res = (m.Z * mb.w_r - m.R).cwiseAbs();
  const Eigen::VectorXd dyn_res = (m.Z * mb.W_p - m.Znext).cwiseAbs().rowwise().sum();
  const double w_max = mf.w_mf.cwiseAbs().maxCoeff();
  out.bound = (reward_res + w_max * dyn_res).maxCoeff() / (1.0 - mdp.gamma);
  // Slack for rounding when both sides vanish (features that represent Q exactly).
  out.holds = out.max_value_error <= out.bound + 1e-10;
  return out;
}

Abstraction identity_abstraction(const TabularMDP& mdp) {
  Abstraction a;
  for (int s = 0; s < mdp.n_states; ++s) a.state_class.push_back(s);
  for (int k = 0; k < mdp.pairs(); ++k) a.pair_class.push_back(k);
  return a;
}

double homomorphism_value_check(const TabularMDP& mdp, const Abstraction& abs, const Eigen::MatrixXd& policy) {
  check_policy(mdp, policy);
  const int S = mdp.n_states, A = mdp.n_actions;
  if (static_cast<int>(abs.state_class.size()) != S || static_cast<int>(abs.pair_class.size()) != S * A) {
    throw ConfigError("abstraction maps must cover every state and state-action pair");
  }
  const int n_zs = *std::max_element(abs.state_class.begin(), abs.state_class.end()) + 1;
  const int n_zsa = *std::max_element(abs.pair_class.begin(), abs.pair_class.end()) + 1;
  if (*std::min_element(abs.state_class.begin(), abs.state_class.end()) < 0 ||
      *std::min_element(abs.pair_class.begin(), abs.pair_class.end()) < 0) {
    throw ConfigError("abstraction class ids must be nonnegative");
  }

  // z_sa = g(z_s, a) and pi_hat(a | z_s) = pi(a | s) must be well defined.
  std::vector<int> rep(static_cast<size_t>(n_zs), -1);
  for (int s = 0; s < S; ++s) {
    int& r = rep[static_cast<size_t>(abs.state_class[static_cast<size_t>(s)])];
    if (r < 0) {
      r = s;
      continue;
    }
    for (int a = 0; a < A; ++a) {
      if (abs.pair_class[static_cast<size_t>(mdp.row(s, a))] != abs.pair_class[static_cast<size_t>(mdp.row(r, a))]) {
        throw ContractViolation("z_sa is not a function of (z_s, a): states " + std::to_string(r) + " and " +
                                std::to_string(s) + " disagree on action " + std::to_string(a));
      }
      if (std::abs(policy(s, a) - policy(r, a)) > kStochasticTol) {
        throw ContractViolation("policy differs between states " + std::to_string(r) + " and " + std::to_string(s) +
                                " of the same embedding class");
      }
    }
  }

  // Aggregated transition mass over z_s' classes, per pair.
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(S * A, n_zs);
  for (int k = 0; k < S * A; ++k) {
    for (int s2 = 0; s2 < S; ++s2) agg(k, abs.state_class[static_cast<size_t>(s2)]) += mdp.P(k, s2);
  }
  const Eigen::VectorXd r = mdp.reward_vector();
  std::vector<int> krep(static_cast<size_t>(n_zsa), -1);
  double worst = 0.0;
  int worst_a = -1, worst_b = -1;
  for (int k = 0; k < S * A; ++k) {
    int& kr = krep[static_cast<size_t>(abs.pair_class[static_cast<size_t>(k)])];
    if (kr < 0) {
      kr = k;
      continue;
    }
    const double v = std::max(std::abs(r(k) - r(kr)), (agg.row(k) - agg.row(kr)).cwiseAbs().maxCoeff());
    if (v > worst) {
      worst = v;
      worst_a = kr;
      worst_b = k;
    }
  }
  if (worst > 1e-12) {
    std::ostringstream msg;
    msg << "abstraction violates the homomorphism condition: pairs (s=" << worst_a / A << ", a=" << worst_a % A
        << ") and (s=" << worst_b / A << ", a=" << worst_b % A << ") differ by " << worst
        << " in reward or aggregated transition mass";
    throw ContractViolation(msg.str());
  }
  for (int c = 0; c < n_zsa; ++c) {
    if (krep[static_cast<size_t>(c)] < 0) throw ConfigError("unused z_sa class " + std::to_string(c));
  }

  // Abstract evaluation: Q(k) = r(k) + gamma sum_z p(z | k) sum_a pi(a | z) Q(g(z, a)).
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n_zsa, n_zsa);
  Eigen::VectorXd rhat(n_zsa);
  for (int c = 0; c < n_zsa; ++c) {
    const int k = krep[static_cast<size_t>(c)];
    rhat(c) = r(k);
    for (int z = 0; z < n_zs; ++z) {
      const double p = agg(k, z);
      if (p == 0.0) continue;
      const int s_rep = rep[static_cast<size_t>(z)];
      if (s_rep < 0) throw ConfigError("unused z_s class " + std::to_string(z));
      for (int a = 0; a < A; ++a) {
        M(c, abs.pair_class[static_cast<size_t>(mdp.row(s_rep, a))]) -= mdp.gamma * p * policy(s_rep, a);
      }
    }
  }
  const Eigen::VectorXd qhat = M.partialPivLu().solve(rhat);
  const Eigen::VectorXd q_pi = policy_evaluation(mdp, policy);
  double gap = 0.0;
  for (int k = 0; k < S * A; ++k) gap = std::max(gap, std::abs(qhat(abs.pair_class[static_cast<size_t>(k)]) - q_pi(k)));
  return gap;
}

HomomorphismExample symmetric_chain(double gamma) {
  HomomorphismExample ex;
  TabularMDP& m = ex.mdp;
  m.n_states = 4;
  m.n_actions = 2;
  m.gamma = gamma;
  m.P = Eigen::MatrixXd::Zero(8, 4);
  m.R = Eigen::MatrixXd::Zero(4, 2);
  for (int a = 0; a < 2; ++a) {
    m.P(m.row(0, a), 1) = 0.5;
    m.P(m.row(0, a), 2) = 0.5;
    m.P(m.row(3, a), 0) = 1.0;
    m.R(3, a) = 0.5;
  }
  for (int s : {1, 2}) {
    m.P(m.row(s, 0), 3) = 1.0;
    m.R(s, 0) = 1.0;
    m.P(m.row(s, 1), 0) = 1.0;
  }
  m.initial = Eigen::VectorXd::Constant(4, 0.25);
  ex.merged.state_class = {0, 1, 1, 2};
  ex.merged.pair_class = {0, 1, 2, 3, 2, 3, 4, 5};
  ex.violating.state_class = {0, 1, 2, 0};
  ex.violating.pair_class = {0, 1, 2, 3, 4, 5, 0, 1};
  ex.policy = Eigen::MatrixXd(4, 2);
  ex.policy.rowwise() = Eigen::RowVector2d(0.3, 0.7);
  return ex;
}

InstanceReport run_instance(std::uint64_t seed, const InstanceOptions& opts) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  InstanceReport rep;
  rep.seed = seed;
  rep.states = pick(2, std::max(2, opts.max_states));
  rep.actions = pick(1, std::max(1, opts.max_actions));
  const int full = rep.states * rep.actions;
  rep.dim = opts.tabular ? full : pick(opts.duplicate_feature ? 2 : 1, std::max(2, std::min(opts.max_dim, full)));
  rep.dim = std::min(rep.dim, full);
  try {
    RandomMdpOptions mo;
    mo.gamma = opts.gamma;
    auto [mdp, fm] = random_linear_mdp(rep.dim, rep.states, rep.actions, rng(), mo);
    if (opts.tabular) fm.phi = Eigen::MatrixXd::Identity(full, full);
    if (opts.duplicate_feature && fm.dim() >= 2) fm.phi.col(fm.dim() - 1) = fm.phi.col(0);
    const Eigen::MatrixXd pi = random_policy(rep.states, rep.actions, rng());
    const Matrices m = build_matrices(mdp, pi, fm);
    const ModelBased mb = model_based_weights(m, mdp.gamma, 10'000);
    const ModelFree mf = td_fixed_point(m, mdp.gamma);
    rep.mf_mb_gap = (mf.w_mf - mb.w_mb).cwiseAbs().maxCoeff();
    rep.a_residual = mf.residual;
    rep.series_gap = mb.series_gap.value_or(0.0);
    rep.condition = mf.condition;
    const BoundCheck bc = value_error_bound_check(mdp, pi, fm);
    rep.max_value_error = bc.max_value_error;
    rep.bound = bc.bound;
    rep.bound_holds = bc.holds;
  } catch (const NumericError& e) {
    rep.skipped = true;
    rep.skip_reason = e.what();
  } catch (const ConfigError& e) {
    rep.skipped = true;
    rep.skip_reason = e.what();
  }
  return rep;
}

}  // namespace mrq::linear
