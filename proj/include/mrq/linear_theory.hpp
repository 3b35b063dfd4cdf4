#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrq/tabular.hpp"

namespace mrq::linear {

// Z holds the features z_sa, Znext the expected next features E[z_s'a'] under
// the policy, R the expected rewards. One row per state-action pair.
struct Matrices {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd Znext;
  Eigen::VectorXd R;
};

// Exact expectations. Throws ContractViolation when a policy row is not a
// probability vector, ConfigError on shape mismatch or rank-deficient features.
Matrices build_matrices(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features);

// Finite dataset of n transitions: (s, a) uniform, s' ~ P, a' ~ pi. Rows are
// the sampled z_sa, z_s'a' and R(s, a).
Matrices sample_matrices(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features,
                         int n, std::uint64_t seed);

struct ModelBased {
  Eigen::VectorXd w_r;
  Eigen::MatrixXd W_p;
  Eigen::VectorXd w_mb;
  double feature_condition = 0.0;  // cond(Z)
  double spectral_radius = 0.0;    // of gamma * W_p
  // max |sum_{t<=T} (gamma W_p)^t w_r - w_mb|, present when series_terms > 0
  // and the spectral radius is below 1.
  std::optional<double> series_gap;
};

// Least squares by column-pivoted QR. Throws NumericError when Z is rank
// deficient or I - gamma W_p is singular (message carries the spectral radius).
ModelBased model_based_weights(const Matrices& m, double gamma, int series_terms = 0);

struct ModelFree {
  Eigen::VectorXd w_mf;
  Eigen::MatrixXd A;  // Z'Z - gamma Z' Znext
  Eigen::VectorXd B;  // Z'R
  double condition = 0.0;  // cond(A)
  double residual = 0.0;   // max |A w - B|
  bool iteration_contracts = false;
  int iterations = 0;
  std::optional<double> iteration_gap;  // max |w_iter - w_mf|
};

// Fixed point of semi-gradient TD, w = A^{-1} B. With `iterate`, also runs
// w <- w + alpha (B - A w) until max |dw| <= 1e-12 when every eigenvalue of A
// has positive real part. Throws NumericError when A is singular.
ModelFree td_fixed_point(const Matrices& m, double gamma, bool iterate = false, int max_iterations = 2'000'000);

struct BoundCheck {
  double max_value_error = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// |VE| of the linear solution against exact Q^pi, and the reward/dynamics
// residual bound scaled by 1 / (1 - gamma). The dynamics residual is summed
// over feature dimensions. `holds` allows 1e-10 of rounding slack.
BoundCheck value_error_bound_check(const TabularMDP& mdp, const Eigen::MatrixXd& policy, const FeatureMap& features);

// Embedding classes: state_class[s] is z_s, pair_class[s * A + a] is z_sa.
struct Abstraction {
  std::vector<int> state_class;
  std::vector<int> pair_class;
};

Abstraction identity_abstraction(const TabularMDP& mdp);

// Evaluates the lifted policy on the abstract MDP over z_sa classes and
// returns max over (s, a) of |Q_hat(z_sa) - Q^pi(s, a)|. Throws
// ContractViolation naming the worst pair when rewards or aggregated transition
// mass differ within a class by more than 1e-12, and when z_sa or the policy
// is not a function of z_s.
double homomorphism_value_check(const TabularMDP& mdp, const Abstraction& abs, const Eigen::MatrixXd& policy);

struct HomomorphismExample {
  TabularMDP mdp;
  Abstraction merged;      // states 1 and 2 share an embedding
  Abstraction violating;   // states 0 and 3 share one despite different rewards
  Eigen::MatrixXd policy;  // identical rows, so the lifted policy exists
};

// 4-state chain: 0 moves to 1 or 2 with equal probability, 1 and 2 behave
// identically (action 0 to 3 with reward 1, action 1 back to 0), 3 returns to 0
// with reward 0.5.
HomomorphismExample symmetric_chain(double gamma = 0.99);

struct InstanceReport {
  std::uint64_t seed = 0;
  int states = 0, actions = 0, dim = 0;
  bool skipped = false;
  std::string skip_reason;
  double mf_mb_gap = 0.0;  // max |w_mf - w_mb|
  double a_residual = 0.0;
  double series_gap = 0.0;
  double max_value_error = 0.0;
  double bound = 0.0;
  bool bound_holds = false;
  double condition = 0.0;
};

struct InstanceOptions {
  int max_states = 20;
  int max_actions = 4;
  int max_dim = 10;
  double gamma = 0.99;
  bool tabular = false;        // identity features, d = S * A
  bool duplicate_feature = false;  // last column copies the first
};

// Draws sizes and an instance from `seed` and runs the checks. Rank-deficient
// or singular instances are reported as skipped rather than thrown.
InstanceReport run_instance(std::uint64_t seed, const InstanceOptions& opts);

}  // namespace mrq::linear
