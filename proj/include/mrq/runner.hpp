#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrq/agent.hpp"
#include "mrq/config.hpp"
#include "mrq/envs.hpp"
#include "mrq/stats.hpp"

namespace mrq {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitNumeric = 3 };

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<double> returns;
};

// Noiseless episodes; the agent's RNG is not touched.
EvalResult evaluate(Agent<float>& agent, Env& env, int episodes);

struct RunOptions {
  bool write_files = true;  // manifest, metrics, timings, checkpoints under cfg.out_dir
  bool quiet = true;
  // Stops early once it returns true; called after each evaluation.
  std::function<bool(long step, const EvalResult&)> stop_when;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string error;
  long steps = 0;
  std::vector<std::pair<long, EvalResult>> evals;
  double wall_seconds = 0.0;
  double final_eval_return() const { return evals.empty() ? 0.0 : evals.back().second.mean_return; }
};

// Interaction loop: act, store, train replay_ratio times once past the random
// phase, evaluate every eval_every steps and at the end. A NumericError saves
// a checkpoint and returns kExitNumeric.
RunResult run_training(RunConfig cfg, const RunOptions& opts = {});

struct AblationRow {
  std::string variant;
  std::string env;
  std::vector<double> finals;  // final eval return per seed
  Interval delta;              // variant minus baseline, paired by seed
  Interval normalized_delta;   // delta divided by |optimal return| when it exists, else by |baseline mean|
  int failed_runs = 0;
};

struct AblationReport {
  std::vector<AblationRow> baselines;  // one per env
  std::vector<AblationRow> rows;       // variant x env
  int exit_code = kExitOk;
};

// Baseline plus each variant on every env and seed. Runs go to
// base.out_dir/<env>/<variant>/seed_<k>.
AblationReport run_ablation(const RunConfig& base, const std::vector<Ablation>& variants,
                            const std::vector<std::string>& envs, const std::vector<std::uint64_t>& seeds,
                            const RunOptions& opts = {});
std::string ablation_table(const AblationReport& report);

std::string manifest_json(const RunConfig& cfg, const EnvSpec& spec);

}  // namespace mrq
