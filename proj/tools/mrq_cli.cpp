// Command-line entry point: train, eval, ablate, verify-theory, plot.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrq/config.hpp"
#include "mrq/linear_theory.hpp"
#include "mrq/plot.hpp"
#include "mrq/runner.hpp"

namespace fs = std::filesystem;
using namespace mrq;

namespace {

RunConfig seeded_defaults() {
  RunConfig cfg;
  if (const char* s = std::getenv("MRQ_SEED")) set_key(cfg, "run.seed", s);
  return cfg;
}

// Leftover `--key value` / `--key=value` pairs become config overrides.
void apply_overrides(RunConfig& cfg, std::vector<std::string> extras) {
  for (size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + key + "'");
    key = key.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override --" + key + " needs a value");
      value = extras[++i];
    }
    set_key(cfg, key, value);
  }
}

RunConfig resolve(const std::string& config_path, const std::string& manifest_path,
                  const std::vector<std::string>& extras) {
  RunConfig cfg = seeded_defaults();
  if (!manifest_path.empty()) {
    cfg = config_from_manifest(manifest_path);
  } else if (!config_path.empty()) {
    cfg = load_config(config_path, cfg);
  }
  apply_overrides(cfg, extras);
  finalize(cfg);
  return cfg;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_train(const std::string& config, const std::string& manifest, const std::vector<std::string>& extras,
              bool quiet) {
  const RunConfig cfg = resolve(config, manifest, extras);
  RunOptions opts;
  opts.quiet = quiet;
  const RunResult r = run_training(cfg, opts);
  if (r.exit_code == kExitNumeric) {
    std::cerr << "aborted: " << r.error << "\n";
    return kExitNumeric;
  }
  std::cout << "steps " << r.steps << " final_eval_return " << r.final_eval_return() << " wall_seconds "
            << r.wall_seconds << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& run_dir, int episodes) {
  const RunConfig cfg = config_from_manifest(fs::path(run_dir) / "manifest.json");
  auto env = make_env(cfg.env, cfg.env_config, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Agent<float> agent(env->spec(), cfg.agent, cfg.seed);
  agent.load(fs::path(run_dir) / "checkpoint.bin");
  const EvalResult ev = evaluate(agent, *env, episodes > 0 ? episodes : cfg.eval_episodes);
  nlohmann::ordered_json j;
  j["env"] = cfg.env;
  j["episodes"] = ev.returns.size();
  j["mean_return"] = ev.mean_return;
  j["success_rate"] = ev.success_rate;
  j["returns"] = ev.returns;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config, const std::string& variants_arg, const std::string& envs_arg, int n_seeds,
               const std::vector<std::string>& extras, bool quiet) {
  RunConfig base = seeded_defaults();
  if (!config.empty()) base = load_config(config, base);
  apply_overrides(base, extras);
  std::vector<Ablation> variants;
  const auto names = variants_arg == "all" ? ablation_names() : split(variants_arg);
  for (const auto& n : names) {
    const Ablation a = parse_ablation(n);
    if (std::find(variants.begin(), variants.end(), a) != variants.end()) {
      std::cerr << "warning: variant '" << n << "' listed more than once; running it once\n";
      continue;
    }
    variants.push_back(a);
  }
  const std::vector<std::string> envs = envs_arg.empty() ? std::vector<std::string>{base.env} : split(envs_arg);
  for (const auto& e : envs) make_env(e, base.env_config, 0);  // unknown names fail before any run
  {
    RunConfig probe = base;
    finalize(probe);
  }
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < n_seeds; ++k) seeds.push_back(base.seed + static_cast<std::uint64_t>(k));
  RunOptions opts;
  opts.quiet = quiet;
  const AblationReport rep = run_ablation(base, variants, envs, seeds, opts);
  const std::string table = ablation_table(rep);
  std::cout << table;
  fs::create_directories(base.out_dir);
  std::ofstream(fs::path(base.out_dir) / "ablation_table.md") << table;
  return rep.exit_code == kExitOk ? kExitOk : rep.exit_code;
}

int cmd_verify_theory(int count, int states, int actions, int dim, std::uint64_t seed, bool tabular,
                      bool duplicate) {
  if (count < 1) throw ConfigError("--count must be >= 1");
  linear::InstanceOptions o;
  o.max_states = states;
  o.max_actions = actions;
  o.max_dim = dim;
  o.tabular = tabular;
  o.duplicate_feature = duplicate;
  int evaluated = 0, skipped = 0;
  double gap = 0.0, residual = 0.0, series = 0.0, margin = INFINITY;
  std::vector<std::uint64_t> failures;
  for (int i = 0; i < count; ++i) {
    const linear::InstanceReport r = linear::run_instance(seed + static_cast<std::uint64_t>(i), o);
    if (r.skipped) {
      ++skipped;
      std::cout << "skipped seed " << r.seed << ": " << r.skip_reason << "\n";
      continue;
    }
    ++evaluated;
    gap = std::max(gap, r.mf_mb_gap);
    residual = std::max(residual, r.a_residual);
    series = std::max(series, r.series_gap);
    margin = std::min(margin, r.bound - r.max_value_error);
    if (r.mf_mb_gap > 1e-8 || !r.bound_holds || r.a_residual > 1e-10) failures.push_back(r.seed);
  }
  const auto chain = linear::symmetric_chain();
  const double id_gap = linear::homomorphism_value_check(chain.mdp, linear::identity_abstraction(chain.mdp), chain.policy);
  const double merge_gap = linear::homomorphism_value_check(chain.mdp, chain.merged, chain.policy);
  bool rejected = false;
  try {
    linear::homomorphism_value_check(chain.mdp, chain.violating, chain.policy);
  } catch (const ContractViolation&) {
    rejected = true;
  }
  std::cout << std::setprecision(3) << std::scientific;
  std::cout << "check                          value\n";
  std::cout << "instances evaluated            " << evaluated << " (skipped " << skipped << ")\n";
  std::cout << "max |w_mf - w_mb|              " << gap << "\n";
  std::cout << "max |A w_mf - B|               " << residual << "\n";
  std::cout << "max series gap                 " << series << "\n";
  std::cout << "min bound - max|VE|            " << (evaluated ? margin : 0.0) << "\n";
  std::cout << "identity abstraction gap       " << id_gap << "\n";
  std::cout << "symmetric merge gap            " << merge_gap << "\n";
  std::cout << "violating abstraction rejected " << (rejected ? "yes" : "no") << "\n";
  bool ok = failures.empty() && id_gap <= 1e-10 && merge_gap <= 1e-10 && rejected;
  for (auto s : failures) std::cout << "FAILED instance seed " << s << "\n";
  std::cout << (ok ? "all checks passed" : "theory checks failed") << "\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out) {
  std::vector<fs::path> paths(files.begin(), files.end());
  const MetricsSet set = read_eval_curves(paths);
  if (set.malformed_lines > 0) std::cerr << "skipped " << set.malformed_lines << " malformed lines\n";
  for (const auto& p : plot_files(set, out)) std::cout << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MR.Q desk-scale experiments"};
  app.require_subcommand(1);

  std::string config, manifest, run_dir, variants = "all", envs, out = "plots";
  int episodes = 0, seeds = 3, count = 100, states = 20, actions = 4, dim = 10;
  std::uint64_t seed = 0;
  bool quiet = false, tabular = false, duplicate = false;
  std::vector<std::string> files;
  if (const char* s = std::getenv("MRQ_SEED")) seed = std::strtoull(s, nullptr, 10);

  auto* train = app.add_subcommand("train", "train one agent; extra --key value pairs override config keys");
  train->add_option("-c,--config", config, "config file");
  train->add_option("--manifest", manifest, "re-run the resolved config recorded in a manifest");
  train->add_flag("-q,--quiet", quiet);
  train->allow_extras();

  auto* eval = app.add_subcommand("eval", "evaluate the checkpoint of a finished run");
  eval->add_option("run_dir", run_dir, "run directory with manifest.json and checkpoint.bin")->required();
  eval->add_option("-n,--episodes", episodes, "episodes (default: run.eval_episodes)");

  auto* ablate = app.add_subcommand("ablate", "baseline plus ablation variants with shared seeds");
  ablate->add_option("-c,--config", config, "config file");
  ablate->add_option("--variants", variants, "comma-separated variant names, 'all', or empty");
  ablate->add_option("--envs", envs, "comma-separated environments (default: env.name)");
  ablate->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  ablate->add_flag("-q,--quiet", quiet);
  ablate->allow_extras();

  auto* verify = app.add_subcommand("verify-theory", "exact checks of the linear and homomorphism results");
  verify->add_option("--count", count, "random instances");
  verify->add_option("--states", states, "max states");
  verify->add_option("--actions", actions, "max actions");
  verify->add_option("--dim", dim, "max feature dimension");
  verify->add_option("--seed", seed, "first instance seed (default: MRQ_SEED or 0)");
  verify->add_flag("--tabular", tabular, "identity features");
  verify->add_flag("--duplicate-feature", duplicate, "make the last feature copy the first");

  auto* plot = app.add_subcommand("plot", "eval_return curves with 95% bootstrap bands as SVG");
  plot->add_option("files", files, "metrics.jsonl files")->required();
  plot->add_option("-o,--out", out, "output directory or .svg file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(config, manifest, train->remaining(), quiet);
    if (*eval) return cmd_eval(run_dir, episodes);
    if (*ablate) return cmd_ablate(config, variants, envs, seeds, ablate->remaining(), quiet);
    if (*verify) return cmd_verify_theory(count, states, actions, dim, seed, tabular, duplicate);
    if (*plot) return cmd_plot(files, out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
