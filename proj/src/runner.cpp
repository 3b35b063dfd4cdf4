#include "mrq/runner.hpp"

#include <chrono>
#include <ctime>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <iostream>

#include "json.hpp"
#include "mrq/replay_buffer.hpp"

namespace mrq {

using ordered_json = nlohmann::ordered_json;

EvalResult evaluate(Agent<float>& agent, Env& env, int episodes) {
  EvalResult out;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<float> obs = env.reset();
    double ret = 0.0;
    while (!env.done()) {
      const StepResult r = env.step(agent.select_action(obs, false));
      ret += r.reward;
      obs = r.obs;
    }
    successes += env.success() ? 1 : 0;
    out.returns.push_back(ret);
  }
  for (double r : out.returns) out.mean_return += r;
  out.mean_return /= episodes;
  out.success_rate = static_cast<double>(successes) / episodes;
  return out;
}

std::string manifest_json(const RunConfig& cfg, const EnvSpec& spec) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["seed"] = cfg.seed;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["start_time"] = stamp;
  ordered_json c = ordered_json::object();
  for (const auto& [k, v] : config_items(cfg)) c[k] = v;
  j["config"] = c;
  const AgentConfig& a = cfg.agent;
  j["wiring"] = {{"linear_value", a.linear_value},
                 {"nonlinear_model", a.nonlinear_model},
                 {"mse_reward", a.mse_reward},
                 {"reward_scaling", a.reward_scaling},
                 {"min_target", a.min_target},
                 {"prioritized", a.prioritized},
                 {"huber", a.huber},
                 {"model_based_repr", a.model_based_repr},
                 {"dynamics_target", static_cast<int>(a.dynamics_target)}};
  ordered_json env;
  env["name"] = spec.name;
  env["obs_kind"] = spec.pixel() ? "pixel" : "vector";
  env["obs_shape"] = spec.obs_shape;
  env["action_kind"] = spec.discrete() ? "discrete" : "continuous";
  env["action_dim"] = spec.action_dim;
  env["action_low"] = spec.action_low;
  env["action_high"] = spec.action_high;
  env["max_episode_steps"] = spec.max_episode_steps;
  j["env"] = env;
  return j.dump(2);
}

namespace {

ordered_json nullable(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

RunResult run_training(RunConfig cfg, const RunOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  finalize(cfg);
  RunResult res;

  auto env = make_env(cfg.env, cfg.env_config, cfg.seed);
  auto eval_env = make_env(cfg.env, cfg.env_config, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const EnvSpec spec = env->spec();
  Agent<float> agent(spec, cfg.agent, cfg.seed);
  BufferConfig bc;
  bc.obs_size = spec.obs_size();
  bc.pixel = spec.pixel();
  bc.action_dim = spec.action_dim;
  bc.capacity = cfg.agent.buffer_capacity;
  bc.alpha = cfg.agent.lap_alpha;
  bc.min_priority = cfg.agent.min_priority;
  bc.prioritized = cfg.agent.prioritized;
  ReplayBuffer buffer(bc);

  const std::filesystem::path dir = cfg.out_dir;
  std::ofstream metrics, timings;
  if (opts.write_files) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "manifest.json") << manifest_json(cfg, spec) << "\n";
    metrics.open(dir / "metrics.jsonl");
    timings.open(dir / "timings.jsonl");
    if (!metrics || !timings) throw ConfigError("cannot write run files under " + dir.string());
  }
  auto checkpoint = [&](const std::string& name) {
    if (opts.write_files) agent.save(dir / name);
  };

  std::vector<float> obs = env->reset();
  double episode_return = 0.0;
  for (long step = 1; step <= cfg.total_steps; ++step) {
    ordered_json rec;
    rec["step"] = step;
    TrainMetrics tm;
    std::optional<double> finished;
    try {
      const std::vector<float> action = agent.act(obs, step - 1, true);
      const StepResult r = env->step(action);
      buffer.add({obs, action, r.reward, r.terminal, r.truncated, r.obs});
      episode_return += r.reward;
      obs = r.obs;
      if (env->done()) {
        finished = episode_return;
        episode_return = 0.0;
        obs = env->reset();
      }
      if (step - 1 >= cfg.agent.initial_random_steps) {
        for (int k = 0; k < cfg.agent.replay_ratio; ++k) tm = agent.train_step(buffer);
      }
    } catch (const NumericError& e) {
      res.exit_code = kExitNumeric;
      res.error = e.what();
      res.steps = step;
      checkpoint("checkpoint_abort.bin");
      if (!opts.quiet) std::cerr << "numeric failure at step " << step << ": " << e.what() << "\n";
      return res;
    }

    std::optional<EvalResult> ev;
    const bool last = step == cfg.total_steps;
    if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || last) {
      ev = evaluate(agent, *eval_env, cfg.eval_episodes);
      res.evals.emplace_back(step, *ev);
      if (opts.write_files) {
        ordered_json t;
        t["step"] = step;
        t["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
        timings << t.dump() << "\n";
      }
      if (!opts.quiet) {
        std::cerr << "step " << step << " eval_return " << ev->mean_return << " success " << ev->success_rate << "\n";
      }
    }
    rec["episode_return"] = nullable(finished);
    rec["eval_return"] = ev ? ordered_json(ev->mean_return) : ordered_json(nullptr);
    rec["eval_success"] = ev ? ordered_json(ev->success_rate) : ordered_json(nullptr);
    rec["loss_encoder"] = tm.loss_encoder;
    rec["loss_reward"] = tm.loss_reward;
    rec["loss_dynamics"] = tm.loss_dynamics;
    rec["loss_terminal"] = tm.loss_terminal;
    rec["loss_value"] = tm.loss_value;
    rec["loss_policy"] = tm.loss_policy;
    rec["r_bar"] = agent.r_bar();
    rec["mean_priority"] = buffer.mean_priority();
    rec["clipped_action_count"] = env->clipped_action_count();
    if (opts.write_files) metrics << rec.dump() << "\n";
    res.steps = step;

    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) checkpoint("checkpoint.bin");
    if (ev && opts.stop_when && opts.stop_when(step, *ev)) break;
  }
  checkpoint("checkpoint.bin");
  res.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return res;
}

AblationReport run_ablation(const RunConfig& base, const std::vector<Ablation>& variants,
                            const std::vector<std::string>& envs, const std::vector<std::uint64_t>& seeds,
                            const RunOptions& opts) {
  AblationReport rep;
  for (const auto& env_name : envs) {
    auto run_variant = [&](const std::optional<Ablation>& v) {
      AblationRow row;
      row.variant = v ? to_string(*v) : "baseline";
      row.env = env_name;
      for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.env = env_name;
        cfg.seed = seed;
        if (v) cfg.agent.ablations.push_back(*v);
        cfg.out_dir = (std::filesystem::path(base.out_dir) / env_name / row.variant / ("seed_" + std::to_string(seed)))
                          .string();
        const RunResult r = run_training(cfg, opts);
        if (r.exit_code != kExitOk) {
          ++row.failed_runs;
          rep.exit_code = r.exit_code;
        }
        row.finals.push_back(r.final_eval_return());
      }
      return row;
    };
    AblationRow baseline = run_variant(std::nullopt);
    baseline.delta = bootstrap_ci(std::vector<double>(seeds.size(), 0.0));
    baseline.normalized_delta = baseline.delta;
    double scale = 0.0;
    try {
      scale = std::abs(optimal_return(*make_env(env_name, base.env_config, 0)));
    } catch (const UnsupportedError&) {
    }
    if (scale == 0.0) {
      for (double f : baseline.finals) scale += std::abs(f) / static_cast<double>(baseline.finals.size());
    }
    if (scale == 0.0) scale = 1.0;
    for (Ablation v : variants) {
      AblationRow row = run_variant(v);
      std::vector<double> d, nd;
      for (size_t i = 0; i < seeds.size(); ++i) {
        d.push_back(row.finals[i] - baseline.finals[i]);
        nd.push_back(d.back() / scale);
      }
      row.delta = bootstrap_ci(d);
      row.normalized_delta = bootstrap_ci(nd);
      rep.rows.push_back(std::move(row));
    }
    rep.baselines.push_back(std::move(baseline));
  }
  return rep;
}

std::string ablation_table(const AblationReport& report) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3);
  s << "| variant | env | mean delta | 95% CI | normalized delta | 95% CI | failed runs |\n";
  s << "|---|---|---|---|---|---|---|\n";
  for (const auto& b : report.baselines) {
    double mean = 0.0;
    for (double f : b.finals) mean += f / static_cast<double>(b.finals.size());
    s << "| baseline (final return " << mean << ") | " << b.env << " | 0 | - | 0 | - | " << b.failed_runs << " |\n";
  }
  for (const auto& r : report.rows) {
    s << "| " << r.variant << " | " << r.env << " | " << r.delta.mean << " | [" << r.delta.lo << ", " << r.delta.hi
      << "] | " << r.normalized_delta.mean << " | [" << r.normalized_delta.lo << ", " << r.normalized_delta.hi
      << "] | " << r.failed_runs << " |\n";
  }
  return s.str();
}

}  // namespace mrq
