// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion; exits
// nonzero when any criterion fails. Tolerances are the constants below.

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "mrq/agent.hpp"
#include "mrq/config.hpp"
#include "mrq/envs.hpp"
#include "mrq/errors.hpp"
#include "mrq/linear_theory.hpp"
#include "mrq/reward_codec.hpp"
#include "mrq/runner.hpp"
#include "mrq/sequential.hpp"

using namespace mrq;
namespace fs = std::filesystem;

namespace {

constexpr double kWeightGapTol = 1e-8;
constexpr double kTabularTol = 1e-10;
constexpr double kHomomorphismTol = 1e-10;
constexpr double kCodecRelTol = 1e-6;
constexpr double kSimplexTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kChiSquareAlpha = 0.01;
constexpr double kLinearSeconds = 10.0;
constexpr double kGradcheckSeconds = 60.0;
constexpr double kLearningSeconds = 7200.0;
constexpr int kInstances = 100;
constexpr int kScheduleSteps = 250;
constexpr long kDeterminismSteps = 1000;

// Profile for the learning runs: the default architecture at a quarter of the
// width, which a single core trains in minutes.
const char* kDeskProfile = R"(
agent.zs_dim = 128
agent.za_dim = 64
agent.zsa_dim = 128
agent.enc_hidden = 128
agent.value_hidden = 128
agent.policy_hidden = 128
agent.batch_size = 64
env.image_size = 32
run.eval_every = 1000
run.eval_episodes = 10
)";

// Small networks and a short random phase so a 10k-step run spends most of
// its steps training.
const char* kSweepProfile = R"(
agent.zs_dim = 32
agent.za_dim = 16
agent.zsa_dim = 32
agent.enc_hidden = 32
agent.value_hidden = 32
agent.policy_hidden = 32
agent.batch_size = 32
agent.initial_random_steps = 1000
env.image_size = 32
run.eval_every = 1000
run.eval_episodes = 10
)";

const char* kDeterminismProfile = R"(
agent.zs_dim = 16
agent.za_dim = 8
agent.zsa_dim = 16
agent.enc_hidden = 16
agent.value_hidden = 16
agent.policy_hidden = 16
agent.batch_size = 16
agent.initial_random_steps = 200
agent.target_update_freq = 50
env.image_size = 32
run.eval_every = 500
run.eval_episodes = 2
)";

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path out = "acceptance_runs";
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AgentConfig small_agent() {
  AgentConfig c;
  c.zs_dim = 8;
  c.za_dim = 4;
  c.zsa_dim = 8;
  c.enc_hidden = 8;
  c.value_hidden = 8;
  c.policy_hidden = 8;
  c.batch_size = 8;
  c.initial_random_steps = 0;
  c.buffer_capacity = 1000;
  return c;
}

// Random transitions; episodes of 7 steps end in a terminal when `terminals`.
ReplayBuffer random_buffer(const EnvSpec& spec, int n, bool terminals, std::uint64_t seed) {
  BufferConfig c;
  c.obs_size = spec.obs_size();
  c.action_dim = spec.action_dim;
  c.capacity = 1000;
  ReplayBuffer buf(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nrm(0.0f, 1.0f);
  std::uniform_int_distribution<int> pick(0, spec.action_dim - 1);
  std::vector<float> s(static_cast<size_t>(spec.obs_size()));
  for (auto& v : s) v = nrm(rng);
  for (int i = 0; i < n; ++i) {
    std::vector<float> s2(s.size()), a(static_cast<size_t>(spec.action_dim), 0.0f);
    for (auto& v : s2) v = nrm(rng);
    if (spec.discrete()) {
      a[static_cast<size_t>(pick(rng))] = 1.0f;
    } else {
      for (auto& v : a) v = std::clamp(nrm(rng), -1.0f, 1.0f);
    }
    const bool end = i % 7 == 6;
    buf.add({s, a, 2.0 * nrm(rng), end && terminals, end && !terminals, s2});
    s = s2;
  }
  return buf;
}

RunConfig profile(const char* text, const std::string& env, std::uint64_t seed, long steps, const fs::path& out) {
  RunConfig c = parse_config(text, "<profile>");
  c.env = env;
  c.seed = seed;
  c.total_steps = steps;
  c.out_dir = out.string();
  finalize(c);
  return c;
}

// Draws instance seeds until `count` are evaluated.
std::vector<linear::InstanceReport> instances(const linear::InstanceOptions& o, int count, int* skipped) {
  std::vector<linear::InstanceReport> out;
  *skipped = 0;
  for (std::uint64_t seed = 0; static_cast<int>(out.size()) < count && seed < 10'000; ++seed) {
    auto r = linear::run_instance(seed, o);
    if (r.skipped) {
      ++*skipped;
      continue;
    }
    out.push_back(r);
  }
  return out;
}

Outcome linear_equivalence(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  int skipped = 0;
  const auto reps = instances({}, kInstances, &skipped);
  const double t = seconds_since(t0);
  double gap = 0.0;
  for (const auto& r : reps) gap = std::max(gap, r.mf_mb_gap);
  const bool ok = static_cast<int>(reps.size()) == kInstances && gap <= kWeightGapTol && t < kLinearSeconds;
  return {ok, std::to_string(reps.size()) + " instances (" + std::to_string(skipped) + " rank-deficient skipped), max |w_mf - w_mb| " +
                  fmt(gap) + ", " + fmt(t) + " s"};
}

Outcome linear_bound(const Options&) {
  int skipped = 0;
  const auto reps = instances({}, kInstances, &skipped);
  int holds = 0;
  double margin = INFINITY;
  for (const auto& r : reps) {
    holds += r.bound_holds ? 1 : 0;
    margin = std::min(margin, r.bound - r.max_value_error);
  }
  linear::InstanceOptions tab;
  tab.tabular = true;
  int tab_skipped = 0;
  const auto treps = instances(tab, kInstances, &tab_skipped);
  double worst = 0.0;
  for (const auto& r : treps) worst = std::max({worst, r.max_value_error, r.bound});
  const bool ok = holds == kInstances && static_cast<int>(treps.size()) == kInstances && worst <= kTabularTol;
  return {ok, "bound holds " + std::to_string(holds) + "/" + std::to_string(reps.size()) + " (min margin " + fmt(margin) +
                  "), tabular max(|VE|, bound) " + fmt(worst)};
}

Outcome homomorphism_equivalence(const Options&) {
  const auto ex = linear::symmetric_chain();
  const double id = linear::homomorphism_value_check(ex.mdp, linear::identity_abstraction(ex.mdp), ex.policy);
  const double merged = linear::homomorphism_value_check(ex.mdp, ex.merged, ex.policy);
  bool rejected = false;
  try {
    linear::homomorphism_value_check(ex.mdp, ex.violating, ex.policy);
  } catch (const ContractViolation&) {
    rejected = true;
  }
  return {id <= kHomomorphismTol && merged <= kHomomorphismTol && rejected,
          "identity gap " + fmt(id) + ", merge gap " + fmt(merged) + ", violating " + (rejected ? "rejected" : "accepted")};
}

Outcome codec(const Options&) {
  RewardCodec c;
  double worst_rel = 0.0, worst_sum = 0.0;
  bool shape = true;
  const int n = 10'000;
  for (int k = 0; k < n; ++k) {
    const double r = symexp(-10.0 + 20.0 * k / (n - 1));
    const auto w = c.encode(r);
    if (r != 0.0) worst_rel = std::max(worst_rel, std::abs(c.decode(w) - r) / std::abs(r));
    double s = 0.0;
    int first = -1, count = 0;
    for (int i = 0; i < static_cast<int>(w.size()); ++i) {
      const double v = w[static_cast<size_t>(i)];
      s += v;
      if (v < 0.0) shape = false;
      if (v != 0.0) {
        if (first < 0) first = i;
        if (i > first + 1) shape = false;
        ++count;
      }
    }
    if (count < 1 || count > 2) shape = false;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double sym = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double r = symexp(u(rng));
    const auto a = c.encode(r), b = c.encode(-r);
    for (size_t i = 0; i < a.size(); ++i) sym = std::max(sym, std::abs(a[i] - b[a.size() - 1 - i]));
  }
  const bool ok = worst_rel <= kCodecRelTol && worst_sum <= kSimplexTol && shape && sym <= 1e-12;
  return {ok, "max rel decode error " + fmt(worst_rel) + ", max |sum - 1| " + fmt(worst_sum) + ", two-hot shape " +
                  (shape ? "ok" : "violated") + ", symmetry error " + fmt(sym)};
}

Outcome gradients(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  using MatD = ad::Matrix<double>;
  std::map<std::string, double> err;

  const EnvSpec disc{"d", ObsKind::kVector, {5}, ActionKind::kDiscrete, 3, -1, 1, 50};
  const EnvSpec cont{"c", ObsKind::kVector, {4}, ActionKind::kContinuous, 2, -1, 1, 50};

  {
    Agent<double> agent(disc, small_agent(), 1);
    ReplayBuffer buf = random_buffer(disc, 60, true, 2);
    std::mt19937_64 rng(3);
    const SegmentBatch batch = buf.sample_segments(8, 5, rng);
    auto loss = [&](gradcheck::Tape& t) { return agent.encoder_loss(t, batch, true).total; };
    err["encoder"] = gradcheck::check(loss, agent.encoder().parameters()).max_rel_error;

    const SegmentBatch vb = buf.sample_segments(8, 3, rng);
    const MatD y = agent.value_target(vb);
    std::vector<ad::Parameter<double>*> vp = agent.value(0).parameters();
    for (auto* p : agent.value(1).parameters()) vp.push_back(p);
    auto vloss = [&](gradcheck::Tape& t) { return agent.value_loss(t, vb, y).loss; };
    err["value"] = gradcheck::check(vloss, vp).max_rel_error;

    const MatD s = vb.states[0].cast<double>();
    const MatD g = nn::sample_gumbel<double>(8, 3, rng);
    auto ploss = [&](gradcheck::Tape& t) { return agent.policy_loss(t, s, &g); };
    err["policy (gumbel)"] = gradcheck::check(ploss, agent.policy().parameters()).max_rel_error;
  }
  {
    Agent<double> agent(cont, small_agent(), 4);
    ReplayBuffer buf = random_buffer(cont, 60, true, 5);
    std::mt19937_64 rng(6);
    const SegmentBatch batch = buf.sample_segments(8, 1, rng);
    const MatD s = batch.states[0].cast<double>();
    auto ploss = [&](gradcheck::Tape& t) { return agent.policy_loss(t, s); };
    err["policy (tanh)"] = gradcheck::check(ploss, agent.policy().parameters()).max_rel_error;
  }
  const double t = seconds_since(t0);
  bool ok = t < kGradcheckSeconds;
  std::string detail;
  for (const auto& [name, e] : err) {
    ok = ok && e <= kGradRelTol;
    detail += name + " " + fmt(e) + ", ";
  }
  return {ok, detail + "width 8, " + fmt(t) + " s"};
}

Outcome lap(const Options&) {
  BufferConfig c;
  c.obs_size = 1;
  c.action_dim = 1;
  c.capacity = 16;
  ReplayBuffer buf(c);
  for (int i = 0; i < 8; ++i) buf.add({{0.0f}, {0.0f}, 0.0, false, false, {0.0f}});
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const std::vector<double> td = {32.0, 0.5, 3.0, 1.0};
  buf.update_priorities(idx, td);
  const bool formula = std::abs(buf.priority(0) - 4.0) < 1e-12 && buf.priority(1) == 1.0 &&
                       std::abs(buf.priority(2) - std::pow(3.0, 0.4)) < 1e-12 && buf.priority(3) == 1.0;

  const int draws = 100'000;
  std::mt19937_64 rng(7);
  std::vector<double> counts(8, 0.0);
  for (int k = 0; k < draws / 1000; ++k) {
    for (auto i : buf.sample_indices(1000, rng)) counts[i] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double e = draws * buf.sampling_probability(i);
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  const boost::math::chi_squared dist(7.0);
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  return {formula && p > kChiSquareAlpha,
          "priority(|delta| = 32) " + fmt(buf.priority(0)) + ", chi2 " + fmt(chi2) + " on 7 dof, p = " + fmt(p)};
}

Outcome schedule(const Options&) {
  const EnvSpec spec{"d", ObsKind::kVector, {5}, ActionKind::kDiscrete, 3, -1, 1, 50};
  AgentConfig cfg = small_agent();
  cfg.target_update_freq = kScheduleSteps;
  Agent<float> agent(spec, cfg, 8);
  ReplayBuffer buf = random_buffer(spec, 200, true, 9);
  const bool first_sync = agent.train_step(buf).synced;
  const long enc_updates = agent.counters().encoder_updates;
  const auto targets = agent.hash_targets();
  const auto enc = agent.hash_encoder();
  const double rbt = agent.r_bar_target();
  bool stable = true;
  // Value targets for a fixed batch and fixed noise; changes only if target nets or r_bar' do.
  std::mt19937_64 rng(10);
  const SegmentBatch probe = buf.sample_segments(8, 3, rng);
  const ad::Matrix<float> zeros = ad::Matrix<float>::Zero(8, 3);
  const ad::Matrix<float> y0 = agent.value_target(probe, &zeros, &zeros);
  int steps = 1;
  for (; steps < kScheduleSteps; ++steps) {
    const auto m = agent.train_step(buf);
    if (m.synced || agent.hash_targets() != targets || agent.hash_encoder() != enc || agent.r_bar_target() != rbt ||
        agent.value_target(probe, &zeros, &zeros) != y0) {
      stable = false;
      break;
    }
  }
  const bool block = enc_updates == kScheduleSteps && agent.counters().encoder_updates == kScheduleSteps;
  const bool second_sync = agent.train_step(buf).synced && agent.counters().encoder_updates == 2 * kScheduleSteps;
  agent.sync_targets(buf);
  const bool equal = agent.hash_online() == agent.hash_targets();
  return {first_sync && stable && block && second_sync && equal,
          "frozen for " + std::to_string(steps) + " steps, encoder updates per block " + std::to_string(enc_updates) +
              ", sync restores equality " + (equal ? "yes" : "no")};
}

Outcome terminal_gating(const Options&) {
  const EnvSpec spec{"d", ObsKind::kVector, {5}, ActionKind::kDiscrete, 3, -1, 1, 50};
  Agent<double> agent(spec, small_agent(), 11);
  auto params = agent.encoder().parameters();
  ad::Parameter<double>* w = params[params.size() - 2];
  ad::Parameter<double>* b = params[params.size() - 1];
  const Eigen::Index row = w->value.rows() - 1;
  auto probe = [&](const ReplayBuffer& buf, double* loss) {
    std::mt19937_64 rng(12);
    const SegmentBatch batch = buf.sample_segments(16, 5, rng);
    for (auto* p : params) p->zero_grad();
    gradcheck::Tape tape;
    const auto l = agent.encoder_loss(tape, batch, buf.terminal_seen());
    tape.backward(l.total);
    *loss = l.terminal;
    return w->grad.row(row).cwiseAbs().maxCoeff() + std::abs(b->grad(0, row));
  };
  ReplayBuffer before = random_buffer(spec, 60, false, 13);
  double loss_before = 0.0, loss_after = 0.0;
  const double grad_before = probe(before, &loss_before);
  ReplayBuffer after = random_buffer(spec, 60, true, 13);
  const double grad_after = probe(after, &loss_after);
  const bool ok = !before.terminal_seen() && loss_before == 0.0 && grad_before == 0.0 && after.terminal_seen() &&
                  loss_after > 0.0 && grad_after > 0.0;
  return {ok, "before first terminal: loss " + fmt(loss_before) + ", grad " + fmt(grad_before) + "; after: loss " +
                  fmt(loss_after) + ", grad " + fmt(grad_after)};
}

struct Task {
  std::string env;
  long steps;
  std::string goal;
  std::function<double(const EvalResult&)> score;  // compared against `threshold`
  double threshold;
};

Outcome learning(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  EnvConfig ec;
  const double grid_opt = optimal_return(*make_env("gridworld-discrete", ec, 0));
  const double pm_bound = pointmass_return_bound(100), pm_zero = pointmass_zero_action_return(100);
  const std::vector<Task> tasks = {
      {"gridworld-discrete", 30'000, "return / optimal", [=](const EvalResult& e) { return e.mean_return / grid_opt; }, 0.9},
      {"pointmass-continuous", 50'000, "normalized return",
       [=](const EvalResult& e) { return (e.mean_return - pm_zero) / (pm_bound - pm_zero); }, 0.9},
      {"pixel-gridworld", 60'000, "success rate", [](const EvalResult& e) { return e.success_rate; }, 0.8},
  };
  bool ok = true;
  std::string detail;
  for (const auto& task : tasks) {
    int solved = 0, ran = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      // Two successes or two failures settle the 2-of-3 vote.
      if (solved == 2 || ran - solved == 2) break;
      RunConfig cfg = profile(kDeskProfile, task.env, seed, task.steps, o.out / "learning" / task.env / ("seed_" + std::to_string(seed)));
      RunOptions ro;
      double best = -INFINITY;
      // Evaluations from the random phase do not count: an untrained policy
      // can reach the goal by luck.
      ro.stop_when = [&](long step, const EvalResult& e) {
        if (step <= cfg.agent.initial_random_steps) return false;
        best = std::max(best, task.score(e));
        return task.score(e) >= task.threshold;
      };
      const RunResult r = run_training(cfg, ro);
      ++ran;
      const bool hit = r.exit_code == kExitOk && best >= task.threshold;
      solved += hit ? 1 : 0;
      std::ostringstream s;
      s << " seed " << seed << ": " << (hit ? "reached " : "missed, best ") << std::setprecision(3) << best << " at step "
        << r.steps << " (" << std::setprecision(4) << r.wall_seconds << " s);";
      per_seed += s.str();
      std::cout << "  [9] " << task.env << s.str() << std::endl;
    }
    ok = ok && solved >= 2;
    detail += task.env + " " + task.goal + " >= " + fmt(task.threshold) + " on " + std::to_string(solved) + "/" +
              std::to_string(ran) + " seeds;";
  }
  const double t = seconds_since(t0);
  ok = ok && t <= kLearningSeconds;
  return {ok, detail + " total " + fmt(t) + " s"};
}

Outcome ablation_sweep(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = o.out / "ablation";
  fs::remove_all(dir);
  RunConfig base = parse_config(kSweepProfile, "<profile>");
  base.env = "gridworld-discrete";
  base.total_steps = 10'000;
  base.out_dir = dir.string();
  std::vector<Ablation> all;
  for (const auto& n : ablation_names()) all.push_back(parse_ablation(n));
  const AblationReport rep = run_ablation(base, all, {"gridworld-discrete"}, {0, 1, 2});
  const std::string table = ablation_table(rep);
  fs::create_directories(dir);
  std::ofstream(dir / "ablation_table.md") << table;
  std::cout << table;
  int failed = 0;
  for (const auto& r : rep.rows) failed += r.failed_runs;
  auto cfg_of = [&](const std::string& v) {
    return nlohmann::json::parse(slurp(dir / "gridworld-discrete" / v / "seed_0" / "manifest.json"))["config"];
  };
  const bool unroll = cfg_of("no-unroll")["agent.enc_horizon"] == "1";
  const bool onestep = cfg_of("one-step-return")["agent.q_horizon"] == "1";
  const bool ok = rep.exit_code == kExitOk && rep.rows.size() == 12 && failed == 0 && unroll && onestep &&
                  fs::exists(dir / "ablation_table.md");
  return {ok, std::to_string(rep.rows.size()) + " variants x 3 seeds, " + std::to_string(failed) +
                  " failed runs, manifests: no-unroll enc_horizon 1 " + (unroll ? "yes" : "no") +
                  ", one-step-return q_horizon 1 " + (onestep ? "yes" : "no") + ", " + fmt(seconds_since(t0)) + " s"};
}

Outcome determinism(const Options& o) {
  bool ok = true;
  std::string detail;
  for (const auto& env : env_names()) {
    std::string metrics[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = o.out / "determinism" / env / (k == 0 ? "a" : "b");
      fs::remove_all(dir);
      const RunResult r = run_training(profile(kDeterminismProfile, env, 5, kDeterminismSteps, dir));
      metrics[k] = r.exit_code == kExitOk ? slurp(dir / "metrics.jsonl") : std::string("error: ") + r.error;
    }
    const bool same = !metrics[0].empty() && metrics[0] == metrics[1] && metrics[0].rfind("error", 0) != 0;
    ok = ok && same;
    detail += env + (same ? " identical" : " DIFFERS") + "; ";
  }
  return {ok, detail + std::to_string(kDeterminismSteps) + " steps each"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool quick = false;
  std::vector<int> only;
  Options opts;
  std::string out = opts.out.string();
  app.add_flag("--quick", quick, "skip the long learning and ablation criteria (9, 10)");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 11));
  app.add_option("--out", out, "directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  opts.out = out;

  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria = {
      {"linear model-free equals model-based", linear_equivalence},
      {"value error bound", linear_bound},
      {"homomorphism value equivalence", homomorphism_equivalence},
      {"two-hot reward codec", codec},
      {"gradient checks", gradients},
      {"LAP priorities and sampling", lap},
      {"synchronized target schedule", schedule},
      {"terminal gating", terminal_gating},
      {"learning sanity", learning},
      {"ablation harness", ablation_sweep},
      {"determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    const auto& [name, fn] = criteria[static_cast<size_t>(i - 1)];
    const bool is_long = i == 9 || i == 10;
    if (!selected.empty() && !selected.count(i)) continue;
    if (selected.empty() && quick && is_long) {
      std::cout << "criterion " << std::setw(2) << i << " SKIP " << name << ": long, run `acceptance --only " << i
                << "`\n";
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = fn(opts);
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += r.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << i << (r.pass ? " PASS " : " FAIL ") << name << ": " << r.detail << " ["
              << std::fixed << std::setprecision(1) << seconds_since(t0) << " s]" << std::defaultfloat << std::endl;
  }
  std::cout << (failed == 0 ? "all selected criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
