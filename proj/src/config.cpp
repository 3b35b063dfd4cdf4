#include "mrq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace mrq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

template <typename I>
I to_int(const std::string& v) {
  I out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

template <typename E>
E to_enum(const std::string& v, const std::vector<std::pair<std::string, E>>& names) {
  std::string valid;
  for (const auto& [n, e] : names) {
    if (n == v) return e;
    valid += (valid.empty() ? "" : ", ") + n;
  }
  throw ConfigError("unknown value '" + v + "' (valid: " + valid + ")");
}

template <typename E>
std::string from_enum(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, x] : names) {
    if (x == e) return n;
  }
  return "?";
}

const std::vector<std::pair<std::string, ActionKind>> kActionKinds = {{"discrete", ActionKind::kDiscrete},
                                                                      {"continuous", ActionKind::kContinuous}};
const std::vector<std::pair<std::string, RewardScaleMode>> kScaleModes = {{"mean-abs", RewardScaleMode::kMeanAbs},
                                                                          {"mean-signed", RewardScaleMode::kMeanSigned}};
const std::vector<std::pair<std::string, PriorityReduction>> kReductions = {{"mean", PriorityReduction::kMean},
                                                                            {"min", PriorityReduction::kMin}};
const std::vector<std::pair<std::string, EncoderSchedule>> kSchedules = {{"block", EncoderSchedule::kBlock},
                                                                         {"amortized", EncoderSchedule::kAmortized}};
const std::vector<std::pair<std::string, DiscreteNoise>> kNoises = {{"soft", DiscreteNoise::kSoftOutput},
                                                                    {"one-hot", DiscreteNoise::kOneHot}};

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define MRQ_DOUBLE(key, field) \
  Key { key, [](const RunConfig& c) { return fmt_double(c.field); }, [](RunConfig& c, const std::string& v) { c.field = to_double(v); } }
#define MRQ_INT(key, field, type)                                                 \
  Key {                                                                           \
    key, [](const RunConfig& c) { return std::to_string(c.field); },              \
        [](RunConfig& c, const std::string& v) { c.field = to_int<type>(v); }     \
  }
#define MRQ_ENUM(key, field, table)                                               \
  Key {                                                                           \
    key, [](const RunConfig& c) { return from_enum(c.field, table); },            \
        [](RunConfig& c, const std::string& v) { c.field = to_enum(v, table); }   \
  }

std::optional<double> to_optional(const std::string& v) {
  if (v == "none") return std::nullopt;
  return to_double(v);
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      Key{"env.name", [](const RunConfig& c) { return c.env; }, [](RunConfig& c, const std::string& v) { c.env = v; }},
      MRQ_INT("env.grid_size", env_config.grid_size, int),
      MRQ_INT("env.image_size", env_config.image_size, int),
      MRQ_ENUM("env.pixel_action", env_config.pixel_action_kind, kActionKinds),
      MRQ_INT("env.max_episode_steps", env_config.max_episode_steps, int),
      MRQ_INT("env.mdp_states", env_config.mdp_states, int),
      MRQ_INT("env.mdp_actions", env_config.mdp_actions, int),
      MRQ_INT("env.mdp_seed", env_config.mdp_seed, std::uint64_t),

      MRQ_DOUBLE("agent.gamma", agent.gamma),
      MRQ_INT("agent.batch_size", agent.batch_size, int),
      MRQ_INT("agent.target_update_freq", agent.target_update_freq, int),
      MRQ_INT("agent.buffer_capacity", agent.buffer_capacity, std::size_t),
      MRQ_INT("agent.replay_ratio", agent.replay_ratio, int),
      MRQ_INT("agent.enc_horizon", agent.enc_horizon, int),
      MRQ_INT("agent.q_horizon", agent.q_horizon, int),
      MRQ_DOUBLE("agent.lambda_dynamics", agent.lambda_dynamics),
      MRQ_DOUBLE("agent.lambda_reward", agent.lambda_reward),
      MRQ_DOUBLE("agent.lambda_terminal", agent.lambda_terminal),
      MRQ_DOUBLE("agent.lambda_preactiv", agent.lambda_preactiv),
      MRQ_DOUBLE("agent.target_noise", agent.target_noise),
      MRQ_DOUBLE("agent.noise_clip", agent.noise_clip),
      MRQ_DOUBLE("agent.exploration_noise", agent.exploration_noise),
      MRQ_INT("agent.initial_random_steps", agent.initial_random_steps, long),
      MRQ_DOUBLE("agent.lap_alpha", agent.lap_alpha),
      MRQ_DOUBLE("agent.min_priority", agent.min_priority),
      MRQ_DOUBLE("agent.encoder_lr", agent.encoder_optim.lr),
      MRQ_DOUBLE("agent.encoder_weight_decay", agent.encoder_optim.weight_decay),
      MRQ_DOUBLE("agent.value_lr", agent.value_optim.lr),
      MRQ_DOUBLE("agent.value_weight_decay", agent.value_optim.weight_decay),
      Key{"agent.value_grad_clip",
          [](const RunConfig& c) {
            return c.agent.value_optim.grad_clip_norm ? fmt_double(*c.agent.value_optim.grad_clip_norm)
                                                      : std::string("none");
          },
          [](RunConfig& c, const std::string& v) { c.agent.value_optim.grad_clip_norm = to_optional(v); }},
      MRQ_DOUBLE("agent.policy_lr", agent.policy_optim.lr),
      MRQ_DOUBLE("agent.policy_weight_decay", agent.policy_optim.weight_decay),
      MRQ_INT("agent.zs_dim", agent.zs_dim, int),
      MRQ_INT("agent.za_dim", agent.za_dim, int),
      MRQ_INT("agent.zsa_dim", agent.zsa_dim, int),
      MRQ_INT("agent.enc_hidden", agent.enc_hidden, int),
      MRQ_INT("agent.value_hidden", agent.value_hidden, int),
      MRQ_INT("agent.policy_hidden", agent.policy_hidden, int),
      MRQ_INT("agent.num_bins", agent.num_bins, int),
      MRQ_DOUBLE("agent.reward_range", agent.reward_range),
      MRQ_DOUBLE("agent.gumbel_tau", agent.gumbel_tau),
      MRQ_DOUBLE("agent.reward_scale_floor", agent.reward_scale_floor),
      MRQ_ENUM("agent.reward_scale_mode", agent.reward_scale_mode, kScaleModes),
      MRQ_ENUM("agent.priority_reduction", agent.priority_reduction, kReductions),
      MRQ_ENUM("agent.encoder_schedule", agent.encoder_schedule, kSchedules),
      MRQ_ENUM("agent.discrete_noise", agent.discrete_noise, kNoises),

      MRQ_INT("run.seed", seed, std::uint64_t),
      MRQ_INT("run.total_steps", total_steps, long),
      MRQ_INT("run.eval_every", eval_every, long),
      MRQ_INT("run.eval_episodes", eval_episodes, int),
      MRQ_INT("run.checkpoint_every", checkpoint_every, long),
      Key{"run.out_dir", [](const RunConfig& c) { return c.out_dir; },
          [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      Key{"ablation",
          [](const RunConfig& c) {
            std::string s;
            for (Ablation a : c.agent.ablations) s += (s.empty() ? "" : ",") + to_string(a);
            return s;
          },
          [](RunConfig& c, const std::string& v) {
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
              item = trim(item);
              if (item.empty()) continue;
              const Ablation a = parse_ablation(item);
              if (std::find(c.agent.ablations.begin(), c.agent.ablations.end(), a) != c.agent.ablations.end()) {
                std::cerr << "warning: ablation '" << item << "' given more than once; using it once\n";
                continue;
              }
              c.agent.ablations.push_back(a);
            }
          }},
  };
  return k;
}

#undef MRQ_DOUBLE
#undef MRQ_INT
#undef MRQ_ENUM

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : keys()) n.push_back(k.name);
    return n;
  }();
  return names;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

RunConfig parse_config(const std::string& text, const std::string& source, RunConfig base) {
  RunConfig cfg = std::move(base);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    if (trim(body).empty()) continue;
    const auto eq = body.find('=');
    const int key_col = static_cast<int>(body.find_first_not_of(" \t")) + 1;
    if (eq == std::string::npos) throw ParseError(source, lineno, key_col, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(source, lineno, static_cast<int>(eq) + 1, "missing key before '='");
    if (value.empty()) throw ParseError(source, lineno, static_cast<int>(eq) + 2, "missing value after '='");
    const auto vpos = body.find_first_not_of(" \t", eq + 1);
    try {
      set_key(cfg, key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      const bool unknown_key = std::string(e.what()).rfind("unknown config key", 0) == 0;
      throw ParseError(source, lineno, unknown_key ? key_col : static_cast<int>(vpos) + 1, e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), std::move(base));
}

void finalize(RunConfig& cfg) {
  const std::vector<Ablation> list = cfg.agent.ablations;
  cfg.agent.ablations.clear();
  for (Ablation a : list) cfg.agent.apply(a);
  cfg.agent.validate();
  if (cfg.total_steps < 0) throw ConfigError("run.total_steps must be >= 0");
  if (cfg.eval_every < 0) throw ConfigError("run.eval_every must be >= 0");
  if (cfg.eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (cfg.checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be >= 0");
}

RunConfig config_from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot read manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("manifest has no config object");
  RunConfig cfg;
  for (const auto& [k, v] : j["config"].items()) set_key(cfg, k, v.get<std::string>());
  finalize(cfg);
  return cfg;
}

}  // namespace mrq
