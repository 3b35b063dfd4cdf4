#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrq/agent.hpp"
#include "mrq/envs.hpp"
#include "mrq/errors.hpp"

namespace mrq {

// Config text that cannot be parsed; line and column are 1-based.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& source, int line, int column, const std::string& what)
      : ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

struct RunConfig {
  std::string env = "gridworld-discrete";
  EnvConfig env_config;
  AgentConfig agent;
  std::uint64_t seed = 0;
  long total_steps = 100'000;
  long eval_every = 1000;
  int eval_episodes = 10;
  long checkpoint_every = 0;  // 0: only at the end of the run
  std::string out_dir = "runs/default";
};

// Flat `key = value` lines; `#` starts a comment. Keys are dotted
// (`agent.gamma`, `env.grid_size`, `run.seed`); `ablation` takes a
// comma-separated list. Unknown keys and bad values raise ParseError.
// Keys not mentioned keep their value in `base`.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>", RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Sets one key; `ablation` appends. Raises ConfigError for unknown keys.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
// Every key with its current value, in a fixed order. Doubles round-trip exactly.
std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& cfg);
const std::vector<std::string>& config_keys();

// Applies the recorded ablations to the agent wiring and validates.
void finalize(RunConfig& cfg);

// Rebuilds the resolved config recorded in a manifest.
RunConfig config_from_manifest(const std::filesystem::path& manifest);

}  // namespace mrq
