#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mrq {

struct Curve {
  std::vector<long> steps;
  std::vector<double> values;
};

struct MetricsSet {
  std::map<std::string, std::vector<Curve>> by_env;  // eval_return curves, one per file
  int malformed_lines = 0;
};

// Reads eval_return from each metrics file. The environment name comes from a
// manifest.json beside the file when present. Malformed lines are skipped and counted.
MetricsSet read_eval_curves(const std::vector<std::filesystem::path>& files);

struct Band {
  std::vector<long> steps;
  std::vector<double> mean, lo, hi;
};

// Mean and 95% bootstrap band over curves at the steps they all share.
Band aggregate(const std::vector<Curve>& curves, int resamples = 10'000, std::uint64_t seed = 0);

std::string render_svg(const std::string& title, const Band& band);

// Writes one SVG per environment; returns the paths written. When `out` ends
// in .svg and there is one environment, it is used as the file name.
std::vector<std::filesystem::path> plot_files(const MetricsSet& set, const std::filesystem::path& out);

}  // namespace mrq
