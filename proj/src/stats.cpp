#include "mrq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mrq/errors.hpp"

namespace mrq {

Interval bootstrap_ci(std::span<const double> values, int resamples, double confidence, std::uint64_t seed) {
  if (values.empty()) throw ConfigError("bootstrap needs at least one value");
  if (resamples < 1 || !(confidence > 0.0 && confidence < 1.0)) throw ConfigError("bad bootstrap parameters");
  const double n = static_cast<double>(values.size());
  Interval out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / n;
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * (resamples - 1);
    const auto i = static_cast<size_t>(std::floor(pos));
    const auto j = std::min(i + 1, means.size() - 1);
    return means[i] + (pos - static_cast<double>(i)) * (means[j] - means[i]);
  };
  const double tail = (1.0 - confidence) / 2.0;
  out.lo = quantile(tail);
  out.hi = quantile(1.0 - tail);
  return out;
}

}  // namespace mrq
