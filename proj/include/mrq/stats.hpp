#pragma once

#include <cstdint>
#include <span>

namespace mrq {

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap interval for the mean. One sample, or identical
// samples, give a zero-width interval.
Interval bootstrap_ci(std::span<const double> values, int resamples = 10'000, double confidence = 0.95,
                      std::uint64_t seed = 0);

}  // namespace mrq
