#pragma once

// Central finite differences against the tape's gradients, in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mrq/autodiff.hpp"

namespace gradcheck {

using Tape = mrq::ad::Tape<double>;
using Var = mrq::ad::Var<double>;
using Param = mrq::ad::Parameter<double>;

struct Result {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

inline double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

// `loss` builds a scalar on the tape, binding `params` as trainable. Every
// `stride`-th entry of each parameter is perturbed by +-h.
inline Result check(const std::function<Var(Tape&)>& loss, const std::vector<Param*>& params, double h = 1e-5,
                    int stride = 1) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    Tape tape(false);
    return loss(tape).value()(0, 0);
  };
  Result r;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); i += stride) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      const double up = value();
      p->value.data()[i] = orig - h;
      const double down = value();
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double e = rel_error(p->grad.data()[i], numeric);
      ++r.checked;
      if (e > r.max_rel_error) {
        r.max_rel_error = e;
        r.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(p->grad.data()[i]) +
                  " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace gradcheck
