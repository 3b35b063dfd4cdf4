#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "mrq/autodiff.hpp"

namespace mrq::optim {

struct AdamWConfig {
  double lr = 3e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> grad_clip_norm;  // global L2 norm over all parameters
};

// AdamW with decoupled weight decay: p <- p * (1 - lr * wd) before the Adam step.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<ad::Parameter<T>*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(ad::Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  // Returns the global gradient norm measured before clipping.
  double step() {
    double sq = 0.0;
    for (auto* p : params_) {
      if (p->grad.size() != p->value.size()) p->zero_grad();
      sq += static_cast<double>(p->grad.squaredNorm());
    }
    const double norm = std::sqrt(sq);
    T clip_scale = T(1);
    if (cfg_.grad_clip_norm && norm > *cfg_.grad_clip_norm) {
      clip_scale = static_cast<T>(*cfg_.grad_clip_norm / (norm + 1e-6));
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    const T decay = static_cast<T>(1.0 - cfg_.lr * cfg_.weight_decay);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / bc1);
    const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      p.value *= decay;
      auto g = (p.grad.array() * clip_scale);
      m_[i].array() = b1 * m_[i].array() + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g.square();
      p.value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() / sqrt_bc2 + eps);
    }
    return norm;
  }

  const AdamWConfig& config() const { return cfg_; }
  long long step_count() const { return step_count_; }
  std::vector<ad::Matrix<T>>& first_moments() { return m_; }
  std::vector<ad::Matrix<T>>& second_moments() { return v_; }
  void set_step_count(long long n) { step_count_ = n; }

 private:
  std::vector<ad::Parameter<T>*> params_;
  AdamWConfig cfg_;
  std::vector<ad::Matrix<T>> m_, v_;
  long long step_count_ = 0;
};

}  // namespace mrq::optim
