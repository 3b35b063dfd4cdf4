#pragma once

// Minimal reverse-mode differentiation over row-major matrices.
//
// Rows index the batch, columns index features. A Tape records every
// operation of one forward pass; backward() walks it in reverse and
// accumulates gradients into the Parameters that were bound as trainable.
// Tapes are single-use and not thread-safe.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mrq/errors.hpp"

namespace mrq::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<T>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<T>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Matrix<T> value) { return push(std::move(value), nullptr, nullptr, false, {}); }

  // Differentiable leaf owned by the tape; read its gradient with grad().
  Var<T> input(Matrix<T> value) { return push(std::move(value), nullptr, nullptr, grad_enabled_, {}); }

  // Binds a parameter by reference. When trainable, backward() adds into p.grad.
  Var<T> parameter(Parameter<T>& p, bool trainable = true) {
    const bool req = trainable && grad_enabled_;
    if (req && (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())) p.zero_grad();
    return push(Matrix<T>{}, &p.value, req ? &p : nullptr, req, {});
  }

  Var<T> frozen(const Parameter<T>& p) { return push(Matrix<T>{}, &p.value, nullptr, false, {}); }

  const Matrix<T>& value(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  const Matrix<T>& grad(Var<T> v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.has_grad) throw ContractViolation("no gradient recorded for node");
    return n.grad;
  }

  // Gradient accumulator of node `id`, zero-initialized on first access.
  Matrix<T>& grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad) {
      const Matrix<T>& v = value(id);
      n.grad.setZero(v.rows(), v.cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  // Records an operation result. `fn` runs during backward when any parent needs a gradient.
  Var<T> record(Matrix<T> value, std::initializer_list<int> parents, BackwardFn fn) {
    bool req = false;
    if (grad_enabled_) {
      for (int p : parents) req = req || requires_grad(p);
    }
    return push(std::move(value), nullptr, nullptr, req, req ? std::move(fn) : BackwardFn{});
  }

  void backward(Var<T> root) {
    if (root.rows() != 1 || root.cols() != 1) throw ContractViolation("backward() needs a scalar root");
    if (!requires_grad(root.id())) return;
    grad_buffer(root.id()).setOnes();
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.requires_grad || !n.has_grad) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) n.param->grad += n.grad;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    const Matrix<T>* external = nullptr;
    Parameter<T>* param = nullptr;
    Matrix<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var<T> push(Matrix<T> value, const Matrix<T>* external, Parameter<T>* param, bool req, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.param = param;
    n.requires_grad = req;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

namespace detail {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

template <typename T>
void accumulate(Tape<T>& t, int id, const Matrix<T>& g) {
  if (t.requires_grad(id)) t.grad_buffer(id) += g;
}

}  // namespace detail

// y = x W^T + b, with W stored [out, in] and b [1, out].
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  if (x.cols() != w.cols()) {
    throw ConfigError("linear: input width " + std::to_string(x.cols()) + " does not match layer in-size " +
                      std::to_string(w.cols()));
  }
  Tape<T>& t = x.tape();
  Matrix<T> y = x.value() * w.value().transpose();
  y.rowwise() += b.value().row(0);
  const int xi = x.id(), wi = w.id(), bi = b.id();
  return t.record(std::move(y), {xi, wi, bi}, [xi, wi, bi](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    if (tp.requires_grad(xi)) tp.grad_buffer(xi).noalias() += g * tp.value(wi);
    if (tp.requires_grad(wi)) tp.grad_buffer(wi).noalias() += g.transpose() * tp.value(xi);
    if (tp.requires_grad(bi)) tp.grad_buffer(bi) += g.colwise().sum();
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "add");
  const int ai = a.id(), bi = b.id();
  return a.tape().record(a.value() + b.value(), {ai, bi}, [ai, bi](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    detail::accumulate(tp, ai, g);
    detail::accumulate(tp, bi, g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "sub");
  const int ai = a.id(), bi = b.id();
  return a.tape().record(a.value() - b.value(), {ai, bi}, [ai, bi](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    detail::accumulate(tp, ai, g);
    if (tp.requires_grad(bi)) tp.grad_buffer(bi) -= g;
  });
}

// Elementwise product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "mul");
  const int ai = a.id(), bi = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {ai, bi}, [ai, bi](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    if (tp.requires_grad(ai)) tp.grad_buffer(ai) += g.cwiseProduct(tp.value(bi));
    if (tp.requires_grad(bi)) tp.grad_buffer(bi) += g.cwiseProduct(tp.value(ai));
  });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  const int ai = a.id();
  return a.tape().record(a.value() * c, {ai}, [ai, c](Tape<T>& tp, int self) {
    detail::accumulate<T>(tp, ai, tp.grad_buffer(self) * c);
  });
}

// Multiplies each row of x [B, D] by the matching entry of a column w [B, 1].
template <typename T>
Var<T> mul_rows(Var<T> x, Var<T> w) {
  if (w.cols() != 1 || w.rows() != x.rows()) throw ConfigError("mul_rows: weight must be [B, 1]");
  const int xi = x.id(), wi = w.id();
  Matrix<T> y = x.value().array().colwise() * w.value().col(0).array();
  return x.tape().record(std::move(y), {xi, wi}, [xi, wi](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    if (tp.requires_grad(xi)) {
      tp.grad_buffer(xi).array() += g.array().colwise() * tp.value(wi).col(0).array();
    }
    if (tp.requires_grad(wi)) tp.grad_buffer(wi) += g.cwiseProduct(tp.value(xi)).rowwise().sum();
  });
}

template <typename T>
Var<T> square(Var<T> a) {
  const int ai = a.id();
  return a.tape().record(a.value().array().square().matrix(), {ai}, [ai](Tape<T>& tp, int self) {
    detail::accumulate<T>(tp, ai, (T(2) * tp.grad_buffer(self).array() * tp.value(ai).array()).matrix());
  });
}

template <typename T>
Var<T> elu(Var<T> a) {
  const int ai = a.id();
  Matrix<T> y = a.value().unaryExpr([](T v) { return v > T(0) ? v : std::expm1(v); });
  return a.tape().record(std::move(y), {ai}, [ai](Tape<T>& tp, int self) {
    const Matrix<T>& y = tp.value(self);
    const Matrix<T>& x = tp.value(ai);
    Matrix<T> d = x.binaryExpr(y, [](T xv, T yv) { return xv > T(0) ? T(1) : yv + T(1); });
    detail::accumulate<T>(tp, ai, tp.grad_buffer(self).cwiseProduct(d));
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  const int ai = a.id();
  return a.tape().record(a.value().cwiseMax(T(0)), {ai}, [ai](Tape<T>& tp, int self) {
    Matrix<T> d = (tp.value(ai).array() > T(0)).template cast<T>().matrix();
    detail::accumulate<T>(tp, ai, tp.grad_buffer(self).cwiseProduct(d));
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  const int ai = a.id();
  return a.tape().record(a.value().array().tanh().matrix(), {ai}, [ai](Tape<T>& tp, int self) {
    const Matrix<T>& y = tp.value(self);
    detail::accumulate<T>(tp, ai, (tp.grad_buffer(self).array() * (T(1) - y.array().square())).matrix());
  });
}

// Normalizes each row to zero mean and unit variance; no learnable affine.
template <typename T>
Var<T> layer_norm(Var<T> a, T eps = T(1e-5)) {
  const int ai = a.id();
  const Matrix<T>& x = a.value();
  const Eigen::Index d = x.cols();
  Matrix<T> y(x.rows(), d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + eps);
    y.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  return a.tape().record(std::move(y), {ai}, [ai, inv_std](Tape<T>& tp, int self) {
    if (!tp.requires_grad(ai)) return;
    const Matrix<T>& g = tp.grad_buffer(self);
    const Matrix<T>& xh = tp.value(self);
    Matrix<T>& gx = tp.grad_buffer(ai);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const T gm = g.row(r).mean();
      const T gxm = g.row(r).cwiseProduct(xh.row(r)).mean();
      gx.row(r).array() += inv_std(r) * (g.row(r).array() - gm - xh.row(r).array() * gxm);
    }
  });
}

namespace detail {
template <typename T>
Matrix<T> row_softmax(const Matrix<T>& x) {
  Matrix<T> y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  y.array().colwise() /= y.rowwise().sum().array();
  return y;
}
}  // namespace detail

template <typename T>
Var<T> softmax(Var<T> a) {
  const int ai = a.id();
  return a.tape().record(detail::row_softmax(a.value()), {ai}, [ai](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    const Matrix<T>& y = tp.value(self);
    Eigen::Matrix<T, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
    detail::accumulate<T>(tp, ai, (y.array() * (g.array().colwise() - dot.array())).matrix());
  });
}

// Per-row cross entropy -sum_i target_i log softmax(logits)_i, returned as [B, 1].
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, const Matrix<T>& target) {
  if (target.rows() != logits.rows() || target.cols() != logits.cols()) {
    throw ConfigError("softmax_cross_entropy: target shape does not match logits");
  }
  const Matrix<T>& x = logits.value();
  Eigen::Matrix<T, Eigen::Dynamic, 1> mx = x.rowwise().maxCoeff();
  Matrix<T> shifted = x.colwise() - mx;
  Eigen::Matrix<T, Eigen::Dynamic, 1> lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix<T> log_sm = shifted.colwise() - lse;
  Matrix<T> loss = -(target.cwiseProduct(log_sm)).rowwise().sum();
  const int li = logits.id();
  return logits.tape().record(std::move(loss), {li}, [li, log_sm, target](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    Matrix<T> sm = log_sm.array().exp().matrix();
    Eigen::Matrix<T, Eigen::Dynamic, 1> tsum = target.rowwise().sum();
    Matrix<T> d = (sm.array().colwise() * tsum.array()).matrix() - target;
    detail::accumulate<T>(tp, li, (d.array().colwise() * g.col(0).array()).matrix());
  });
}

// Elementwise Huber loss with threshold 1.
template <typename T>
Var<T> huber(Var<T> a) {
  const int ai = a.id();
  Matrix<T> y = a.value().unaryExpr([](T v) {
    const T av = std::abs(v);
    return av < T(1) ? T(0.5) * v * v : av - T(0.5);
  });
  return a.tape().record(std::move(y), {ai}, [ai](Tape<T>& tp, int self) {
    Matrix<T> d = tp.value(ai).unaryExpr([](T v) { return std::abs(v) < T(1) ? v : (v > T(0) ? T(1) : T(-1)); });
    detail::accumulate<T>(tp, ai, tp.grad_buffer(self).cwiseProduct(d));
  });
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row mismatch");
  Matrix<T> y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  const int ai = a.id(), bi = b.id();
  const Eigen::Index ac = a.cols(), bc = b.cols();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi, ac, bc](Tape<T>& tp, int self) {
    const Matrix<T>& g = tp.grad_buffer(self);
    if (tp.requires_grad(ai)) tp.grad_buffer(ai) += g.leftCols(ac);
    if (tp.requires_grad(bi)) tp.grad_buffer(bi) += g.rightCols(bc);
  });
}

template <typename T>
Var<T> slice_cols(Var<T> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ConfigError("slice_cols: out of range");
  const int ai = a.id();
  return a.tape().record(a.value().middleCols(start, count), {ai}, [ai, start, count](Tape<T>& tp, int self) {
    if (tp.requires_grad(ai)) tp.grad_buffer(ai).middleCols(start, count) += tp.grad_buffer(self);
  });
}

// Row sums: [B, D] -> [B, 1].
template <typename T>
Var<T> sum_cols(Var<T> a) {
  const int ai = a.id();
  const Eigen::Index d = a.cols();
  return a.tape().record(a.value().rowwise().sum(), {ai}, [ai, d](Tape<T>& tp, int self) {
    if (tp.requires_grad(ai)) tp.grad_buffer(ai).colwise() += tp.grad_buffer(self).col(0);
    (void)d;
  });
}

// Column means: [B, D] -> [B, 1].
template <typename T>
Var<T> mean_cols(Var<T> a) {
  return scale(sum_cols(a), T(1) / static_cast<T>(a.cols()));
}

template <typename T>
Var<T> sum_all(Var<T> a) {
  const int ai = a.id();
  Matrix<T> y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape().record(std::move(y), {ai}, [ai](Tape<T>& tp, int self) {
    if (tp.requires_grad(ai)) tp.grad_buffer(ai).array() += tp.grad_buffer(self)(0, 0);
  });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.value().size()));
}

// Geometry of a square-kernel, unpadded 2-d convolution over channel-first images.
struct ConvGeometry {
  int in_channels = 1;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 32;
  int kernel = 3;
  int stride = 1;

  int out_height() const { return (in_height - kernel) / stride + 1; }
  int out_width() const { return (in_width - kernel) / stride + 1; }
  int in_size() const { return in_channels * in_height * in_width; }
  int out_size() const { return out_channels * out_height() * out_width(); }
  int patch_size() const { return in_channels * kernel * kernel; }
};

// x: [B, C*H*W], w: [Cout, C*k*k], b: [1, Cout] -> [B, Cout*Ho*Wo].
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, const ConvGeometry& geo) {
  if (x.cols() != geo.in_size()) throw ConfigError("conv2d: input size does not match geometry");
  if (geo.out_height() < 1 || geo.out_width() < 1) throw ConfigError("conv2d: image too small for kernel");
  const Eigen::Index batch = x.rows();
  const int ho = geo.out_height(), wo = geo.out_width(), k = geo.kernel, s = geo.stride;
  const int hw_out = ho * wo;
  const int patch = geo.patch_size();
  // cols: [patch, B*Ho*Wo], column index = b*hw_out + oy*wo + ox
  Matrix<T> cols(patch, batch * hw_out);
  const Matrix<T>& xv = x.value();
  for (Eigen::Index bi = 0; bi < batch; ++bi) {
    const T* img = xv.row(bi).data();
    for (int c = 0; c < geo.in_channels; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* dst = cols.row((c * k + ky) * k + kx).data() + bi * hw_out;
          for (int oy = 0; oy < ho; ++oy) {
            const T* src = img + (c * geo.in_height + oy * s + ky) * geo.in_width + kx;
            for (int ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = src[ox * s];
          }
        }
      }
    }
  }
  Matrix<T> out = w.value() * cols;  // [Cout, B*hw_out]
  Matrix<T> y(batch, geo.out_channels * hw_out);
  for (Eigen::Index bi = 0; bi < batch; ++bi) {
    for (int c = 0; c < geo.out_channels; ++c) {
      y.row(bi).segment(c * hw_out, hw_out) =
          out.row(c).segment(bi * hw_out, hw_out).array() + b.value()(0, c);
    }
  }
  const int xi = x.id(), wi = w.id(), bidx = b.id();
  return x.tape().record(
      std::move(y), {xi, wi, bidx}, [xi, wi, bidx, geo, cols = std::move(cols), batch](Tape<T>& tp, int self) {
        const Matrix<T>& g = tp.grad_buffer(self);
        const int ho = geo.out_height(), wo = geo.out_width(), k = geo.kernel, s = geo.stride;
        const int hw_out = ho * wo;
        Matrix<T> gout(geo.out_channels, batch * hw_out);
        for (Eigen::Index bi = 0; bi < batch; ++bi) {
          for (int c = 0; c < geo.out_channels; ++c) {
            gout.row(c).segment(bi * hw_out, hw_out) = g.row(bi).segment(c * hw_out, hw_out);
          }
        }
        if (tp.requires_grad(bidx)) tp.grad_buffer(bidx) += gout.rowwise().sum().transpose();
        if (tp.requires_grad(wi)) tp.grad_buffer(wi).noalias() += gout * cols.transpose();
        if (tp.requires_grad(xi)) {
          Matrix<T> gcols = tp.value(wi).transpose() * gout;  // [patch, B*hw_out]
          Matrix<T>& gx = tp.grad_buffer(xi);
          for (Eigen::Index bi = 0; bi < batch; ++bi) {
            T* img = gx.row(bi).data();
            for (int c = 0; c < geo.in_channels; ++c) {
              for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                  const T* src = gcols.row((c * k + ky) * k + kx).data() + bi * hw_out;
                  for (int oy = 0; oy < ho; ++oy) {
                    T* dst = img + (c * geo.in_height + oy * s + ky) * geo.in_width + kx;
                    for (int ox = 0; ox < wo; ++ox) dst[ox * s] += src[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      });
}

}  // namespace mrq::ad
