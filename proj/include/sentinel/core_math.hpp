#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sentinel/errors.hpp"

namespace sentinel {

// Dense row-major matrix; every weight in the library is one of these.
template <class Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Activations travel as row vectors: x * W, following the x_t U convention.
template <class Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Mutable views over a model's tensors in a fixed, model-defined order.
template <class Scalar>
using ParamRefs = std::vector<Tensor<Scalar>*>;

inline constexpr double kLogEpsilon = 1e-12;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

// x * w (+ b). b must be a single row broadcast over the rows of the product.
template <class X, class W>
Tensor<typename X::Scalar> affine(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<W>& w) {
  if (x.cols() != w.rows()) {
    throw ShapeError("affine: cannot multiply " + shape_string(x.rows(), x.cols()) + " by " +
                     shape_string(w.rows(), w.cols()));
  }
  return x * w;
}

template <class X, class W, class B>
Tensor<typename X::Scalar> affine(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<W>& w,
                                  const Eigen::MatrixBase<B>& b) {
  Tensor<typename X::Scalar> out = affine(x, w);
  if (b.rows() != 1 || b.cols() != out.cols()) {
    throw ShapeError("affine: bias " + shape_string(b.rows(), b.cols()) +
                     " does not broadcast over " + shape_string(out.rows(), out.cols()));
  }
  out.rowwise() += b.row(0);
  return out;
}

template <class Scalar>
inline Scalar sigmoid_scalar(Scalar x) {
  // Split by sign so exp never sees a large positive argument.
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <class D>
typename D::PlainObject sigmoid(const Eigen::MatrixBase<D>& x) {
  return x.unaryExpr([](typename D::Scalar v) { return sigmoid_scalar(v); });
}

template <class D>
typename D::PlainObject tanh_act(const Eigen::MatrixBase<D>& x) {
  return x.unaryExpr([](typename D::Scalar v) { return std::tanh(v); });
}

template <class D>
typename D::PlainObject softmax(const Eigen::MatrixBase<D>& x) {
  if (x.size() == 0) throw UsageError("softmax: empty input");
  using Scalar = typename D::Scalar;
  const Scalar shift = x.maxCoeff();
  typename D::PlainObject e = (x.array() - shift).exp().matrix();
  return e / e.sum();
}

// log(sum(exp(x))) accumulated in double regardless of the input scalar.
template <class D>
double log_sum_exp(const Eigen::MatrixBase<D>& x) {
  if (x.size() == 0) throw UsageError("log_sum_exp: empty input");
  const double shift = static_cast<double>(x.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    sum += std::exp(static_cast<double>(x(i)) - shift);
  }
  return shift + std::log(sum);
}

// -ln(pred[target]) with pred[target] clamped below at 1e-12.
template <class D>
double cross_entropy(const Eigen::MatrixBase<D>& pred, std::size_t target) {
  if (target >= static_cast<std::size_t>(pred.size())) {
    throw UsageError("cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(pred.size()) + " classes");
  }
  const double p = static_cast<double>(pred(static_cast<Eigen::Index>(target)));
  return -std::log(std::max(p, kLogEpsilon));
}

// Same quantity computed from logits; exact for the uniform distribution.
template <class D>
double cross_entropy_from_logits(const Eigen::MatrixBase<D>& logits, std::size_t target) {
  if (target >= static_cast<std::size_t>(logits.size())) {
    throw UsageError("cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double lse = log_sum_exp(logits);
  const double nll = lse - static_cast<double>(logits(static_cast<Eigen::Index>(target)));
  return std::min(nll, -std::log(kLogEpsilon));
}

template <class Scalar>
void check_same_shapes(const ParamRefs<Scalar>& a, const ParamRefs<Scalar>& b, const char* who) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(a.size()) + " parameters vs " +
                     std::to_string(b.size()) + " gradients");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) {
      throw ShapeError(std::string(who) + ": parameter " + shape_string(a[i]->rows(), a[i]->cols()) +
                       " vs gradient " + shape_string(b[i]->rows(), b[i]->cols()));
    }
  }
}

template <class Scalar>
double global_norm(const ParamRefs<Scalar>& grads) {
  double sq = 0.0;
  for (const auto* g : grads) sq += static_cast<double>(g->squaredNorm());
  return std::sqrt(sq);
}

// Factor that brings the global gradient norm down to `threshold` (1 if already below).
inline double clip_scale(double norm, double threshold) {
  if (threshold <= 0.0 || norm <= threshold) return 1.0;
  return threshold / norm;
}

// p <- p - lr * g, with optional global-norm clipping (threshold <= 0 disables).
// Returns the gradient norm before clipping.
template <class Scalar>
double sgd_step(const ParamRefs<Scalar>& params, const ParamRefs<Scalar>& grads, double lr,
                double clip_threshold = 0.0) {
  check_same_shapes(params, grads, "sgd_step");
  const double norm = global_norm(grads);
  const auto step = static_cast<Scalar>(lr * clip_scale(norm, clip_threshold));
  for (std::size_t i = 0; i < params.size(); ++i) {
    *params[i] -= step * *grads[i];
  }
  return norm;
}

// Adaptive-moment optimizer, selectable through configuration.
template <class Scalar>
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double step(const ParamRefs<Scalar>& params, const ParamRefs<Scalar>& grads, double lr,
              double clip_threshold = 0.0) {
    check_same_shapes(params, grads, "adam_step");
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(Tensor<Scalar>::Zero(p->rows(), p->cols()));
        second_.push_back(Tensor<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    const double norm = global_norm(grads);
    const auto scale = static_cast<Scalar>(clip_scale(norm, clip_threshold));
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    const auto rate = static_cast<Scalar>(lr * std::sqrt(c2) / c1);
    const auto eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = (scale * grads[i]->array()).eval();
      first_[i].array() = b1 * first_[i].array() + (Scalar(1) - b1) * g;
      second_[i].array() = b2 * second_[i].array() + (Scalar(1) - b2) * g.square();
      params[i]->array() -= rate * first_[i].array() / (second_[i].array().sqrt() + eps);
    }
    return norm;
  }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<Scalar>> first_, second_;
};

template <class Scalar>
bool all_finite(const ParamRefs<Scalar>& tensors) {
  return std::all_of(tensors.begin(), tensors.end(),
                     [](const Tensor<Scalar>* t) { return t->allFinite(); });
}

// Central-difference check of analytic gradients, in double precision.
// `loss` must read the current contents of `params`; each entry is perturbed
// in place and restored. Returns max |a-n| / max(|a|, |n|, 1e-8).
double gradient_check(const std::function<double()>& loss, const ParamRefs<double>& params,
                      const ParamRefs<double>& analytic, double epsilon = 1e-5);

}  // namespace sentinel
