#pragma once

#include <cmath>

#include "dream/core/error.hpp"
#include "dream/nn/dense.hpp"

namespace dream::nn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, AdamParams hp) : hp_(hp), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    if (grad.size() != params.size() || grad.size() != m_.size()) {
      throw usage_error("Adam::step: size mismatch");
    }
    if (!grad.allFinite()) throw numeric_error("Adam::step: non-finite gradient, step aborted");
    ++steps_;
    m_ = hp_.beta1 * m_ + (1.0 - hp_.beta1) * grad;
    v_ = hp_.beta2 * v_ + (1.0 - hp_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(steps_));
    params.array() -= hp_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + hp_.eps);
  }

  long steps() const { return steps_; }
  const AdamParams& hyper() const { return hp_; }
  void set_lr(double lr) { hp_.lr = lr; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  AdamParams hp_;
  Vector m_;
  Vector v_;
  long steps_ = 0;
};

// target <- tau * source + (1 - tau) * target, elementwise.
inline void soft_update(Vector& target, const Vector& source, double tau) {
  if (target.size() != source.size()) throw usage_error("soft_update: size mismatch");
  if (tau == 1.0) {
    target = source;
    return;
  }
  target = tau * source + (1.0 - tau) * target;
}

}  // namespace dream::nn
