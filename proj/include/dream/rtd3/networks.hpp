#pragma once

#include <array>
#include <span>

#include "dream/nn/dense.hpp"
#include "dream/sim/world.hpp"

namespace dream::rtd3 {

using nn::Matrix;
using nn::Vector;

inline constexpr int kStateWidth = static_cast<int>(sim::kObservationSize);
inline constexpr int kActionWidth = 2;

struct NetShape {
  int hidden1 = 256;
  int hidden2 = 128;
  int action_hidden = 256;  // critic action pathway
  int fusion_hidden = 128;  // critic layer after concatenation
  double actor_dropout = 0.2;
  double critic_dropout = 0.0;  // critic runs without dropout; see README
};

// Fixed input scaling so all 34 inputs are O(1): lidar and goal distance by max range,
// bearing by pi; velocities are already within [-1, 1].
inline void encode_observation(std::span<const double> obs, double max_range, Eigen::Ref<Vector> out) {
  for (std::size_t i = 0; i < sim::kLidarSegments; ++i) out[static_cast<Eigen::Index>(i)] = obs[i] / max_range;
  const auto k = static_cast<Eigen::Index>(sim::kLidarSegments);
  out[k + 0] = obs[sim::kLidarSegments + 0] / max_range;
  out[k + 1] = obs[sim::kLidarSegments + 1] / sim::kPi;
  out[k + 2] = obs[sim::kLidarSegments + 2];
  out[k + 3] = obs[sim::kLidarSegments + 3];
}

inline nn::DenseNetSpec actor_spec(const NetShape& s = {}) {
  return nn::make_mlp(kStateWidth, {s.hidden1, s.hidden2}, kActionWidth, true, s.actor_dropout,
                      nn::Activation::Relu, nn::Activation::Tanh);
}

// Raw actor output a in [-1, 1]^2 -> applied command [v_max (a1 + 1) / 2, omega_max a2].
inline sim::Action scale_action(double a1, double a2, const sim::SimParams& p) {
  return {p.v_max * (a1 + 1.0) / 2.0, p.omega_max * a2};
}

struct ActorNet {
  nn::DenseNet net;

  ActorNet() = default;
  ActorNet(const NetShape& shape, std::uint64_t seed) : net(actor_spec(shape), seed) {}

  std::size_t parameter_count() const { return net.layout.size(); }
};

inline nn::DenseNetSpec critic_state_spec(const NetShape& s) {
  nn::DenseNetSpec spec;
  spec.input_width = kStateWidth;
  spec.layers = {{s.hidden1, true, nn::Activation::Relu, s.critic_dropout},
                 {s.hidden2, true, nn::Activation::Relu, s.critic_dropout}};
  return spec;
}

inline nn::DenseNetSpec critic_action_spec(const NetShape& s) {
  nn::DenseNetSpec spec;
  spec.input_width = kActionWidth;
  spec.layers = {{s.action_hidden, false, nn::Activation::Relu, 0.0}};
  return spec;
}

inline nn::DenseNetSpec critic_head_spec(const NetShape& s) {
  nn::DenseNetSpec spec;
  spec.input_width = s.hidden2 + s.action_hidden;
  spec.layers = {{s.fusion_hidden, true, nn::Activation::Relu, s.critic_dropout},
                 {1, false, nn::Activation::None, 0.0}};
  return spec;
}

struct CriticCache {
  nn::ForwardCache state;
  nn::ForwardCache action;
  nn::ForwardCache head;
};

// Q(s, a): state pathway and action pathway, concatenated, then a fusion layer to a scalar.
// All parameters in one flat vector: [state | action | head].
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(const NetShape& shape, std::uint64_t seed)
      : state_(critic_state_spec(shape)), action_(critic_action_spec(shape)), head_(critic_head_spec(shape)) {
    params = Vector::Zero(static_cast<Eigen::Index>(size()));
    rng_t rng(seed);
    state_.init_params(state_span(params), rng);
    action_.init_params(action_span(params), rng);
    head_.init_params(head_span(params), rng);
  }

  std::size_t size() const { return state_.size() + action_.size() + head_.size(); }
  std::size_t parameter_count() const { return size(); }

  CriticCache forward(const Matrix& s, const Matrix& a, nn::TrainMode mode, rng_t* rng) const {
    CriticCache c;
    c.state = state_.forward(state_span(params), s, mode, rng);
    c.action = action_.forward(action_span(params), a, mode, rng);
    Matrix joint(c.state.output.rows() + c.action.output.rows(), s.cols());
    joint << c.state.output, c.action.output;
    c.head = head_.forward(head_span(params), joint, mode, rng);
    return c;
  }

  Eigen::RowVectorXd q(const Matrix& s, const Matrix& a) const {
    return forward(s, a, nn::TrainMode::Inference, nullptr).head.output.row(0);
  }

  // Accumulates parameter gradients into grad; returns dLoss/dAction (2 x batch).
  Matrix backward(const CriticCache& c, const Eigen::RowVectorXd& dq, Vector& grad) const {
    const Matrix djoint = head_.backward(head_span(params), c.head, Matrix(dq), head_span(grad));
    const auto hs = c.state.output.rows();
    state_.backward(state_span(params), c.state, djoint.topRows(hs), state_span(grad));
    return action_.backward(action_span(params), c.action, djoint.bottomRows(djoint.rows() - hs),
                            action_span(grad));
  }

  const nn::DenseLayout& state_layout() const { return state_; }
  const nn::DenseLayout& action_layout() const { return action_; }
  const nn::DenseLayout& head_layout() const { return head_; }

  Vector params;

 private:
  std::span<double> state_span(Vector& p) const { return {p.data(), state_.size()}; }
  std::span<double> action_span(Vector& p) const { return {p.data() + state_.size(), action_.size()}; }
  std::span<double> head_span(Vector& p) const { return {p.data() + state_.size() + action_.size(), head_.size()}; }
  std::span<const double> state_span(const Vector& p) const { return {p.data(), state_.size()}; }
  std::span<const double> action_span(const Vector& p) const { return {p.data() + state_.size(), action_.size()}; }
  std::span<const double> head_span(const Vector& p) const {
    return {p.data() + state_.size() + action_.size(), head_.size()};
  }

  nn::DenseLayout state_;
  nn::DenseLayout action_;
  nn::DenseLayout head_;
};

struct ParameterCounts {
  std::size_t refined_actor = 0;
  std::size_t baseline_actor = 0;
  std::size_t refined_critic = 0;
  std::size_t baseline_critic = 0;

  double actor_ratio() const { return static_cast<double>(refined_actor) / static_cast<double>(baseline_actor); }
  double total_ratio() const {
    return static_cast<double>(refined_actor + 2 * refined_critic) /
           static_cast<double>(baseline_actor + 2 * baseline_critic);
  }
};

// Refined shape (256/128) against the 800/600 baseline, both with layer norm.
inline ParameterCounts count_parameters(const NetShape& refined = {}) {
  NetShape baseline = refined;
  baseline.hidden1 = 800;
  baseline.hidden2 = 600;
  baseline.action_hidden = 600;
  baseline.fusion_hidden = 600;
  const auto critic_size = [](const NetShape& s) {
    return critic_state_spec(s).parameter_count() + critic_action_spec(s).parameter_count() +
           critic_head_spec(s).parameter_count();
  };
  return {actor_spec(refined).parameter_count(), actor_spec(baseline).parameter_count(), critic_size(refined),
          critic_size(baseline)};
}

}  // namespace dream::rtd3
