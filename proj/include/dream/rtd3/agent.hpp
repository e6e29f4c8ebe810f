#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "dream/core/error.hpp"
#include "dream/core/random.hpp"
#include "dream/nn/adam.hpp"
#include "dream/replay/rcrb.hpp"
#include "dream/rtd3/networks.hpp"

namespace dream::rtd3 {

struct Td3Config {
  double gamma = 0.99;
  double tau = 0.005;
  double explore_sigma = 0.1;  // on the raw [-1, 1] action scale
  double target_noise = 0.2;
  double noise_clip = 0.5;
  double lr = 1e-3;
  int batch_size = 64;
  int policy_delay = 2;
  NetShape shape;
};

// Column-per-sample view of a replay batch, inputs already encoded for the networks.
struct Batch {
  Matrix s;       // 34 x B
  Matrix a;       // 2 x B, raw actions
  Eigen::RowVectorXd r;
  Matrix s_next;  // 34 x B
  Eigen::RowVectorXd done;

  Eigen::Index size() const { return s.cols(); }
};

inline Batch make_batch(const std::vector<replay::Experience>& exps, double max_range) {
  const auto n = static_cast<Eigen::Index>(exps.size());
  Batch b{Matrix(kStateWidth, n), Matrix(kActionWidth, n), Eigen::RowVectorXd(n), Matrix(kStateWidth, n),
          Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = exps[static_cast<std::size_t>(i)];
    encode_observation(e.s, max_range, b.s.col(i));
    encode_observation(e.s_next, max_range, b.s_next.col(i));
    b.a(0, i) = e.a[0];
    b.a(1, i) = e.a[1];
    b.r[i] = e.r;
    b.done[i] = e.done ? 1.0 : 0.0;
  }
  return b;
}

// y = r + gamma (1 - d) min(q1, q2), elementwise.
inline Eigen::RowVectorXd bellman_targets(const Eigen::RowVectorXd& r, const Eigen::RowVectorXd& done,
                                          const Eigen::RowVectorXd& q1, const Eigen::RowVectorXd& q2,
                                          double gamma) {
  Eigen::RowVectorXd y(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    y[i] = r[i] + gamma * (1.0 - done[i]) * std::min(q1[i], q2[i]);
  }
  return y;
}

struct SelectedAction {
  std::array<double, 2> raw{};
  sim::Action applied;
};

struct CriticLosses {
  double q1 = 0.0;
  double q2 = 0.0;
};

// Actor, twin critics, their targets and optimisers.
class Td3Agent {
 public:
  Td3Agent(const Td3Config& cfg, const sim::SimParams& sim, std::uint64_t seed)
      : cfg_(cfg),
        sim_(sim),
        actor_(cfg.shape, derive_seed(seed, 11)),
        critic1_(cfg.shape, derive_seed(seed, 12)),
        critic2_(cfg.shape, derive_seed(seed, 13)),
        actor_target_(actor_),
        critic1_target_(critic1_),
        critic2_target_(critic2_),
        actor_opt_(actor_.net.params.size(), {cfg.lr}),
        critic1_opt_(critic1_.params.size(), {cfg.lr}),
        critic2_opt_(critic2_.params.size(), {cfg.lr}),
        dropout_rng_(derive_seed(seed, 14)) {
    if (cfg.policy_delay < 1) throw usage_error("Td3Agent: policy_delay must be >= 1");
  }

  // Deterministic actor output, plus clipped Gaussian noise when exploring.
  SelectedAction select_action(std::span<const double> obs, bool explore, rng_t& noise_rng) const {
    Matrix x(kStateWidth, 1);
    encode_observation(obs, sim_.max_range, x.col(0));
    const Matrix out = actor_.net.predict(x);
    SelectedAction sel;
    for (int k = 0; k < 2; ++k) {
      double a = out(k, 0);
      if (explore) a += gaussian(noise_rng, 0.0, cfg_.explore_sigma);
      sel.raw[static_cast<std::size_t>(k)] = std::clamp(a, -1.0, 1.0);
    }
    sel.applied = scale_action(sel.raw[0], sel.raw[1], sim_);
    return sel;
  }

  SelectedAction select_action(const sim::Observation& obs, bool explore, rng_t& noise_rng) const {
    const auto arr = obs.to_array();
    return select_action(std::span<const double>(arr), explore, noise_rng);
  }

  // Target actions with clipped smoothing noise, then the min-of-twins Bellman target.
  Eigen::RowVectorXd compute_target(const Batch& b, rng_t& smoothing_rng) const {
    Matrix a_next = actor_target_.net.predict(b.s_next);
    for (Eigen::Index i = 0; i < a_next.size(); ++i) {
      const double eps = std::clamp(gaussian(smoothing_rng, 0.0, cfg_.target_noise), -cfg_.noise_clip, cfg_.noise_clip);
      a_next.data()[i] = std::clamp(a_next.data()[i] + eps, -1.0, 1.0);
    }
    const auto q1 = critic1_target_.q(b.s_next, a_next);
    const auto q2 = critic2_target_.q(b.s_next, a_next);
    return bellman_targets(b.r, b.done, q1, q2, cfg_.gamma);
  }

  // One Adam step per critic on MSE to the shared target.
  CriticLosses update_critics(const Batch& b, const Eigen::RowVectorXd& target) {
    CriticLosses losses;
    losses.q1 = critic_step(critic1_, critic1_opt_, b, target);
    losses.q2 = critic_step(critic2_, critic2_opt_, b, target);
    return losses;
  }

  CriticLosses update_critics(const Batch& b, rng_t& smoothing_rng) {
    return update_critics(b, compute_target(b, smoothing_rng));
  }

  // Every policy_delay-th iteration: ascend mean Q1(s, pi(s)), then soft-update all targets.
  // Returns false when the iteration is skipped.
  bool update_actor_and_targets(const Batch& b, long iteration, double* actor_loss = nullptr) {
    if (iteration % cfg_.policy_delay != 0) return false;
    const auto cache = actor_.net.forward(b.s, nn::TrainMode::Training, &dropout_rng_);
    const auto qc = critic1_.forward(b.s, cache.output, nn::TrainMode::Inference, nullptr);
    const double n = static_cast<double>(b.size());
    const double loss = -qc.head.output.mean();
    if (!std::isfinite(loss)) throw numeric_error("actor update: non-finite loss");
    Vector scratch = Vector::Zero(critic1_.params.size());
    const Matrix da = critic1_.backward(qc, Eigen::RowVectorXd::Constant(b.size(), -1.0 / n), scratch);
    Vector grad = actor_.net.zero_grad();
    actor_.net.backward(cache, da, grad);
    actor_opt_.step(actor_.net.params, grad);
    soft_update_targets(cfg_.tau);
    if (actor_loss != nullptr) *actor_loss = loss;
    return true;
  }

  void soft_update_targets(double tau) {
    nn::soft_update(actor_target_.net.params, actor_.net.params, tau);
    nn::soft_update(critic1_target_.params, critic1_.params, tau);
    nn::soft_update(critic2_target_.params, critic2_.params, tau);
  }

  const Td3Config& config() const { return cfg_; }
  const sim::SimParams& sim_params() const { return sim_; }
  ActorNet& actor() { return actor_; }
  const ActorNet& actor() const { return actor_; }
  CriticNet& critic1() { return critic1_; }
  CriticNet& critic2() { return critic2_; }
  const CriticNet& critic1() const { return critic1_; }
  const CriticNet& critic2() const { return critic2_; }
  ActorNet& actor_target() { return actor_target_; }
  CriticNet& critic1_target() { return critic1_target_; }
  CriticNet& critic2_target() { return critic2_target_; }
  const ActorNet& actor_target() const { return actor_target_; }
  const CriticNet& critic1_target() const { return critic1_target_; }
  const CriticNet& critic2_target() const { return critic2_target_; }
  long actor_updates() const { return actor_opt_.steps(); }
  long critic_updates() const { return critic1_opt_.steps(); }

 private:
  double critic_step(CriticNet& critic, nn::Adam& opt, const Batch& b, const Eigen::RowVectorXd& target) {
    const auto cache = critic.forward(b.s, b.a, nn::TrainMode::Training, &dropout_rng_);
    const Eigen::RowVectorXd diff = cache.head.output.row(0) - target;
    const double n = static_cast<double>(b.size());
    const double loss = diff.squaredNorm() / n;
    if (!std::isfinite(loss)) throw numeric_error("critic update: non-finite loss");
    Vector grad = Vector::Zero(critic.params.size());
    critic.backward(cache, (2.0 / n) * diff, grad);
    opt.step(critic.params, grad);
    return loss;
  }

  Td3Config cfg_;
  sim::SimParams sim_;
  ActorNet actor_;
  CriticNet critic1_;
  CriticNet critic2_;
  ActorNet actor_target_;
  CriticNet critic1_target_;
  CriticNet critic2_target_;
  nn::Adam actor_opt_;
  nn::Adam critic1_opt_;
  nn::Adam critic2_opt_;
  rng_t dropout_rng_;
};

}  // namespace dream::rtd3
