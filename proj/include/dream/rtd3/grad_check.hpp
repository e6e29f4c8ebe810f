#pragma once

#include "dream/nn/grad_check.hpp"
#include "dream/rtd3/networks.hpp"

namespace dream::rtd3 {

namespace detail {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, rng_t& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

inline void jitter(Vector& p, std::uint64_t seed) {
  rng_t rng(seed);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += uniform(rng, -0.1, 0.1);
}

inline std::vector<std::size_t> pick(std::size_t n, std::size_t samples, std::uint64_t seed) {
  return nn::sample_indices(n, samples == 0 ? n : samples, seed);
}

}  // namespace detail

// Actor parameters under the actual actor objective: L = -mean Q1(s, pi(s)), actor in training
// mode with a fixed dropout mask, critic frozen in inference mode.
inline nn::GradCheckReport actor_grad_check(const NetShape& shape, std::uint64_t seed, std::size_t samples = 0,
                                            int batch = 4) {
  ActorNet actor(shape, derive_seed(seed, 1));
  CriticNet critic(shape, derive_seed(seed, 2));
  detail::jitter(actor.net.params, derive_seed(seed, 3));
  detail::jitter(critic.params, derive_seed(seed, 4));
  rng_t rng(derive_seed(seed, 5));
  const Matrix s = detail::random_matrix(kStateWidth, batch, 0.0, 1.0, rng);
  const std::uint64_t mask_seed = derive_seed(seed, 6);
  const double n = static_cast<double>(batch);

  const auto loss = [&](const Vector& p) {
    rng_t mask(mask_seed);
    const auto cache = actor.net.layout.forward(nn::as_span(p), s, nn::TrainMode::Training, &mask);
    return -critic.q(s, cache.output).mean();
  };
  rng_t mask(mask_seed);
  const auto cache = actor.net.forward(s, nn::TrainMode::Training, &mask);
  const auto qc = critic.forward(s, cache.output, nn::TrainMode::Inference, nullptr);
  Vector scratch = Vector::Zero(critic.params.size());
  const Matrix da = critic.backward(qc, Eigen::RowVectorXd::Constant(batch, -1.0 / n), scratch);
  Vector grad = actor.net.zero_grad();
  actor.net.backward(cache, da, grad);
  const auto idx = detail::pick(actor.parameter_count(), samples, derive_seed(seed, 7));
  return nn::finite_difference_check(loss, grad, actor.net.params, idx);
}

// Critic parameters under the TD loss mean (Q(s, a) - y)^2 with fixed targets and dropout mask.
inline nn::GradCheckReport critic_grad_check(const NetShape& shape, std::uint64_t seed, std::size_t samples = 0,
                                             int batch = 4) {
  CriticNet critic(shape, derive_seed(seed, 1));
  detail::jitter(critic.params, derive_seed(seed, 2));
  rng_t rng(derive_seed(seed, 3));
  const Matrix s = detail::random_matrix(kStateWidth, batch, 0.0, 1.0, rng);
  const Matrix a = detail::random_matrix(kActionWidth, batch, -1.0, 1.0, rng);
  const Eigen::RowVectorXd y = detail::random_matrix(1, batch, -2.0, 2.0, rng).row(0);
  const std::uint64_t mask_seed = derive_seed(seed, 4);
  const double n = static_cast<double>(batch);

  CriticNet probe = critic;
  const auto loss = [&](const Vector& p) {
    probe.params = p;
    rng_t mask(mask_seed);
    const auto c = probe.forward(s, a, nn::TrainMode::Training, &mask);
    return (c.head.output.row(0) - y).squaredNorm() / n;
  };
  rng_t mask(mask_seed);
  const auto c = critic.forward(s, a, nn::TrainMode::Training, &mask);
  const Eigen::RowVectorXd diff = c.head.output.row(0) - y;
  Vector grad = Vector::Zero(critic.params.size());
  critic.backward(c, (2.0 / n) * diff, grad);
  const auto idx = detail::pick(critic.parameter_count(), samples, derive_seed(seed, 5));
  return nn::finite_difference_check(loss, grad, critic.params, idx);
}

}  // namespace dream::rtd3
