#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "dream/core/random.hpp"
#include "dream/nn/dense.hpp"

namespace dream::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Floor for losses far from unit scale: a central difference at eps cannot resolve derivatives
// much below machine-epsilon * |L| / eps.
inline double loss_floor(double loss) { return 1e-6 * std::max(1.0, std::abs(loss)); }

// Central finite differences of `loss` at the chosen indices against `analytic`.
inline GradCheckReport finite_difference_check(const std::function<double(const Vector&)>& loss,
                                               const Vector& analytic, Vector params,
                                               const std::vector<std::size_t>& indices, double eps = 1e-5,
                                               double floor = 1e-6) {
  GradCheckReport report;
  for (std::size_t idx : indices) {
    const auto i = static_cast<Eigen::Index>(idx);
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss(params);
    params[i] = saved - eps;
    const double down = loss(params);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric, floor);
    if (report.checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = idx;
    }
    ++report.checked;
  }
  return report;
}

// `count` distinct indices from [0, n), or all of them when count >= n.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (count >= n) return all;
  rng_t rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

// Checks a dense net's backward pass on a random scalar loss sum(C .* f(X)), training mode with a
// fixed dropout mask so both finite-difference probes see the same network.
inline GradCheckReport grad_check(const DenseNetSpec& spec, std::uint64_t seed, std::size_t samples = 0,
                                  int batch = 3) {
  const DenseLayout layout(spec);
  rng_t rng(seed);
  Vector params = layout.init_params(derive_seed(seed, 1));
  // Non-trivial layer-norm gains/offsets and biases so every parameter path is exercised.
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] += uniform(rng, -0.1, 0.1);
  Matrix x(spec.input_width, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1.0, 1.0);
  Matrix c(spec.output_width(), batch);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(rng, -1.0, 1.0);
  const std::uint64_t mask_seed = derive_seed(seed, 2);

  const auto loss = [&](const Vector& p) {
    rng_t mask_rng(mask_seed);
    const auto cache = layout.forward(as_span(p), x, TrainMode::Training, &mask_rng);
    return cache.output.cwiseProduct(c).sum();
  };
  rng_t mask_rng(mask_seed);
  const auto cache = layout.forward(as_span(params), x, TrainMode::Training, &mask_rng);
  Vector grad = Vector::Zero(params.size());
  layout.backward(as_span(params), cache, c, as_span(grad));
  const auto idx = sample_indices(layout.size(), samples == 0 ? layout.size() : samples, derive_seed(seed, 3));
  return finite_difference_check(loss, grad, params, idx);
}

}  // namespace dream::nn
