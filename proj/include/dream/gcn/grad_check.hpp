#pragma once

#include <numeric>

#include "dream/gcn/train.hpp"
#include "dream/nn/grad_check.hpp"

namespace dream::gcn {

// Parameter gradient of the minibatch allocation loss (dropout mask fixed, one battery pushed
// into the stranding region) against central differences. samples = 0 checks every parameter.
inline nn::GradCheckReport gcn_grad_check(const GcnShape& shape, std::uint64_t seed, std::size_t samples = 0,
                                          std::size_t scenarios = 3) {
  GcnNet net(shape, derive_seed(seed, 1));
  rng_t jitter(derive_seed(seed, 2));
  for (Eigen::Index n = 0; n < net.params().size(); ++n) net.params()[n] += uniform(jitter, -0.05, 0.05);
  alloc::ScenarioSampler sampler;
  sampler.robots = shape.robots;
  auto data = alloc::generate_dataset(derive_seed(seed, 3), scenarios, sampler);
  data[0].robots[0].battery = 5.0;
  const auto ps = prepare_all(data, shape, {});
  std::vector<std::size_t> idx(ps.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::uint64_t mask_seed = derive_seed(seed, 4);

  const Eigen::VectorXd base = net.params();
  const auto n = static_cast<std::size_t>(base.size());
  auto loss_at = [&](const Eigen::VectorXd& p) {
    rng_t mask(mask_seed);
    return batch_loss_and_grad(net, {p.data(), n}, ps, idx, {}, nn::TrainMode::Training, &mask, {});
  };
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(base.size());
  rng_t mask(mask_seed);
  const double l0 =
      batch_loss_and_grad(net, {base.data(), n}, ps, idx, {}, nn::TrainMode::Training, &mask, {analytic.data(), n});
  std::vector<std::size_t> which;
  if (samples == 0) {
    which.resize(n);
    std::iota(which.begin(), which.end(), 0);
  } else {
    which = nn::sample_indices(n, samples, derive_seed(seed, 5));
  }
  return nn::finite_difference_check(loss_at, analytic, base, which, 1e-5, nn::loss_floor(l0));
}

}  // namespace dream::gcn
