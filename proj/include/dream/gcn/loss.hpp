#pragma once

#include <cmath>
#include <vector>

#include "dream/alloc/assign.hpp"
#include "dream/gcn/gcn.hpp"

namespace dream::gcn {

struct LossWeights {
  double conflict = 10.0;   // lambda_c
  double stranded = 100.0;  // lambda_s
};

// required(i, j, k) flattened (R x G x H) plus batteries; what the loss needs from a scenario.
struct ScenarioCost {
  std::size_t robots = 0, goals = 0, homes = 0;
  std::vector<double> required;
  std::vector<double> battery;

  double at(std::size_t i, std::size_t j, std::size_t k) const { return required[(i * goals + j) * homes + k]; }
};

inline ScenarioCost scenario_cost(const alloc::EnergyMatrix& e, const std::vector<double>& batteries) {
  if (batteries.size() != e.robots) throw usage_error("scenario_cost: one battery per robot");
  ScenarioCost c{e.robots, e.goals, e.homes, std::vector<double>(e.robots * e.goals * e.homes), batteries};
  for (std::size_t i = 0; i < e.robots; ++i)
    for (std::size_t j = 0; j < e.goals; ++j)
      for (std::size_t k = 0; k < e.homes; ++k) c.required[(i * e.goals + j) * e.homes + k] = e.required(i, j, k);
  return c;
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LossTerms {
  double energy = 0.0;
  double conflict = 0.0;
  double stranded = 0.0;
  double total() const { return energy + conflict + stranded; }
};

// Expected energy + column-sum conflict penalty + softplus stranding penalty. When dp/dq are
// given they receive dL/dp and dL/dq.
inline LossTerms allocation_loss(const RowMat& p, const RowMat& q, const ScenarioCost& c, const LossWeights& w = {},
                                 RowMat* dp = nullptr, RowMat* dq = nullptr) {
  const auto R = static_cast<Eigen::Index>(c.robots);
  const auto G = static_cast<Eigen::Index>(c.goals);
  const auto H = static_cast<Eigen::Index>(c.homes);
  if (p.rows() != R || p.cols() != G || q.rows() != R || q.cols() != H) {
    throw usage_error("allocation_loss: distribution shapes do not match the scenario");
  }
  LossTerms t;
  if (dp) dp->setZero(R, G);
  if (dq) dq->setZero(R, H);
  for (Eigen::Index i = 0; i < R; ++i) {
    double u = 0.0;
    for (Eigen::Index j = 0; j < G; ++j)
      for (Eigen::Index k = 0; k < H; ++k)
        u += p(i, j) * q(i, k) * c.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k));
    const double slack = u - c.battery[static_cast<std::size_t>(i)];
    t.energy += u;
    t.stranded += w.stranded * softplus(slack);
    if (dp || dq) {
      const double du = 1.0 + w.stranded * sigmoid(slack);
      for (Eigen::Index j = 0; j < G; ++j)
        for (Eigen::Index k = 0; k < H; ++k) {
          const double cijk = c.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k));
          if (dp) (*dp)(i, j) += du * q(i, k) * cijk;
          if (dq) (*dq)(i, k) += du * p(i, j) * cijk;
        }
    }
  }
  const Eigen::RowVectorXd pc = p.colwise().sum().array() - 1.0;
  const Eigen::RowVectorXd qc = q.colwise().sum().array() - 1.0;
  t.conflict = w.conflict * (pc.squaredNorm() + qc.squaredNorm());
  if (dp) dp->rowwise() += 2.0 * w.conflict * pc;
  if (dq) dq->rowwise() += 2.0 * w.conflict * qc;
  return t;
}

inline LossTerms allocation_loss(const AllocationOutput& o, const alloc::EnergyMatrix& e,
                                 const std::vector<double>& batteries, const LossWeights& w = {}) {
  return allocation_loss(o.p, o.q, scenario_cost(e, batteries), w);
}

// Backprop through a row-wise softmax: dz = s * (ds - <s, ds>).
inline RowMat softmax_backward(const RowMat& s, const RowMat& ds) {
  RowMat dz = s.cwiseProduct(ds);
  const Eigen::VectorXd inner = dz.rowwise().sum();
  dz -= s.cwiseProduct(inner.replicate(1, s.cols()));
  return dz;
}

// Loss for one graph's logits (R x (G+H)) and dL/dlogits.
inline double loss_and_logit_grad(const RowMat& logits, const ScenarioCost& c, const LossWeights& w, RowMat& dlogits) {
  const auto G = static_cast<Eigen::Index>(c.goals);
  const auto out = output_from_logits(logits, static_cast<int>(G));
  RowMat dp, dq;
  const double l = allocation_loss(out.p, out.q, c, w, &dp, &dq).total();
  dlogits.resize(logits.rows(), logits.cols());
  dlogits.leftCols(G) = softmax_backward(out.p, dp);
  dlogits.rightCols(logits.cols() - G) = softmax_backward(out.q, dq);
  return l;
}

}  // namespace dream::gcn
