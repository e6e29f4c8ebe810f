#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>

#include "dream/alloc/io.hpp"
#include "dream/gcn/loss.hpp"
#include "dream/nn/adam.hpp"
#include "dream/nn/checkpoint.hpp"

namespace dream::gcn {

struct GcnTrainConfig {
  GcnShape shape;
  LossWeights weights;
  alloc::EnergyParams energy;
  double lr = 0.005;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_dir;

  void validate() const {
    shape.validate();
    std::vector<std::string> errs;
    if (!(lr > 0.0)) errs.push_back("gcn.lr must be > 0");
    if (epochs < 0) errs.push_back("gcn.epochs must be >= 0");
    if (batch_size < 1) errs.push_back("gcn.batch_size must be >= 1");
    if (weights.conflict < 0.0 || weights.stranded < 0.0) errs.push_back("gcn loss weights must be >= 0");
    if (!errs.empty()) throw config_error(errs);
  }
};

// Everything per scenario that training and evaluation reuse.
struct PreparedScenario {
  SceneGraph graph;
  alloc::EnergyMatrix energy;
  std::vector<double> batteries;
  ScenarioCost cost;
  alloc::Assignment oracle;
};

inline PreparedScenario prepare(const alloc::ScenarioState& s, const GcnShape& shape, const alloc::EnergyParams& ep) {
  PreparedScenario p;
  p.graph = build_graph(s, shape);
  p.energy = alloc::build_energy_matrices(s, ep);
  p.batteries = alloc::batteries_of(s);
  p.cost = scenario_cost(p.energy, p.batteries);
  p.oracle = alloc::oracle_assign(p.energy, p.batteries, ep);
  return p;
}

inline std::vector<PreparedScenario> prepare_all(const std::vector<alloc::ScenarioState>& data, const GcnShape& shape,
                                                 const alloc::EnergyParams& ep) {
  std::vector<PreparedScenario> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(prepare(s, shape, ep));
  return out;
}

inline alloc::Assignment gcn_assign(const GcnNet& net, const PreparedScenario& p, const alloc::EnergyParams& ep = {}) {
  const auto d = decode_assignment(net.infer(p.graph));
  return alloc::evaluate_assignment(p.energy, p.batteries, d.goal, d.home, ep);
}

// Inference over many scenarios in one stacked forward pass.
inline std::vector<alloc::Assignment> gcn_assign_all(const GcnNet& net, const std::vector<PreparedScenario>& ps,
                                                     const alloc::EnergyParams& ep = {}) {
  std::vector<alloc::Assignment> out;
  out.reserve(ps.size());
  const int r = net.shape().robots;
  constexpr std::size_t chunk = 512;
  for (std::size_t lo = 0; lo < ps.size(); lo += chunk) {
    const std::size_t hi = std::min(ps.size(), lo + chunk);
    RowMat x(static_cast<Eigen::Index>((hi - lo) * static_cast<std::size_t>(r)), net.shape().feature_width());
    for (std::size_t n = lo; n < hi; ++n) x.middleRows(static_cast<Eigen::Index>((n - lo) * static_cast<std::size_t>(r)), r) = ps[n].graph.features;
    const auto c = net.forward(x, nn::TrainMode::Inference, nullptr);
    for (std::size_t n = lo; n < hi; ++n) {
      const auto o = output_from_logits(c.logits.middleRows(static_cast<Eigen::Index>((n - lo) * static_cast<std::size_t>(r)), r),
                                        net.shape().goals);
      const auto d = decode_assignment(o);
      out.push_back(alloc::evaluate_assignment(ps[n].energy, ps[n].batteries, d.goal, d.home, ep));
    }
  }
  return out;
}

struct GcnEpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;            // training-mode loss averaged over the epoch's minibatches
  double mean_decoded_energy = 0.0;  // inference-mode decoded assignment, total energy
  double mean_oracle_energy = 0.0;
  double oracle_match = 0.0;         // fraction decoding exactly to the oracle's (goal, home)
};

inline void write_gcn_metrics_header(std::ostream& os) {
  os << "epoch,mean_loss,mean_decoded_energy,mean_oracle_energy,oracle_match\n";
}

inline void write_gcn_metrics_row(std::ostream& os, const GcnEpochMetrics& m) {
  os << m.epoch << ',' << m.mean_loss << ',' << m.mean_decoded_energy << ',' << m.mean_oracle_energy << ','
     << m.oracle_match << '\n';
}

inline GcnEpochMetrics evaluate_epoch(const GcnNet& net, const std::vector<PreparedScenario>& ps,
                                      const alloc::EnergyParams& ep) {
  GcnEpochMetrics m;
  if (ps.empty()) return m;
  const auto as = gcn_assign_all(net, ps, ep);
  std::size_t match = 0;
  for (std::size_t n = 0; n < ps.size(); ++n) {
    m.mean_decoded_energy += as[n].total_energy;
    m.mean_oracle_energy += ps[n].oracle.total_energy;
    if (as[n].goal == ps[n].oracle.goal && as[n].home == ps[n].oracle.home) ++match;
  }
  const auto n = static_cast<double>(ps.size());
  m.mean_decoded_energy /= n;
  m.mean_oracle_energy /= n;
  m.oracle_match = static_cast<double>(match) / n;
  return m;
}

// Mean loss over a minibatch of scenarios (given by index) and its parameter gradient.
inline double batch_loss_and_grad(const GcnNet& net, std::span<const double> params,
                                  const std::vector<PreparedScenario>& ps, std::span<const std::size_t> idx,
                                  const LossWeights& w, nn::TrainMode mode, rng_t* rng, std::span<double> grad) {
  const int r = net.shape().robots;
  RowMat x(static_cast<Eigen::Index>(idx.size()) * r, net.shape().feature_width());
  for (std::size_t b = 0; b < idx.size(); ++b) x.middleRows(static_cast<Eigen::Index>(b) * r, r) = ps[idx[b]].graph.features;
  const auto cache = net.forward(params, x, mode, rng);
  RowMat dlogits(cache.logits.rows(), cache.logits.cols());
  const double inv = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  RowMat d;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto rows = static_cast<Eigen::Index>(b) * r;
    loss += loss_and_logit_grad(cache.logits.middleRows(rows, r), ps[idx[b]].cost, w, d);
    dlogits.middleRows(rows, r) = d * inv;
  }
  if (!grad.empty()) net.backward(params, cache, dlogits, grad);
  return loss * inv;
}

inline nlohmann::json gcn_manifest(const GcnShape& shape, const alloc::EnergyParams& ep) {
  return {{"model", "gcn_allocator"},
          {"shape", to_json(shape)},
          {"energy", {{"battery_straight", ep.battery_straight}, {"turn_multiplier", ep.turn_multiplier},
                      {"stranded_penalty", ep.stranded_penalty}}}};
}

inline void save_gcn(const GcnNet& net, const alloc::EnergyParams& ep, const std::filesystem::path& stem, long step) {
  nn::save_checkpoint(stem, {gcn_manifest(net.shape(), ep), step, net.params()});
}

inline GcnNet load_gcn(const std::filesystem::path& stem) {
  const auto ck = nn::load_checkpoint(stem);
  if (ck.manifest.value("model", "") != "gcn_allocator") throw config_error(stem.string() + " is not a gcn checkpoint");
  GcnShape shape;
  try {
    shape = shape_from_json(ck.manifest.at("shape"));
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("gcn checkpoint manifest: ") + e.what());
  }
  GcnNet net(shape);
  if (ck.params.size() != net.params().size()) throw config_error("gcn checkpoint: parameter count mismatch");
  net.params() = ck.params;
  return net;
}

struct GcnTrainResult {
  GcnNet net;
  std::vector<GcnEpochMetrics> metrics;
};

inline GcnTrainResult train_gcn(const std::vector<alloc::ScenarioState>& dataset, const GcnTrainConfig& cfg,
                                const std::function<void(const GcnEpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  if (dataset.empty()) throw usage_error("train_gcn: empty dataset");
  const auto ps = prepare_all(dataset, cfg.shape, cfg.energy);
  GcnTrainResult res{GcnNet(cfg.shape, derive_seed(cfg.seed, 201)), {}};
  auto& net = res.net;
  nn::Adam adam(net.params().size(), {cfg.lr});
  rng_t shuffle_rng(derive_seed(cfg.seed, 202));
  rng_t dropout_rng(derive_seed(cfg.seed, 203));

  std::optional<std::ofstream> csv;
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    csv.emplace(*cfg.out_dir / "gcn_metrics.csv");
    write_gcn_metrics_header(*csv);
  }
  const auto stem = cfg.out_dir ? std::optional(*cfg.out_dir / "gcn") : std::nullopt;

  std::vector<std::size_t> order(ps.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(net.params().size());
  long steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      grad.setZero();
      const double loss = batch_loss_and_grad(net, net.param_span(), ps, {order.data() + lo, hi - lo}, cfg.weights,
                                              nn::TrainMode::Training, &dropout_rng, {grad.data(), static_cast<std::size_t>(grad.size())});
      try {
        if (!std::isfinite(loss)) throw numeric_error("train_gcn: non-finite loss");
        adam.step(net.params(), grad);
      } catch (const numeric_error&) {
        if (stem) save_gcn(net, cfg.energy, *stem, steps);  // last good parameters
        throw;
      }
      ++steps;
      loss_sum += loss;
      ++batches;
    }
    auto m = evaluate_epoch(net, ps, cfg.energy);
    m.epoch = epoch;
    m.mean_loss = loss_sum / static_cast<double>(batches);
    res.metrics.push_back(m);
    if (csv) write_gcn_metrics_row(*csv, m);
    if (on_epoch) on_epoch(m);
  }
  if (stem) save_gcn(net, cfg.energy, *stem, steps);
  return res;
}

}  // namespace dream::gcn
