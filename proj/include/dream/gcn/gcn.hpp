#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dream/alloc/assign.hpp"
#include "dream/core/error.hpp"
#include "dream/core/random.hpp"
#include "dream/nn/dense.hpp"

namespace dream::gcn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using nlohmann::json;

struct GcnShape {
  int robots = 3;
  int goals = 3;
  int homes = 3;
  int hidden1 = 128;
  int hidden2 = 64;
  double dropout = 0.5;
  // Weight of the self-loop added to the complete robot graph. With weight 1 every row of the
  // normalised adjacency is identical for a complete graph and all robots collapse to one embedding.
  double self_loop = 2.0;
  double battery_scale = 100.0;  // battery feature = units / battery_scale

  int feature_width() const { return 4 + 2 * goals + 2 * homes; }
  int output_width() const { return goals + homes; }

  std::size_t parameter_count() const {
    const auto f = static_cast<std::size_t>(feature_width());
    const auto h1 = static_cast<std::size_t>(hidden1), h2 = static_cast<std::size_t>(hidden2);
    const auto o = static_cast<std::size_t>(output_width());
    return f * h1 + h1 + h1 * h2 + h2 + h2 * o + o;
  }

  void validate() const {
    if (robots < 1 || goals < 1 || homes < 1) throw config_error("gcn: robots/goals/homes must be >= 1");
    if (robots != goals || robots != homes) throw config_error("gcn: requires R = G = H");
    if (hidden1 < 1 || hidden2 < 1) throw config_error("gcn: hidden widths must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("gcn: dropout must be in [0, 1)");
    if (!(self_loop > 0.0)) throw config_error("gcn: self_loop must be > 0");
    if (!(battery_scale > 0.0)) throw config_error("gcn: battery_scale must be > 0");
  }

  friend bool operator==(const GcnShape&, const GcnShape&) = default;
};

inline json to_json(const GcnShape& s) {
  return {{"robots", s.robots},   {"goals", s.goals},     {"homes", s.homes},
          {"hidden1", s.hidden1}, {"hidden2", s.hidden2}, {"dropout", s.dropout},
          {"self_loop", s.self_loop}, {"battery_scale", s.battery_scale}};
}

inline GcnShape shape_from_json(const json& j) {
  GcnShape s;
  s.robots = j.at("robots").get<int>();
  s.goals = j.at("goals").get<int>();
  s.homes = j.at("homes").get<int>();
  s.hidden1 = j.at("hidden1").get<int>();
  s.hidden2 = j.at("hidden2").get<int>();
  s.dropout = j.at("dropout").get<double>();
  s.self_loop = j.at("self_loop").get<double>();
  s.battery_scale = j.at("battery_scale").get<double>();
  s.validate();
  return s;
}

struct SceneGraph {
  RowMat features;   // R x (4 + 2G + 2H)
  RowMat adjacency;  // R x R, D^-1/2 (A + wI) D^-1/2
};

inline RowMat normalized_adjacency(int robots, double self_loop) {
  RowMat a = RowMat::Ones(robots, robots);
  a.diagonal().setConstant(self_loop);
  const Eigen::VectorXd d = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * a * d.asDiagonal();
}

inline SceneGraph build_graph(const alloc::ScenarioState& s, const GcnShape& shape) {
  s.validate();
  if (static_cast<int>(s.robots.size()) != shape.robots || static_cast<int>(s.goals.size()) != shape.goals ||
      static_cast<int>(s.homes.size()) != shape.homes) {
    throw usage_error("build_graph: scenario size does not match the model shape");
  }
  SceneGraph g;
  g.features.resize(shape.robots, shape.feature_width());
  for (int i = 0; i < shape.robots; ++i) {
    const auto& r = s.robots[static_cast<std::size_t>(i)];
    auto row = g.features.row(i);
    row(0) = r.pose.x / s.width;
    row(1) = r.pose.y / s.height;
    row(2) = r.pose.theta / sim::kPi;
    row(3) = r.battery / shape.battery_scale;
    int c = 4;
    for (const auto& p : s.goals) row(c++) = p.x / s.width, row(c++) = p.y / s.height;
    for (const auto& p : s.homes) row(c++) = p.x / s.width, row(c++) = p.y / s.height;
  }
  g.adjacency = normalized_adjacency(shape.robots, shape.self_loop);
  return g;
}

struct AllocationOutput {
  RowMat logits;  // R x (G + H)
  RowMat p;       // R x G goal distribution
  RowMat q;       // R x H home distribution
};

// Row-wise softmax over a block.
inline RowMat softmax_rows(const RowMat& z) {
  RowMat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline AllocationOutput output_from_logits(const RowMat& logits, int goals) {
  AllocationOutput o;
  o.logits = logits;
  o.p = softmax_rows(logits.leftCols(goals));
  o.q = softmax_rows(logits.rightCols(logits.cols() - goals));
  return o;
}

// Greedy repair: commit the globally most probable (robot, column) pair among the unassigned
// ones until every robot has a column. Scanning robot-major with strict > breaks ties towards
// the lexicographically smallest pair.
inline std::vector<int> greedy_decode(const RowMat& prob) {
  const auto n = prob.rows();
  const auto m = prob.cols();
  if (m < n) throw usage_error("greedy_decode: fewer columns than robots");
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  std::vector<bool> taken(static_cast<std::size_t>(m), false);
  for (Eigen::Index step = 0; step < n; ++step) {
    Eigen::Index bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out[static_cast<std::size_t>(i)] >= 0) continue;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (taken[static_cast<std::size_t>(j)]) continue;
        // NaN never wins; the first free pair is still committed so the result is a permutation
        if (bi < 0 || prob(i, j) > best) {
          best = prob(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    out[static_cast<std::size_t>(bi)] = static_cast<int>(bj);
    taken[static_cast<std::size_t>(bj)] = true;
  }
  return out;
}

struct DecodedAssignment {
  std::vector<int> goal;
  std::vector<int> home;
};

inline DecodedAssignment decode_assignment(const AllocationOutput& o) {
  return {greedy_decode(o.p), greedy_decode(o.q)};
}

// Forward intermediates for a batch of graphs stacked node-wise (B*R rows).
struct GcnCache {
  int graphs = 0;
  RowMat ax;      // A X
  RowMat z1, h1;  // pre / post ReLU
  RowMat ah1;     // A H1
  RowMat z2, h2;
  RowMat mask;    // dropout mask scaled by 1/(1-p); empty in inference
  RowMat h2d;     // after dropout
  RowMat logits;
};

class GcnNet {
 public:
  GcnNet() = default;
  explicit GcnNet(GcnShape shape) : shape_(shape), params_(Eigen::VectorXd::Zero(
                                                                static_cast<Eigen::Index>(shape.parameter_count()))) {
    shape_.validate();
    adjacency_ = normalized_adjacency(shape_.robots, shape_.self_loop);
  }
  GcnNet(GcnShape shape, std::uint64_t seed) : GcnNet(shape) { init(seed); }

  const GcnShape& shape() const { return shape_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  const RowMat& adjacency() const { return adjacency_; }

  // Xavier-uniform weights, zero biases.
  void init(std::uint64_t seed) {
    rng_t rng(seed);
    params_.setZero();
    for (const auto& b : blocks()) {
      const double bound = std::sqrt(6.0 / static_cast<double>(b.in + b.out));
      for (std::size_t n = 0; n < b.in * b.out; ++n) params_[static_cast<Eigen::Index>(b.w + n)] = uniform(rng, -bound, bound);
    }
  }

  struct Block {
    std::size_t in, out, w, b;  // widths, offsets of W (in x out, row-major) and bias
  };

  std::vector<Block> blocks() const {
    const auto f = static_cast<std::size_t>(shape_.feature_width());
    const auto h1 = static_cast<std::size_t>(shape_.hidden1), h2 = static_cast<std::size_t>(shape_.hidden2);
    const auto o = static_cast<std::size_t>(shape_.output_width());
    std::vector<Block> out;
    std::size_t off = 0;
    for (auto [in, w] : {std::pair{f, h1}, std::pair{h1, h2}, std::pair{h2, o}}) {
      out.push_back({in, w, off, off + in * w});
      off += in * w + w;
    }
    return out;
  }

  using MapW = Eigen::Map<const RowMat>;
  using MapB = Eigen::Map<const Eigen::RowVectorXd>;
  static MapW weight(std::span<const double> p, const Block& b) {
    return MapW(p.data() + b.w, static_cast<Eigen::Index>(b.in), static_cast<Eigen::Index>(b.out));
  }
  static MapB bias(std::span<const double> p, const Block& b) {
    return MapB(p.data() + b.b, static_cast<Eigen::Index>(b.out));
  }

  std::span<const double> param_span() const { return {params_.data(), static_cast<std::size_t>(params_.size())}; }

  // x: graphs stacked node-wise. Dropout only in Train mode, drawing from `rng`.
  GcnCache forward(std::span<const double> p, const RowMat& x, nn::TrainMode mode, rng_t* rng) const {
    const int r = shape_.robots;
    if (x.cols() != shape_.feature_width() || x.rows() % r != 0 || x.rows() == 0) {
      throw usage_error("gcn forward: feature matrix shape mismatch");
    }
    if (!x.allFinite()) throw numeric_error("gcn forward: non-finite features");
    if (p.size() != shape_.parameter_count()) throw usage_error("gcn forward: parameter count mismatch");
    const auto bl = blocks();
    GcnCache c;
    c.graphs = static_cast<int>(x.rows() / r);
    c.ax = propagate(x);
    c.z1 = (c.ax * weight(p, bl[0])).rowwise() + bias(p, bl[0]);
    c.h1 = c.z1.cwiseMax(0.0);
    c.ah1 = propagate(c.h1);
    c.z2 = (c.ah1 * weight(p, bl[1])).rowwise() + bias(p, bl[1]);
    c.h2 = c.z2.cwiseMax(0.0);
    if (mode == nn::TrainMode::Training && shape_.dropout > 0.0) {
      if (rng == nullptr) throw usage_error("gcn forward: training mode needs an rng");
      const double keep = 1.0 - shape_.dropout;
      std::bernoulli_distribution bern(keep);
      c.mask.resize(c.h2.rows(), c.h2.cols());
      for (Eigen::Index n = 0; n < c.mask.size(); ++n) c.mask.data()[n] = bern(*rng) ? 1.0 / keep : 0.0;
      c.h2d = c.h2.cwiseProduct(c.mask);
    } else {
      c.h2d = c.h2;
    }
    c.logits = (c.h2d * weight(p, bl[2])).rowwise() + bias(p, bl[2]);
    if (!c.logits.allFinite()) throw numeric_error("gcn forward: non-finite logits");
    return c;
  }

  GcnCache forward(const RowMat& x, nn::TrainMode mode, rng_t* rng) const { return forward(param_span(), x, mode, rng); }

  // Accumulates parameter gradients for dL/dlogits into `grad`.
  void backward(std::span<const double> p, const GcnCache& c, const RowMat& dlogits, std::span<double> grad) const {
    if (dlogits.rows() != c.logits.rows() || dlogits.cols() != c.logits.cols()) {
      throw usage_error("gcn backward: upstream shape mismatch");
    }
    if (grad.size() != shape_.parameter_count()) throw usage_error("gcn backward: gradient size mismatch");
    const auto bl = blocks();
    auto gw = [&](const Block& b) {
      return Eigen::Map<RowMat>(grad.data() + b.w, static_cast<Eigen::Index>(b.in), static_cast<Eigen::Index>(b.out));
    };
    auto gb = [&](const Block& b) { return Eigen::Map<Eigen::RowVectorXd>(grad.data() + b.b, static_cast<Eigen::Index>(b.out)); };

    gw(bl[2]).noalias() += c.h2d.transpose() * dlogits;
    gb(bl[2]) += dlogits.colwise().sum();
    RowMat d = dlogits * weight(p, bl[2]).transpose();
    if (c.mask.size() > 0) d = d.cwiseProduct(c.mask);
    d = d.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
    gw(bl[1]).noalias() += c.ah1.transpose() * d;
    gb(bl[1]) += d.colwise().sum();
    RowMat dh1 = propagate_transpose(d * weight(p, bl[1]).transpose());
    dh1 = dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    gw(bl[0]).noalias() += c.ax.transpose() * dh1;
    gb(bl[0]) += dh1.colwise().sum();
  }

  AllocationOutput infer(const SceneGraph& g) const {
    const auto c = forward(g.features, nn::TrainMode::Inference, nullptr);
    return output_from_logits(c.logits, shape_.goals);
  }

  AllocationOutput infer(const alloc::ScenarioState& s) const { return infer(build_graph(s, shape_)); }

 private:
  RowMat propagate(const RowMat& x) const {
    const int r = shape_.robots;
    RowMat out(x.rows(), x.cols());
    for (Eigen::Index g = 0; g < x.rows() / r; ++g) out.middleRows(g * r, r).noalias() = adjacency_ * x.middleRows(g * r, r);
    return out;
  }
  RowMat propagate_transpose(const RowMat& x) const {
    const int r = shape_.robots;
    RowMat out(x.rows(), x.cols());
    for (Eigen::Index g = 0; g < x.rows() / r; ++g) {
      out.middleRows(g * r, r).noalias() = adjacency_.transpose() * x.middleRows(g * r, r);
    }
    return out;
  }

  GcnShape shape_;
  Eigen::VectorXd params_;
  RowMat adjacency_;
};

inline RowMat stack_features(const std::vector<SceneGraph>& graphs) {
  if (graphs.empty()) throw usage_error("stack_features: no graphs");
  const auto r = graphs[0].features.rows();
  RowMat x(r * static_cast<Eigen::Index>(graphs.size()), graphs[0].features.cols());
  for (std::size_t g = 0; g < graphs.size(); ++g) x.middleRows(static_cast<Eigen::Index>(g) * r, r) = graphs[g].features;
  return x;
}

}  // namespace dream::gcn
