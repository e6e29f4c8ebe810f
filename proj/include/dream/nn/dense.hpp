#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dream/core/error.hpp"
#include "dream/core/random.hpp"

namespace dream::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { None, Relu, Tanh };
enum class TrainMode { Training, Inference };

inline constexpr double kLayerNormEps = 1e-10;

struct LayerSpec {
  int width = 1;
  bool layer_norm = false;
  Activation activation = Activation::None;
  double dropout = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DenseNetSpec {
  int input_width = 1;
  std::vector<LayerSpec> layers;

  void validate() const {
    if (input_width < 1) throw usage_error("DenseNetSpec: input width must be >= 1");
    if (layers.empty()) throw usage_error("DenseNetSpec: at least one layer required");
    for (const auto& l : layers) {
      if (l.width < 1) throw usage_error("DenseNetSpec: layer width must be >= 1");
      if (!(l.dropout >= 0.0 && l.dropout < 1.0)) throw usage_error("DenseNetSpec: dropout must be in [0, 1)");
    }
  }

  int output_width() const { return layers.back().width; }

  // Weights + biases, plus gain and offset for every layer-normalised layer.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    int in = input_width;
    for (const auto& l : layers) {
      n += static_cast<std::size_t>(in) * l.width + l.width;
      if (l.layer_norm) n += 2 * static_cast<std::size_t>(l.width);
      in = l.width;
    }
    return n;
  }

  friend bool operator==(const DenseNetSpec&, const DenseNetSpec&) = default;
};

// Hidden layers share one recipe; the output layer is plain affine + output activation.
inline DenseNetSpec make_mlp(int input, const std::vector<int>& hidden, int output, bool layer_norm,
                             double dropout, Activation hidden_act, Activation output_act) {
  DenseNetSpec spec;
  spec.input_width = input;
  for (int w : hidden) spec.layers.push_back({w, layer_norm, hidden_act, dropout});
  spec.layers.push_back({output, false, output_act, 0.0});
  return spec;
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "none";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::None;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw config_error("unknown activation '" + s + "'");
}

inline nlohmann::json to_json(const DenseNetSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"width", l.width}, {"layer_norm", l.layer_norm},
                      {"activation", to_string(l.activation)}, {"dropout", l.dropout}});
  }
  return {{"input_width", spec.input_width}, {"layers", layers}};
}

inline DenseNetSpec spec_from_json(const nlohmann::json& j) {
  DenseNetSpec spec;
  spec.input_width = j.at("input_width").get<int>();
  for (const auto& l : j.at("layers")) {
    spec.layers.push_back({l.at("width").get<int>(), l.at("layer_norm").get<bool>(),
                           activation_from_string(l.at("activation").get<std::string>()),
                           l.at("dropout").get<double>()});
  }
  spec.validate();
  return spec;
}

struct LayerCache {
  Matrix input;          // in x batch
  Matrix z;              // affine output
  Matrix xhat;           // layer-normalised z (empty without layer norm)
  Eigen::RowVectorXd inv_std;
  Matrix pre_activation; // after optional layer norm
  Matrix activated;      // after activation, before dropout
  Matrix mask;           // inverted-dropout scale per unit (empty when inactive)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix output;  // out x batch
};

// Parameter layout and the forward/backward maths of a dense network. Parameters live in an
// external flat array so optimisers, soft updates and checkpoints work on plain vectors.
// Per layer: W (out x in, row-major), b (out), then gain (out) and offset (out) if layer-normed.
class DenseLayout {
 public:
  struct Block {
    int in = 0;
    int out = 0;
    std::size_t w = 0;
    std::size_t b = 0;
    std::size_t gain = 0;
    std::size_t offset = 0;
  };

  DenseLayout() = default;

  explicit DenseLayout(DenseNetSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t at = 0;
    int in = spec_.input_width;
    for (const auto& l : spec_.layers) {
      Block blk;
      blk.in = in;
      blk.out = l.width;
      blk.w = at;
      at += static_cast<std::size_t>(in) * l.width;
      blk.b = at;
      at += l.width;
      if (l.layer_norm) {
        blk.gain = at;
        at += l.width;
        blk.offset = at;
        at += l.width;
      }
      blocks_.push_back(blk);
      in = l.width;
    }
    size_ = at;
  }

  const DenseNetSpec& spec() const { return spec_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return size_; }
  int input_width() const { return spec_.input_width; }
  int output_width() const { return spec_.output_width(); }

  // Xavier-uniform weights, zero biases, unit gain, zero offset.
  void init_params(std::span<double> params, rng_t& rng) const {
    check_size(params.size());
    std::fill(params.begin(), params.end(), 0.0);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& blk = blocks_[i];
      const double bound = std::sqrt(6.0 / static_cast<double>(blk.in + blk.out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t k = 0; k < static_cast<std::size_t>(blk.in) * blk.out; ++k) params[blk.w + k] = dist(rng);
      if (spec_.layers[i].layer_norm) {
        for (int k = 0; k < blk.out; ++k) params[blk.gain + k] = 1.0;
      }
    }
  }

  Vector init_params(std::uint64_t seed) const {
    Vector p = Vector::Zero(static_cast<Eigen::Index>(size_));
    rng_t rng(seed);
    init_params(std::span<double>(p.data(), size_), rng);
    return p;
  }

  // rng is only consulted for dropout in training mode.
  ForwardCache forward(std::span<const double> params, const Matrix& x, TrainMode mode, rng_t* rng) const {
    check_size(params.size());
    if (x.rows() != spec_.input_width) {
      throw usage_error("DenseLayout::forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                        std::to_string(spec_.input_width));
    }
    if (!x.allFinite()) throw numeric_error("DenseLayout::forward: non-finite input");
    ForwardCache cache;
    cache.layers.resize(blocks_.size());
    Matrix h = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& blk = blocks_[i];
      const auto& ls = spec_.layers[i];
      auto& lc = cache.layers[i];
      lc.input = std::move(h);
      lc.z = weight(params, blk) * lc.input;
      lc.z.colwise() += bias(params, blk);
      if (ls.layer_norm) {
        const double n = static_cast<double>(blk.out);
        const Eigen::RowVectorXd mean = lc.z.colwise().sum() / n;
        Matrix centered = lc.z.rowwise() - mean;
        const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
        lc.inv_std = (var.array() + kLayerNormEps).rsqrt();
        lc.xhat = centered.array().rowwise() * lc.inv_std.array();
        lc.pre_activation = (lc.xhat.array().colwise() * gain(params, blk).array()).colwise() +
                            offset(params, blk).array();
      } else {
        lc.pre_activation = lc.z;
      }
      switch (ls.activation) {
        case Activation::None: lc.activated = lc.pre_activation; break;
        case Activation::Relu: lc.activated = lc.pre_activation.cwiseMax(0.0); break;
        case Activation::Tanh: lc.activated = lc.pre_activation.array().tanh(); break;
      }
      if (mode == TrainMode::Training && ls.dropout > 0.0) {
        if (rng == nullptr) throw usage_error("DenseLayout::forward: training-mode dropout needs an rng");
        const double keep = 1.0 - ls.dropout;
        lc.mask.resize(lc.activated.rows(), lc.activated.cols());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (Eigen::Index c = 0; c < lc.mask.cols(); ++c) {
          for (Eigen::Index r = 0; r < lc.mask.rows(); ++r) lc.mask(r, c) = u(*rng) < keep ? 1.0 / keep : 0.0;
        }
        h = lc.activated.cwiseProduct(lc.mask);
      } else {
        h = lc.activated;
      }
    }
    cache.output = std::move(h);
    return cache;
  }

  Matrix predict(std::span<const double> params, const Matrix& x) const {
    return forward(params, x, TrainMode::Inference, nullptr).output;
  }

  // Accumulates dLoss/dParams into grad and returns dLoss/dInput.
  Matrix backward(std::span<const double> params, const ForwardCache& cache, const Matrix& upstream,
                  std::span<double> grad) const {
    check_size(params.size());
    check_size(grad.size());
    if (cache.layers.size() != blocks_.size() || upstream.rows() != cache.output.rows() ||
        upstream.cols() != cache.output.cols()) {
      throw usage_error("DenseLayout::backward: cache/upstream shape mismatch");
    }
    Matrix d = upstream;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const auto& blk = blocks_[i];
      const auto& ls = spec_.layers[i];
      const auto& lc = cache.layers[i];
      if (lc.mask.size() > 0) d = d.cwiseProduct(lc.mask);
      switch (ls.activation) {
        case Activation::None: break;
        case Activation::Relu: d = d.cwiseProduct((lc.pre_activation.array() > 0.0).cast<double>().matrix()); break;
        case Activation::Tanh: d = d.array() * (1.0 - lc.activated.array().square()); break;
      }
      if (ls.layer_norm) {
        Eigen::Map<Vector> dgain(grad.data() + blk.gain, blk.out);
        Eigen::Map<Vector> doffset(grad.data() + blk.offset, blk.out);
        dgain += (d.cwiseProduct(lc.xhat)).rowwise().sum();
        doffset += d.rowwise().sum();
        const Matrix dxhat = d.array().colwise() * gain(params, blk).array();
        const double n = static_cast<double>(blk.out);
        const Eigen::RowVectorXd mean_d = dxhat.colwise().sum() / n;
        const Eigen::RowVectorXd mean_dx = dxhat.cwiseProduct(lc.xhat).colwise().sum() / n;
        Matrix dz = dxhat.rowwise() - mean_d;
        dz.array() -= lc.xhat.array().rowwise() * mean_dx.array();
        d = dz.array().rowwise() * lc.inv_std.array();
      }
      Eigen::Map<RowMatrix> dw(grad.data() + blk.w, blk.out, blk.in);
      Eigen::Map<Vector> db(grad.data() + blk.b, blk.out);
      dw.noalias() += d * lc.input.transpose();
      db += d.rowwise().sum();
      d = weight(params, blk).transpose() * d;
    }
    return d;
  }

  static Eigen::Map<const RowMatrix> weight(std::span<const double> p, const Block& blk) {
    return {p.data() + blk.w, blk.out, blk.in};
  }
  static Eigen::Map<const Vector> bias(std::span<const double> p, const Block& blk) {
    return {p.data() + blk.b, blk.out};
  }
  static Eigen::Map<const Vector> gain(std::span<const double> p, const Block& blk) {
    return {p.data() + blk.gain, blk.out};
  }
  static Eigen::Map<const Vector> offset(std::span<const double> p, const Block& blk) {
    return {p.data() + blk.offset, blk.out};
  }

 private:
  void check_size(std::size_t n) const {
    if (n != size_) {
      throw usage_error("DenseLayout: parameter array has " + std::to_string(n) + " entries, expected " +
                        std::to_string(size_));
    }
  }

  DenseNetSpec spec_;
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// A layout together with the parameters it owns.
struct DenseNet {
  DenseLayout layout;
  Vector params;

  DenseNet() = default;
  DenseNet(const DenseNetSpec& spec, std::uint64_t seed) : layout(spec), params(layout.init_params(seed)) {}

  ForwardCache forward(const Matrix& x, TrainMode mode, rng_t* rng) const {
    return layout.forward(as_span(params), x, mode, rng);
  }
  Matrix predict(const Matrix& x) const { return layout.predict(as_span(params), x); }
  Vector zero_grad() const { return Vector::Zero(params.size()); }
  Matrix backward(const ForwardCache& cache, const Matrix& upstream, Vector& grad) const {
    return layout.backward(as_span(params), cache, upstream, as_span(grad));
  }
};

}  // namespace dream::nn
