#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "studperf/dataset.hpp"
#include "studperf/error.hpp"
#include "studperf/matrix.hpp"
#include "studperf/rng.hpp"

namespace studperf::nn {

enum class Activation { Relu, Linear };

constexpr std::string_view to_string(Activation a) noexcept { return a == Activation::Relu ? "relu" : "linear"; }

struct DenseSpec {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  Activation activation = Activation::Relu;
  bool operator==(const DenseSpec&) const = default;
};

struct DropoutSpec {
  double rate = 0.2;
  bool operator==(const DropoutSpec&) const = default;
};

using LayerSpec = std::variant<DenseSpec, DropoutSpec>;

/// (in + 1) * out for dense layers, 0 for dropout.
constexpr std::size_t param_count(const LayerSpec& spec) noexcept {
  if (const auto* d = std::get_if<DenseSpec>(&spec)) return (d->in_width + 1) * d->out_width;
  return 0;
}

/// Dense weights are out x in so that row o holds the fan-in of unit o.
struct DenseParams {
  Matrix weights;
  std::vector<double> bias;
  bool operator==(const DenseParams&) const = default;
};

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<DenseParams> params;  // aligned with layers; empty for dropout
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t input_width() const { return std::get<DenseSpec>(layers.front()).in_width; }

  [[nodiscard]] std::size_t output_width() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
      if (const auto* d = std::get_if<DenseSpec>(&*it)) return d->out_width;
    }
    return 0;
  }

  [[nodiscard]] std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += nn::param_count(l);
    return total;
  }

  bool operator==(const Network&) const = default;
};

/// Checks that dense widths chain and dropout rates are in [0, 1).
inline void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) fail(ErrorKind::EmptySpec, "network needs at least one layer");
  if (!std::holds_alternative<DenseSpec>(specs.front())) {
    fail(ErrorKind::IncompatibleWidths, "first layer must be dense");
  }
  std::size_t width = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (const auto* d = std::get_if<DenseSpec>(&specs[i])) {
      if (d->in_width == 0 || d->out_width == 0) {
        fail(ErrorKind::IncompatibleWidths, "layer " + std::to_string(i) + ": dense widths must be >= 1");
      }
      if (i > 0 && d->in_width != width) {
        fail(ErrorKind::IncompatibleWidths, "layer " + std::to_string(i) + ": expects width " +
                                                std::to_string(d->in_width) + ", previous layer emits " +
                                                std::to_string(width));
      }
      width = d->out_width;
    } else {
      const double rate = std::get<DropoutSpec>(specs[i]).rate;
      if (!(rate >= 0.0 && rate < 1.0)) {
        fail(ErrorKind::InvalidConfig, "layer " + std::to_string(i) + ": dropout rate must lie in [0, 1)");
      }
    }
  }
}

/// Glorot-uniform weights U(-sqrt(6/(in+out)), +sqrt(6/(in+out))) in row-major order, zero biases.
inline Network init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  validate_specs(specs);
  Rng rng(seed, rng_stream::kInit);
  Network net;
  net.layers.assign(specs.begin(), specs.end());
  net.seed = seed;
  for (const auto& spec : specs) {
    DenseParams p;
    if (const auto* d = std::get_if<DenseSpec>(&spec)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(d->in_width + d->out_width));
      p.weights = Matrix(d->out_width, d->in_width);
      for (double& w : p.weights.values()) w = rng.uniform(-limit, limit);
      p.bias.assign(d->out_width, 0.0);
    }
    net.params.push_back(std::move(p));
  }
  return net;
}

/// Five dense layers 80-120-20-10-3 with a dropout after each hidden layer; relu hidden,
/// linear output.
inline std::vector<LayerSpec> student_mlp_specs(std::size_t input_width = kAttributeColumns,
                                                std::span<const double> dropout_rates = {}) {
  static constexpr double kDefaultRates[4] = {0.2, 0.2, 0.2, 0.2};
  if (dropout_rates.empty()) dropout_rates = kDefaultRates;
  if (dropout_rates.size() != 4) fail(ErrorKind::InvalidConfig, "expected 4 dropout rates");
  const std::size_t widths[] = {input_width, 80, 120, 20, 10, 3};
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto act = i == 4 ? Activation::Linear : Activation::Relu;
    specs.emplace_back(DenseSpec{widths[i], widths[i + 1], act});
    if (i < 4) specs.emplace_back(DropoutSpec{dropout_rates[i]});
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

enum class Mode { Train, Infer };

struct ForwardCache {
  Mode mode = Mode::Infer;
  std::vector<Matrix> inputs;           // input of every layer
  std::vector<Matrix> pre_activations;  // dense layers only
  std::vector<Matrix> masks;            // train-mode dropout only; entries are 0 or 1/(1-rate)
  Matrix output;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

namespace detail {

/// out = in * W^T + b
inline Matrix affine(const Matrix& in, const DenseParams& p) {
  const std::size_t out_w = p.weights.rows();
  const std::size_t in_w = p.weights.cols();
  Matrix out(in.rows(), out_w);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t o = 0; o < out_w; ++o) {
      const auto w = p.weights.row(o);
      double s = p.bias[o];
      for (std::size_t i = 0; i < in_w; ++i) s += w[i] * x[i];
      y[o] = s;
    }
  }
  return out;
}

inline void relu_inplace(Matrix& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace detail

/// Runs the network on a batch (rows are samples). Train mode applies inverted dropout with
/// masks drawn from `rng`; infer mode leaves dropout as the identity and does not touch `rng`.
inline ForwardResult forward(const Network& net, const Matrix& batch, Mode mode, Rng& rng) {
  if (batch.cols() != net.input_width()) {
    fail(ErrorKind::ShapeMismatch, "batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                                       std::to_string(net.input_width()));
  }
  if (!batch.all_finite()) fail(ErrorKind::NonFiniteInput, "batch contains NaN or infinity");

  ForwardResult res;
  auto& cache = res.cache;
  cache.mode = mode;
  cache.inputs.reserve(net.layers.size());
  cache.pre_activations.resize(net.layers.size());
  cache.masks.resize(net.layers.size());

  Matrix x = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    cache.inputs.push_back(x);
    if (const auto* d = std::get_if<DenseSpec>(&net.layers[l])) {
      Matrix z = detail::affine(x, net.params[l]);
      cache.pre_activations[l] = z;
      if (d->activation == Activation::Relu) detail::relu_inplace(z);
      x = std::move(z);
    } else if (mode == Mode::Train) {
      const double rate = std::get<DropoutSpec>(net.layers[l]).rate;
      const double keep = 1.0 - rate;
      Matrix mask(x.rows(), x.cols(), 1.0);
      if (rate > 0.0) {
        for (double& m : mask.values()) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
      }
      for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] *= mask.values()[i];
      cache.masks[l] = std::move(mask);
    }
  }
  cache.output = x;
  res.output = std::move(x);
  return res;
}

/// Infer-mode forward pass without a cache.
inline Matrix infer(const Network& net, const Matrix& batch) {
  if (batch.cols() != net.input_width()) {
    fail(ErrorKind::ShapeMismatch, "batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                                       std::to_string(net.input_width()));
  }
  if (!batch.all_finite()) fail(ErrorKind::NonFiniteInput, "batch contains NaN or infinity");
  Matrix x = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (const auto* d = std::get_if<DenseSpec>(&net.layers[l])) {
      x = detail::affine(x, net.params[l]);
      if (d->activation == Activation::Relu) detail::relu_inplace(x);
    }
  }
  return x;
}

inline void require_same_shape(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) {
    fail(ErrorKind::ShapeMismatch, "prediction " + shape_string(pred) + " vs target " + shape_string(target));
  }
}

/// Mean of squared differences over every batch x output entry.
inline double mse(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.values()[i] - target.values()[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

inline double mae(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.values()[i] - target.values()[i]);
  return s / static_cast<double>(pred.size());
}

struct Gradients {
  std::vector<Matrix> weights;             // aligned with layers; empty for dropout
  std::vector<std::vector<double>> bias;

  bool operator==(const Gradients&) const = default;
};

/// Exact gradient of mse(forward(batch), target) with respect to every weight and bias,
/// reusing the dropout masks recorded in the cache.
inline Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& target) {
  const std::size_t L = net.layers.size();
  if (cache.inputs.size() != L || cache.pre_activations.size() != L || cache.masks.size() != L) {
    fail(ErrorKind::StaleCache, "cache was produced by a network with a different layer count");
  }
  const std::size_t batch = cache.inputs.front().rows();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& in = cache.inputs[l];
    bool ok = in.rows() == batch;
    if (const auto* d = std::get_if<DenseSpec>(&net.layers[l])) {
      ok = ok && in.cols() == d->in_width && cache.pre_activations[l].rows() == batch &&
           cache.pre_activations[l].cols() == d->out_width;
    } else if (cache.mode == Mode::Train) {
      ok = ok && cache.masks[l].same_shape(in);
    }
    if (!ok) fail(ErrorKind::StaleCache, "cache shapes do not match layer " + std::to_string(l));
  }
  require_same_shape(cache.output, target);

  Gradients g;
  g.weights.resize(L);
  g.bias.resize(L);

  Matrix delta(cache.output.rows(), cache.output.cols());
  const double scale = 2.0 / static_cast<double>(cache.output.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta.values()[i] = scale * (cache.output.values()[i] - target.values()[i]);
  }

  for (std::size_t l = L; l-- > 0;) {
    if (const auto* d = std::get_if<DenseSpec>(&net.layers[l])) {
      if (d->activation == Activation::Relu) {
        const auto z = cache.pre_activations[l].values();
        for (std::size_t i = 0; i < delta.size(); ++i) {
          if (!(z[i] > 0.0)) delta.values()[i] = 0.0;
        }
      }
      const auto& in = cache.inputs[l];
      const auto& W = net.params[l].weights;
      Matrix dW(d->out_width, d->in_width);
      std::vector<double> db(d->out_width, 0.0);
      for (std::size_t r = 0; r < batch; ++r) {
        const auto x = in.row(r);
        const auto dr = delta.row(r);
        for (std::size_t o = 0; o < d->out_width; ++o) {
          const double v = dr[o];
          if (v == 0.0) continue;
          db[o] += v;
          auto gw = dW.row(o);
          for (std::size_t i = 0; i < d->in_width; ++i) gw[i] += v * x[i];
        }
      }
      g.weights[l] = std::move(dW);
      g.bias[l] = std::move(db);
      if (l > 0) {
        Matrix prev(batch, d->in_width);
        for (std::size_t r = 0; r < batch; ++r) {
          const auto dr = delta.row(r);
          auto pr = prev.row(r);
          for (std::size_t o = 0; o < d->out_width; ++o) {
            const double v = dr[o];
            if (v == 0.0) continue;
            const auto w = W.row(o);
            for (std::size_t i = 0; i < d->in_width; ++i) pr[i] += v * w[i];
          }
        }
        delta = std::move(prev);
      }
    } else if (cache.mode == Mode::Train) {
      const auto m = cache.masks[l].values();
      for (std::size_t i = 0; i < delta.size(); ++i) delta.values()[i] *= m[i];
    }
  }
  return g;
}

namespace detail {

inline void check_congruent(const Network& net, const Gradients& grads) {
  bool ok = grads.weights.size() == net.layers.size() && grads.bias.size() == net.layers.size();
  for (std::size_t l = 0; ok && l < net.layers.size(); ++l) {
    ok = grads.weights[l].same_shape(net.params[l].weights) && grads.bias[l].size() == net.params[l].bias.size();
  }
  if (!ok) fail(ErrorKind::ShapeMismatch, "gradients do not match the network layout");
}

}  // namespace detail

/// In-place W -= lr * dW, b -= lr * db.
inline void sgd_update(Network& net, const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::NonPositiveLearningRate, "learning rate must be a positive finite number");
  }
  detail::check_congruent(net, grads);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto w = net.params[l].weights.values();
    const auto gw = grads.weights[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * gw[i];
    auto& b = net.params[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads.bias[l][i];
  }
}

inline Network sgd_step(Network net, const Gradients& grads, double learning_rate) {
  sgd_update(net, grads, learning_rate);
  return net;
}

/// Index of the largest value; the first one wins ties.
inline int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

inline int predict_class(const Network& net, std::span<const double> features) {
  const Matrix row(1, features.size(), std::vector<double>(features.begin(), features.end()));
  const Matrix out = infer(net, row);
  return argmax(out.row(0));
}

inline std::vector<int> predict_classes(const Network& net, const Matrix& features) {
  const Matrix out = infer(net, features);
  std::vector<int> labels(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) labels[r] = argmax(out.row(r));
  return labels;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelFormat = "studperf-mlp";
inline constexpr int kModelVersion = 1;

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (const auto* d = std::get_if<DenseSpec>(&net.layers[l])) {
      nlohmann::json rows = nlohmann::json::array();
      const auto& W = net.params[l].weights;
      for (std::size_t o = 0; o < W.rows(); ++o) {
        const auto r = W.row(o);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      layers.push_back({{"type", "dense"},
                        {"in", d->in_width},
                        {"out", d->out_width},
                        {"activation", to_string(d->activation)},
                        {"weights", std::move(rows)},
                        {"bias", net.params[l].bias}});
    } else {
      layers.push_back({{"type", "dropout"}, {"rate", std::get<DropoutSpec>(net.layers[l]).rate}});
    }
  }
  return {{"format", kModelFormat}, {"version", kModelVersion}, {"seed", net.seed}, {"layers", std::move(layers)}};
}

inline Network network_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("format") || doc.at("format") != kModelFormat) {
      fail(ErrorKind::CorruptPayload, "not a studperf model document");
    }
    const auto& version = doc.at("version");
    if (!version.is_number_integer() || version.get<int>() != kModelVersion) {
      fail(ErrorKind::VersionMismatch, "unsupported model version " + version.dump() + " (expected " +
                                           std::to_string(kModelVersion) + ")");
    }
    Network net;
    net.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& layer : doc.at("layers")) {
      const auto type = layer.at("type").get<std::string>();
      if (type == "dense") {
        DenseSpec spec;
        spec.in_width = layer.at("in").get<std::size_t>();
        spec.out_width = layer.at("out").get<std::size_t>();
        const auto act = layer.at("activation").get<std::string>();
        if (act == "relu") {
          spec.activation = Activation::Relu;
        } else if (act == "linear") {
          spec.activation = Activation::Linear;
        } else {
          fail(ErrorKind::CorruptPayload, "unknown activation '" + act + "'");
        }
        const auto& rows = layer.at("weights");
        const auto bias = layer.at("bias").get<std::vector<double>>();
        if (rows.size() != spec.out_width || bias.size() != spec.out_width) {
          fail(ErrorKind::ShapeMismatch, "dense layer parameters do not match its declared widths");
        }
        std::vector<double> flat;
        flat.reserve(spec.in_width * spec.out_width);
        for (const auto& row : rows) {
          const auto r = row.get<std::vector<double>>();
          if (r.size() != spec.in_width) fail(ErrorKind::ShapeMismatch, "weight row width mismatch");
          flat.insert(flat.end(), r.begin(), r.end());
        }
        net.layers.emplace_back(spec);
        net.params.push_back({Matrix(spec.out_width, spec.in_width, std::move(flat)), bias});
      } else if (type == "dropout") {
        net.layers.emplace_back(DropoutSpec{layer.at("rate").get<double>()});
        net.params.emplace_back();
      } else {
        fail(ErrorKind::CorruptPayload, "unknown layer type '" + type + "'");
      }
    }
    try {
      validate_specs(net.layers);
    } catch (const Error& e) {
      fail(ErrorKind::ShapeMismatch, std::string("model layers are inconsistent: ") + e.what());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("malformed model document: ") + e.what());
  }
}

inline std::string save_network(const Network& net) { return to_json(net).dump(1) + "\n"; }

inline Network load_network(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("model payload is not valid JSON: ") + e.what());
  }
  return network_from_json(doc);
}

}  // namespace studperf::nn
