#pragma once

// Dense feed-forward networks with reverse-mode gradients and an
// adaptive-moment optimizer. Small enough to hold actor, critic and the
// conflict classifier without an external ML framework.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "neuroadapt/binary_io.hpp"
#include "neuroadapt/common.hpp"

namespace neuroadapt::nn {

enum class Activation : std::uint8_t { relu = 0, tanh = 1, linear = 2, softmax = 3 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

/// Row-major dense matrix.
struct Tensor2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor2D() = default;
  Tensor2D(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Tensor2D t;
    t.rows = rs.size();
    t.cols = rs.size() ? rs.begin()->size() : 0;
    for (const auto& r : rs) {
      if (r.size() != t.cols) throw ShapeError("ragged matrix literal");
      t.values.insert(t.values.end(), r.begin(), r.end());
    }
    return t;
  }

  static Tensor2D identity(std::size_t n) {
    Tensor2D t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  Tensor2D transposed() const {
    Tensor2D t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool operator==(const Tensor2D&) const = default;
};

inline Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  Tensor2D out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline std::vector<double> matvec(const Tensor2D& a, std::span<const double> x) {
  if (a.cols != x.size()) throw ShapeError("matvec: dimension mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

/// One affine layer: weights are (out x in).
struct DenseLayer {
  Tensor2D weights;
  std::vector<double> biases;
  Activation activation = Activation::linear;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
  bool operator==(const DenseLayer&) const = default;
};

struct LayerSpec {
  std::size_t width;
  Activation activation;
};

class DenseNet {
 public:
  DenseNet() = default;

  DenseNet(std::size_t input_dim, std::vector<DenseLayer> layers) : input_dim_(input_dim), layers_(std::move(layers)) {
    validate();
  }

  /// Glorot-uniform weights, zero biases.
  static DenseNet create(std::size_t input_dim, std::span<const LayerSpec> specs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t fan_in = input_dim;
    for (const auto& s : specs) {
      DenseLayer l;
      l.weights = Tensor2D(s.width, fan_in);
      l.biases.assign(s.width, 0.0);
      l.activation = s.activation;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + s.width));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& w : l.weights.values) w = dist(rng);
      layers.push_back(std::move(l));
      fan_in = s.width;
    }
    return DenseNet(input_dim, std::move(layers));
  }

  static DenseNet create(std::size_t input_dim, std::initializer_list<LayerSpec> specs, std::uint64_t seed) {
    return create(input_dim, std::span<const LayerSpec>(specs.begin(), specs.size()), seed);
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.values.size() + l.biases.size();
    return n;
  }

  /// Visits every parameter in a fixed order (layer, weights row-major, biases).
  template <class F>
  void for_each_parameter(F&& f) {
    for (auto& l : layers_) {
      for (double& w : l.weights.values) f(w);
      for (double& b : l.biases) f(b);
    }
  }
  template <class F>
  void for_each_parameter(F&& f) const {
    for (const auto& l : layers_) {
      for (double w : l.weights.values) f(w);
      for (double b : l.biases) f(b);
    }
  }

  void validate() const {
    std::size_t in = input_dim_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.weights.cols != in) throw ShapeError("layer " + std::to_string(i) + " input width mismatch");
      if (l.weights.values.size() != l.weights.rows * l.weights.cols) throw ShapeError("weight storage size mismatch");
      if (l.biases.size() != l.weights.rows) throw ShapeError("bias length mismatch");
      if (l.activation == Activation::softmax && i + 1 != layers_.size())
        throw ShapeError("softmax is only allowed on the final layer");
      in = l.weights.rows;
    }
  }

  bool operator==(const DenseNet&) const = default;

 private:
  std::size_t input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

namespace detail {

inline void apply_activation(Activation a, std::span<double> z) {
  switch (a) {
    case Activation::relu:
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (double& v : z) v = std::tanh(v);
      break;
    case Activation::linear:
      break;
    case Activation::softmax: {
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (double& v : z) v /= sum;
      break;
    }
  }
}

}  // namespace detail

/// Per-layer outputs retained for the backward pass; activations[0] is the input.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  std::span<const double> output() const { return activations.back(); }
};

inline ForwardTrace forward_trace(const DenseNet& net, std::span<const double> input) {
  if (input.size() != net.input_dim())
    throw ShapeError("forward: expected input of length " + std::to_string(net.input_dim()) + ", got " +
                     std::to_string(input.size()));
  ForwardTrace t;
  t.activations.reserve(net.layers().size() + 1);
  t.activations.emplace_back(input.begin(), input.end());
  for (const auto& l : net.layers()) {
    auto z = matvec(l.weights, t.activations.back());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += l.biases[i];
    detail::apply_activation(l.activation, z);
    t.activations.push_back(std::move(z));
  }
  return t;
}

inline std::vector<double> forward(const DenseNet& net, std::span<const double> input) {
  auto t = forward_trace(net, input);
  return std::move(t.activations.back());
}

/// Gradient (or moment) storage shaped like a network's parameters.
struct NetGradients {
  std::vector<Tensor2D> weights;
  std::vector<std::vector<double>> biases;

  static NetGradients zeros_like(const DenseNet& net) {
    NetGradients g;
    for (const auto& l : net.layers()) {
      g.weights.emplace_back(l.weights.rows, l.weights.cols);
      g.biases.emplace_back(l.biases.size(), 0.0);
    }
    return g;
  }

  void add(const NetGradients& o, double scale = 1.0) {
    if (o.weights.size() != weights.size()) throw ShapeError("gradient layer count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (o.weights[i].values.size() != weights[i].values.size() || o.biases[i].size() != biases[i].size())
        throw ShapeError("gradient shape mismatch");
      for (std::size_t k = 0; k < weights[i].values.size(); ++k) weights[i].values[k] += scale * o.weights[i].values[k];
      for (std::size_t k = 0; k < biases[i].size(); ++k) biases[i][k] += scale * o.biases[i][k];
    }
  }

  void scale(double k) {
    for (auto& w : weights)
      for (double& v : w.values) v *= k;
    for (auto& b : biases)
      for (double& v : b) v *= k;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      for (double v : weights[i].values) f(v);
      for (double v : biases[i]) f(v);
    }
  }

  bool matches(const DenseNet& net) const {
    if (weights.size() != net.layers().size() || biases.size() != net.layers().size()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto& l = net.layers()[i];
      if (weights[i].rows != l.weights.rows || weights[i].cols != l.weights.cols || biases[i].size() != l.biases.size())
        return false;
    }
    return true;
  }

  bool operator==(const NetGradients&) const = default;
};

struct BackwardResult {
  NetGradients params;
  std::vector<double> input;
};

/// Reverse pass given a trace from forward_trace and dLoss/dOutput.
inline BackwardResult backward(const DenseNet& net, const ForwardTrace& trace, std::span<const double> upstream) {
  if (upstream.size() != net.output_dim()) throw ShapeError("backward: upstream gradient width mismatch");
  if (trace.activations.size() != net.layers().size() + 1) throw ShapeError("backward: trace does not match net");
  BackwardResult r{NetGradients::zeros_like(net), {}};
  std::vector<double> grad(upstream.begin(), upstream.end());
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const auto& l = net.layers()[li];
    const auto& out = trace.activations[li + 1];
    const auto& in = trace.activations[li];
    // dL/dz from dL/dy
    switch (l.activation) {
      case Activation::relu:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = out[i] > 0.0 ? grad[i] : 0.0;
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - out[i] * out[i];
        break;
      case Activation::linear:
        break;
      case Activation::softmax: {
        double dot = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) dot += grad[i] * out[i];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = out[i] * (grad[i] - dot);
        break;
      }
    }
    auto& gw = r.params.weights[li];
    for (std::size_t i = 0; i < l.out_dim(); ++i) {
      const double gi = grad[i];
      r.params.biases[li][i] = gi;
      if (gi == 0.0) continue;
      auto row = gw.row(i);
      for (std::size_t j = 0; j < l.in_dim(); ++j) row[j] = gi * in[j];
    }
    std::vector<double> next(l.in_dim(), 0.0);
    for (std::size_t i = 0; i < l.out_dim(); ++i) {
      const double gi = grad[i];
      if (gi == 0.0) continue;
      const auto row = l.weights.row(i);
      for (std::size_t j = 0; j < l.in_dim(); ++j) next[j] += gi * row[j];
    }
    grad = std::move(next);
  }
  r.input = std::move(grad);
  return r;
}

inline BackwardResult backward(const DenseNet& net, std::span<const double> input, std::span<const double> upstream) {
  if (upstream.size() != net.output_dim()) throw ShapeError("backward: upstream gradient width mismatch");
  return backward(net, forward_trace(net, input), upstream);
}

/// Adaptive-moment (Adam) optimizer state.
struct OptimizerState {
  NetGradients first_moment;
  NetGradients second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState for_net(const DenseNet& net, double learning_rate) {
    OptimizerState s;
    s.first_moment = NetGradients::zeros_like(net);
    s.second_moment = NetGradients::zeros_like(net);
    s.learning_rate = learning_rate;
    return s;
  }

  bool operator==(const OptimizerState&) const = default;
};

/// One Adam step. Throws DivergenceError on non-finite gradients.
inline void opt_step(DenseNet& net, const NetGradients& grads, OptimizerState& state) {
  if (!grads.matches(net)) throw ShapeError("opt_step: gradient shapes do not match net");
  if (!state.first_moment.matches(net) || !state.second_moment.matches(net))
    throw ShapeError("opt_step: optimizer state shapes do not match net");
  bool finite = true;
  grads.for_each([&](double g) { finite = finite && std::isfinite(g); });
  if (!finite) throw DivergenceError("opt_step: non-finite gradient");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    p -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  };
  auto& layers = net.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& w = layers[li].weights.values;
    for (std::size_t k = 0; k < w.size(); ++k)
      update(w[k], grads.weights[li].values[k], state.first_moment.weights[li].values[k],
             state.second_moment.weights[li].values[k]);
    auto& b = layers[li].biases;
    for (std::size_t k = 0; k < b.size(); ++k)
      update(b[k], grads.biases[li][k], state.first_moment.biases[li][k], state.second_moment.biases[li][k]);
  }
  bool params_finite = true;
  net.for_each_parameter([&](double p) { params_finite = params_finite && std::isfinite(p); });
  if (!params_finite) throw DivergenceError("opt_step: parameters became non-finite");
}

/// Loss over network outputs with its analytic gradient.
struct OutputLoss {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// numeric gradients by central differences.
inline double finite_diff_check(const DenseNet& net, const OutputLoss& loss, std::span<const double> input,
                                double h = 1e-5) {
  const auto trace = forward_trace(net, input);
  const auto up = loss.gradient(trace.output());
  const auto analytic = backward(net, trace, up).params;

  std::vector<double> flat;
  analytic.for_each([&](double g) { flat.push_back(g); });

  DenseNet probe = net;
  std::vector<double*> params;
  probe.for_each_parameter([&](double& p) { params.push_back(&p); });

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double lp = loss.value(forward(probe, input));
    *params[k] = saved - h;
    const double lm = loss.value(forward(probe, input));
    *params[k] = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = flat[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

// Serialization: "NANN" magic, u32 version, u32 input_dim, u32 layer_count,
// per layer {u32 out_dim, u32 activation}, then per layer the weights
// (row-major) and biases as little-endian IEEE-754 doubles.

inline constexpr std::uint32_t kNetFormatVersion = 1;

inline void save(const DenseNet& net, std::ostream& os) {
  io::write_magic(os, "NANN");
  io::write_u32(os, kNetFormatVersion);
  io::write_u32(os, static_cast<std::uint32_t>(net.input_dim()));
  io::write_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    io::write_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    io::write_u32(os, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : net.layers()) {
    for (double w : l.weights.values) io::write_f64(os, w);
    for (double b : l.biases) io::write_f64(os, b);
  }
}

inline DenseNet load(std::istream& is) {
  io::expect_magic(is, "NANN");
  if (io::read_u32(is) != kNetFormatVersion) throw FormatError("unsupported network format version");
  const std::size_t input_dim = io::read_u32(is);
  const std::size_t n = io::read_u32(is);
  if (n > 4096) throw FormatError("implausible layer count");
  std::vector<DenseLayer> layers(n);
  std::size_t in = input_dim;
  for (auto& l : layers) {
    const std::size_t out = io::read_u32(is);
    const std::uint32_t act = io::read_u32(is);
    if (act > 3) throw FormatError("unknown activation tag");
    if (out == 0 || out > (1u << 20)) throw FormatError("implausible layer width");
    l.weights = Tensor2D(out, in);
    l.biases.assign(out, 0.0);
    l.activation = static_cast<Activation>(act);
    in = out;
  }
  for (auto& l : layers) {
    for (double& w : l.weights.values) w = io::read_f64(is);
    for (double& b : l.biases) b = io::read_f64(is);
  }
  return DenseNet(input_dim, std::move(layers));
}

inline void save_gradients(const NetGradients& g, std::ostream& os) {
  io::write_u32(os, static_cast<std::uint32_t>(g.weights.size()));
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    io::write_u32(os, static_cast<std::uint32_t>(g.weights[i].rows));
    io::write_u32(os, static_cast<std::uint32_t>(g.weights[i].cols));
    for (double v : g.weights[i].values) io::write_f64(os, v);
    io::write_u32(os, static_cast<std::uint32_t>(g.biases[i].size()));
    for (double v : g.biases[i]) io::write_f64(os, v);
  }
}

inline NetGradients load_gradients(std::istream& is) {
  NetGradients g;
  const std::uint32_t n = io::read_u32(is);
  if (n > 4096) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t r = io::read_u32(is), c = io::read_u32(is);
    if (r * c > (1u << 26)) throw FormatError("implausible tensor size");
    Tensor2D t(r, c);
    for (double& v : t.values) v = io::read_f64(is);
    g.weights.push_back(std::move(t));
    const std::uint32_t nb = io::read_u32(is);
    if (nb > (1u << 20)) throw FormatError("implausible bias length");
    std::vector<double> b(nb);
    for (double& v : b) v = io::read_f64(is);
    g.biases.push_back(std::move(b));
  }
  return g;
}

inline void save_optimizer(const OptimizerState& s, std::ostream& os) {
  io::write_magic(os, "NAOP");
  io::write_u64(os, s.step_count);
  io::write_f64(os, s.learning_rate);
  io::write_f64(os, s.beta1);
  io::write_f64(os, s.beta2);
  io::write_f64(os, s.epsilon);
  save_gradients(s.first_moment, os);
  save_gradients(s.second_moment, os);
}

inline OptimizerState load_optimizer(std::istream& is) {
  io::expect_magic(is, "NAOP");
  OptimizerState s;
  s.step_count = io::read_u64(is);
  s.learning_rate = io::read_f64(is);
  s.beta1 = io::read_f64(is);
  s.beta2 = io::read_f64(is);
  s.epsilon = io::read_f64(is);
  s.first_moment = load_gradients(is);
  s.second_moment = load_gradients(is);
  return s;
}

inline void save_file(const DenseNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  save(net, os);
}

inline DenseNet load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return load(is);
}

}  // namespace neuroadapt::nn
