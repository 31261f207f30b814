#pragma once

// Layer graph evaluation: forward pass with cache, exact reverse-mode backward
// pass, parameter initialization. Batches carry the sample index on axis 0.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sdcda/error.hpp"
#include "sdcda/random.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

namespace layer {
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
};
/// Valid (unpadded) stride-1 convolution over [C, H, W] samples.
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
};
/// 2x2 max pooling, stride 2; odd trailing rows/cols are dropped.
struct MaxPool2d {};
struct Relu {};
/// Inverted dropout: kept units are scaled by 1/(1-rate) in train mode.
struct Dropout {
  double rate = 0.0;
};
struct Sigmoid {};
/// Row-wise softmax over a rank-1 sample.
struct Softmax {};
/// Row-wise Euclidean normalization over a rank-1 sample.
struct L2Normalize {};
struct Flatten {};
}  // namespace layer

using Layer = std::variant<layer::Dense, layer::Conv2d, layer::MaxPool2d, layer::Relu, layer::Dropout, layer::Sigmoid,
                           layer::Softmax, layer::L2Normalize, layer::Flatten>;

inline std::string describe(const Layer& l) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, layer::Dense>) {
          return "dense(" + std::to_string(v.in) + "->" + std::to_string(v.out) + ")";
        } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
          return "conv2d(" + std::to_string(v.kernel) + "x" + std::to_string(v.kernel) + "," +
                 std::to_string(v.in_channels) + "->" + std::to_string(v.out_channels) + ")";
        } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
          return "maxpool2d(2x2)";
        } else if constexpr (std::is_same_v<T, layer::Relu>) {
          return "relu";
        } else if constexpr (std::is_same_v<T, layer::Dropout>) {
          char buf[48];
          std::snprintf(buf, sizeof buf, "dropout(%.17g)", v.rate);
          return buf;
        } else if constexpr (std::is_same_v<T, layer::Sigmoid>) {
          return "sigmoid";
        } else if constexpr (std::is_same_v<T, layer::Softmax>) {
          return "softmax";
        } else if constexpr (std::is_same_v<T, layer::L2Normalize>) {
          return "l2-normalize";
        } else {
          return "flatten";
        }
      },
      l);
}

struct NetworkSpec {
  std::string name;   // parameter-name prefix
  Shape input_shape;  // per-sample shape
  std::vector<Layer> layers;
};

inline std::string describe(const NetworkSpec& net) {
  std::string out = net.name + ":" + shape_string(net.input_shape);
  for (const auto& l : net.layers) out += "|" + describe(l);
  return out;
}

inline std::uint64_t spec_digest(const NetworkSpec& net) { return fnv1a(describe(net)); }

enum class Mode { train, eval };

namespace detail {

inline ConfigError layer_error(const NetworkSpec& net, std::size_t i, const std::string& what) {
  return ConfigError(net.name + " layer " + std::to_string(i) + " (" + describe(net.layers[i]) + "): " + what);
}

inline std::string weight_name(const NetworkSpec& net, std::size_t i) {
  return net.name + "." + std::to_string(i) + ".weight";
}
inline std::string bias_name(const NetworkSpec& net, std::size_t i) {
  return net.name + "." + std::to_string(i) + ".bias";
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Per-sample shapes before and after every layer (size layers + 1).
/// Throws ConfigError naming the first incompatible layer.
inline std::vector<Shape> infer_shapes(const NetworkSpec& net) {
  if (net.input_shape.empty() || shape_size(net.input_shape) == 0) {
    throw ConfigError(net.name + ": input shape must be nonempty and positive");
  }
  std::vector<Shape> shapes{net.input_shape};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Shape& in = shapes.back();
    Shape out = std::visit(
        [&](const auto& v) -> Shape {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, layer::Dense>) {
            if (v.in == 0 || v.out == 0) throw detail::layer_error(net, i, "zero width");
            if (shape_size(in) != v.in)
              throw detail::layer_error(net, i, "expects " + std::to_string(v.in) + " inputs, got " + shape_string(in));
            return {v.out};
          } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
            if (in.size() != 3) throw detail::layer_error(net, i, "expects [C,H,W], got " + shape_string(in));
            if (in[0] != v.in_channels) throw detail::layer_error(net, i, "channel mismatch, got " + shape_string(in));
            if (v.out_channels == 0 || v.kernel == 0) throw detail::layer_error(net, i, "zero size");
            if (in[1] < v.kernel || in[2] < v.kernel) throw detail::layer_error(net, i, "input smaller than kernel");
            return {v.out_channels, in[1] - v.kernel + 1, in[2] - v.kernel + 1};
          } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
            if (in.size() != 3) throw detail::layer_error(net, i, "expects [C,H,W], got " + shape_string(in));
            if (in[1] < 2 || in[2] < 2) throw detail::layer_error(net, i, "spatial dims below 2");
            return {in[0], in[1] / 2, in[2] / 2};
          } else if constexpr (std::is_same_v<T, layer::Dropout>) {
            if (!(v.rate >= 0.0 && v.rate < 1.0)) throw detail::layer_error(net, i, "rate must lie in [0,1)");
            return in;
          } else if constexpr (std::is_same_v<T, layer::Softmax> || std::is_same_v<T, layer::L2Normalize>) {
            if (in.size() != 1) throw detail::layer_error(net, i, "expects a vector, got " + shape_string(in));
            return in;
          } else if constexpr (std::is_same_v<T, layer::Flatten>) {
            return {shape_size(in)};
          } else {
            return in;
          }
        },
        net.layers[i]);
    shapes.push_back(std::move(out));
  }
  return shapes;
}

inline Shape output_shape(const NetworkSpec& net) { return infer_shapes(net).back(); }

/// Names and shapes of the trainable tensors, in iteration order.
inline std::vector<std::pair<std::string, Shape>> parameter_layout(const NetworkSpec& net) {
  const auto shapes = infer_shapes(net);
  std::vector<std::pair<std::string, Shape>> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* d = std::get_if<layer::Dense>(&net.layers[i])) {
      out.emplace_back(detail::weight_name(net, i), Shape{d->out, d->in});
      out.emplace_back(detail::bias_name(net, i), Shape{d->out});
    } else if (const auto* c = std::get_if<layer::Conv2d>(&net.layers[i])) {
      out.emplace_back(detail::weight_name(net, i), Shape{c->out_channels, c->in_channels, c->kernel, c->kernel});
      out.emplace_back(detail::bias_name(net, i), Shape{c->out_channels});
    }
  }
  return out;
}

/// Glorot-uniform weights, zero biases.
inline ParameterSet init_params(const NetworkSpec& net, Rng& rng) {
  ParameterSet params;
  for (auto& [name, shape] : parameter_layout(net)) {
    Tensor t(shape);
    if (shape.size() > 1) {
      const std::size_t receptive = shape.size() == 4 ? shape[2] * shape[3] : 1;
      const double fan_in = static_cast<double>(shape[1] * receptive);
      const double fan_out = static_cast<double>(shape[0] * receptive);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : t.values()) v = rng.uniform(-limit, limit);
    }
    params.add(name, std::move(t));
  }
  return params;
}

struct ForwardCache {
  std::uint64_t signature = 0;
  Mode mode = Mode::eval;
  std::vector<Tensor> activations;                      // activations[i] is the input of layer i
  std::vector<std::vector<double>> dropout_scale;       // per layer; empty unless dropout in train mode
  std::vector<std::vector<std::size_t>> pool_argmax;    // per layer; flat input index of each pooled max
  std::vector<std::vector<double>> norms;               // per layer; row norms of l2-normalize inputs
};

struct ForwardResult {
  Tensor output;
  ForwardCache cache;
};

namespace detail {

inline std::uint64_t cache_signature(const NetworkSpec& net, std::size_t batch) {
  const std::uint64_t b = batch;
  return fnv1a(&b, sizeof b, spec_digest(net));
}

inline void check_params(const NetworkSpec& net, const ParameterSet& params) {
  const auto layout = parameter_layout(net);
  if (layout.size() != params.size()) {
    throw ConfigError(net.name + ": expected " + std::to_string(layout.size()) + " parameter tensors, got " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != params[i].name || layout[i].second != params[i].tensor.shape()) {
      throw ConfigError(net.name + ": parameter '" + params[i].name + "' " + shape_string(params[i].tensor.shape()) +
                        " does not match layout '" + layout[i].first + "' " + shape_string(layout[i].second));
    }
  }
}

inline Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace detail

/// Evaluates `net` on a batch. Dropout draws from `rng` only in train mode.
inline ForwardResult forward(const NetworkSpec& net, const ParameterSet& params, const Tensor& input, Mode mode,
                             Rng* rng = nullptr) {
  const auto shapes = infer_shapes(net);
  detail::check_params(net, params);
  if (input.rank() != shapes[0].size() + 1 ||
      !std::equal(shapes[0].begin(), shapes[0].end(), input.shape().begin() + 1)) {
    throw ConfigError(net.name + " input: expected per-sample shape " + shape_string(shapes[0]) + ", got batch " +
                      shape_string(input.shape()));
  }
  const std::size_t n = input.dim(0);
  const std::size_t depth = net.layers.size();

  ForwardCache cache;
  cache.signature = detail::cache_signature(net, n);
  cache.mode = mode;
  cache.activations.reserve(depth + 1);
  cache.activations.push_back(input);
  cache.dropout_scale.resize(depth);
  cache.pool_argmax.resize(depth);
  cache.norms.resize(depth);

  for (std::size_t li = 0; li < depth; ++li) {
    const Tensor& x = cache.activations.back();
    Tensor y(detail::batched(n, shapes[li + 1]));
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, layer::Dense>) {
            const Tensor& w = params.at(detail::weight_name(net, li));
            const Tensor& b = params.at(detail::bias_name(net, li));
            for (std::size_t s = 0; s < n; ++s) {
              const double* xs = x.data() + s * v.in;
              double* ys = y.data() + s * v.out;
              for (std::size_t o = 0; o < v.out; ++o) {
                const double* wo = w.data() + o * v.in;
                double acc = b[o];
                for (std::size_t i = 0; i < v.in; ++i) acc += wo[i] * xs[i];
                ys[o] = acc;
              }
            }
          } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
            const Tensor& w = params.at(detail::weight_name(net, li));
            const Tensor& b = params.at(detail::bias_name(net, li));
            const std::size_t ih = shapes[li][1], iw = shapes[li][2];
            const std::size_t oh = shapes[li + 1][1], ow = shapes[li + 1][2];
            const std::size_t k = v.kernel;
            for (std::size_t s = 0; s < n; ++s)
              for (std::size_t oc = 0; oc < v.out_channels; ++oc) {
                double* yo = y.data() + ((s * v.out_channels + oc) * oh) * ow;
                for (std::size_t p = 0; p < oh * ow; ++p) yo[p] = b[oc];
                for (std::size_t ic = 0; ic < v.in_channels; ++ic) {
                  const double* xi = x.data() + ((s * v.in_channels + ic) * ih) * iw;
                  const double* wk = w.data() + ((oc * v.in_channels + ic) * k) * k;
                  for (std::size_t r = 0; r < oh; ++r)
                    for (std::size_t c = 0; c < ow; ++c) {
                      double acc = 0.0;
                      for (std::size_t kr = 0; kr < k; ++kr)
                        for (std::size_t kc = 0; kc < k; ++kc) acc += wk[kr * k + kc] * xi[(r + kr) * iw + c + kc];
                      yo[r * ow + c] += acc;
                    }
                }
              }
          } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
            const std::size_t ch = shapes[li][0], ih = shapes[li][1], iw = shapes[li][2];
            const std::size_t oh = ih / 2, ow = iw / 2;
            auto& arg = cache.pool_argmax[li];
            arg.resize(y.size());
            for (std::size_t s = 0; s < n; ++s)
              for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t in_base = (s * ch + c) * ih * iw;
                const std::size_t out_base = (s * ch + c) * oh * ow;
                for (std::size_t r = 0; r < oh; ++r)
                  for (std::size_t q = 0; q < ow; ++q) {
                    std::size_t best = in_base + (2 * r) * iw + 2 * q;
                    for (std::size_t dr = 0; dr < 2; ++dr)
                      for (std::size_t dq = 0; dq < 2; ++dq) {
                        const std::size_t idx = in_base + (2 * r + dr) * iw + 2 * q + dq;
                        if (x[idx] > x[best]) best = idx;
                      }
                    y[out_base + r * ow + q] = x[best];
                    arg[out_base + r * ow + q] = best;
                  }
              }
          } else if constexpr (std::is_same_v<T, layer::Relu>) {
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
          } else if constexpr (std::is_same_v<T, layer::Dropout>) {
            if (mode == Mode::train && v.rate > 0.0) {
              if (rng == nullptr) throw InternalError(net.name + ": dropout in train mode needs an rng");
              auto& scale = cache.dropout_scale[li];
              scale.resize(y.size());
              const double keep_scale = 1.0 / (1.0 - v.rate);
              for (std::size_t i = 0; i < y.size(); ++i) {
                scale[i] = rng->uniform() < v.rate ? 0.0 : keep_scale;
                y[i] = x[i] * scale[i];
              }
            } else {
              y = x;
            }
          } else if constexpr (std::is_same_v<T, layer::Sigmoid>) {
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = detail::sigmoid(x[i]);
          } else if constexpr (std::is_same_v<T, layer::Softmax>) {
            const std::size_t k = shapes[li][0];
            for (std::size_t s = 0; s < n; ++s) {
              const double* xs = x.data() + s * k;
              double* ys = y.data() + s * k;
              double mx = xs[0];
              for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xs[j]);
              double total = 0.0;
              for (std::size_t j = 0; j < k; ++j) total += (ys[j] = std::exp(xs[j] - mx));
              for (std::size_t j = 0; j < k; ++j) ys[j] /= total;
            }
          } else if constexpr (std::is_same_v<T, layer::L2Normalize>) {
            const std::size_t k = shapes[li][0];
            auto& norms = cache.norms[li];
            norms.resize(n);
            for (std::size_t s = 0; s < n; ++s) {
              const double* xs = x.data() + s * k;
              double sq = 0.0;
              for (std::size_t j = 0; j < k; ++j) sq += xs[j] * xs[j];
              const double norm = std::sqrt(sq);
              if (!(norm > 0.0)) throw DomainError(net.name + " layer " + std::to_string(li) + ": zero vector");
              norms[s] = norm;
              for (std::size_t j = 0; j < k; ++j) y[s * k + j] = xs[j] / norm;
            }
          } else {
            std::copy(x.values().begin(), x.values().end(), y.values().begin());
          }
        },
        net.layers[li]);
    cache.activations.push_back(std::move(y));
  }
  return {cache.activations.back(), std::move(cache)};
}

/// Extra gradient entering at an intermediate activation (index 0 is the
/// network input, index i + 1 the output of layer i).
struct TapGrad {
  std::size_t activation = 0;
  Tensor grad;
};

struct BackwardResult {
  ParameterSet grads;
  Tensor input_grad;
};

/// Reverse-mode pass through a cached forward. `upstream` is dL/d(output).
inline BackwardResult backward(const NetworkSpec& net, const ParameterSet& params, const ForwardCache& cache,
                               const Tensor& upstream, std::span<const TapGrad> taps = {}) {
  const std::size_t depth = net.layers.size();
  if (cache.activations.size() != depth + 1 || cache.activations.empty()) {
    throw InternalError(net.name + ": cache does not belong to this network");
  }
  const std::size_t n = cache.activations[0].dim(0);
  if (cache.signature != detail::cache_signature(net, n)) {
    throw InternalError(net.name + ": stale or mismatched forward cache");
  }
  if (upstream.shape() != cache.activations.back().shape()) {
    throw InternalError(net.name + ": upstream gradient shape " + shape_string(upstream.shape()) +
                        " does not match output " + shape_string(cache.activations.back().shape()));
  }
  detail::check_params(net, params);
  const auto shapes = infer_shapes(net);

  auto add_taps = [&](std::size_t index, Tensor& g) {
    for (const auto& tap : taps) {
      if (tap.activation > depth) throw InternalError(net.name + ": tap index out of range");
      if (tap.activation != index) continue;
      if (tap.grad.shape() != g.shape()) throw InternalError(net.name + ": tap gradient shape mismatch");
      g += tap.grad;
    }
  };

  BackwardResult result{params.zeros_like(), {}};
  Tensor g = upstream;
  add_taps(depth, g);
  for (std::size_t li = depth; li-- > 0;) {
    const Tensor& x = cache.activations[li];
    const Tensor& y = cache.activations[li + 1];
    Tensor dx(x.shape());
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, layer::Dense>) {
            const Tensor& w = params.at(detail::weight_name(net, li));
            Tensor& dw = result.grads.at(detail::weight_name(net, li));
            Tensor& db = result.grads.at(detail::bias_name(net, li));
            for (std::size_t s = 0; s < n; ++s) {
              const double* xs = x.data() + s * v.in;
              const double* gs = g.data() + s * v.out;
              double* dxs = dx.data() + s * v.in;
              for (std::size_t o = 0; o < v.out; ++o) {
                const double go = gs[o];
                db[o] += go;
                double* dwo = dw.data() + o * v.in;
                const double* wo = w.data() + o * v.in;
                for (std::size_t i = 0; i < v.in; ++i) {
                  dwo[i] += go * xs[i];
                  dxs[i] += wo[i] * go;
                }
              }
            }
          } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
            const Tensor& w = params.at(detail::weight_name(net, li));
            Tensor& dw = result.grads.at(detail::weight_name(net, li));
            Tensor& db = result.grads.at(detail::bias_name(net, li));
            const std::size_t ih = shapes[li][1], iw = shapes[li][2];
            const std::size_t oh = shapes[li + 1][1], ow = shapes[li + 1][2];
            const std::size_t k = v.kernel;
            for (std::size_t s = 0; s < n; ++s)
              for (std::size_t oc = 0; oc < v.out_channels; ++oc) {
                const double* go = g.data() + ((s * v.out_channels + oc) * oh) * ow;
                for (std::size_t p = 0; p < oh * ow; ++p) db[oc] += go[p];
                for (std::size_t ic = 0; ic < v.in_channels; ++ic) {
                  const double* xi = x.data() + ((s * v.in_channels + ic) * ih) * iw;
                  double* dxi = dx.data() + ((s * v.in_channels + ic) * ih) * iw;
                  const double* wk = w.data() + ((oc * v.in_channels + ic) * k) * k;
                  double* dwk = dw.data() + ((oc * v.in_channels + ic) * k) * k;
                  for (std::size_t r = 0; r < oh; ++r)
                    for (std::size_t c = 0; c < ow; ++c) {
                      const double gv = go[r * ow + c];
                      for (std::size_t kr = 0; kr < k; ++kr)
                        for (std::size_t kc = 0; kc < k; ++kc) {
                          dwk[kr * k + kc] += gv * xi[(r + kr) * iw + c + kc];
                          dxi[(r + kr) * iw + c + kc] += wk[kr * k + kc] * gv;
                        }
                    }
                }
              }
          } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
            const auto& arg = cache.pool_argmax[li];
            for (std::size_t i = 0; i < g.size(); ++i) dx[arg[i]] += g[i];
          } else if constexpr (std::is_same_v<T, layer::Relu>) {
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? g[i] : 0.0;
          } else if constexpr (std::is_same_v<T, layer::Dropout>) {
            const auto& scale = cache.dropout_scale[li];
            if (scale.empty()) {
              dx = g;
            } else {
              for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * scale[i];
            }
          } else if constexpr (std::is_same_v<T, layer::Sigmoid>) {
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * y[i] * (1.0 - y[i]);
          } else if constexpr (std::is_same_v<T, layer::Softmax>) {
            const std::size_t k = shapes[li][0];
            for (std::size_t s = 0; s < n; ++s) {
              double dot = 0.0;
              for (std::size_t j = 0; j < k; ++j) dot += g[s * k + j] * y[s * k + j];
              for (std::size_t j = 0; j < k; ++j) dx[s * k + j] = y[s * k + j] * (g[s * k + j] - dot);
            }
          } else if constexpr (std::is_same_v<T, layer::L2Normalize>) {
            const std::size_t k = shapes[li][0];
            for (std::size_t s = 0; s < n; ++s) {
              double dot = 0.0;
              for (std::size_t j = 0; j < k; ++j) dot += g[s * k + j] * y[s * k + j];
              const double inv = 1.0 / cache.norms[li][s];
              for (std::size_t j = 0; j < k; ++j) dx[s * k + j] = (g[s * k + j] - y[s * k + j] * dot) * inv;
            }
          } else {
            std::copy(g.values().begin(), g.values().end(), dx.values().begin());
          }
        },
        net.layers[li]);
    g = std::move(dx);
    add_taps(li, g);
  }
  result.input_grad = std::move(g);
  return result;
}

/// A network together with its parameters.
struct Model {
  NetworkSpec net;
  ParameterSet params;
};

}  // namespace sdcda
