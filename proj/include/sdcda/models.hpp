#pragma once

// Concrete architectures (feature extractor, projection head, domain
// discriminator, label classifier) and the supervised / adversarial losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdcda/error.hpp"
#include "sdcda/network.hpp"
#include "sdcda/random.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

enum class ExtractorVariant { fnn, cnn };

inline std::string to_string(ExtractorVariant v) { return v == ExtractorVariant::cnn ? "cnn" : "fnn"; }

inline ExtractorVariant parse_extractor(std::string_view s) {
  if (s == "fnn") return ExtractorVariant::fnn;
  if (s == "cnn") return ExtractorVariant::cnn;
  throw ConfigError("extractor must be fnn or cnn, got '" + std::string(s) + "'");
}

struct ExtractorSpec {
  ExtractorVariant variant = ExtractorVariant::fnn;
  Shape input_shape{24};          // [d] for fnn, [C, H, W] for cnn
  double dropout = 0.3;           // fnn only
  std::size_t fnn_hidden = 100;
  std::size_t fnn_features = 24;
};

enum class HeadKind { projection, discriminator, classifier };

struct HeadSpec {
  HeadKind kind = HeadKind::classifier;
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  std::size_t out_dim = 0;  // projection width or class count K; ignored for the discriminator
};

/// Activation index of the discriminator's last hidden layer (its vector output).
inline constexpr std::size_t kDiscriminatorTap = 2;

inline NetworkSpec extractor_network(const ExtractorSpec& spec) {
  NetworkSpec net{"g", spec.input_shape, {}};
  if (spec.variant == ExtractorVariant::fnn) {
    net.layers = {layer::Flatten{},
                  layer::Dense{shape_size(spec.input_shape), spec.fnn_hidden},
                  layer::Relu{},
                  layer::Dropout{spec.dropout},
                  layer::Dense{spec.fnn_hidden, spec.fnn_features},
                  layer::Relu{},
                  layer::Dropout{spec.dropout}};
  } else {
    if (spec.input_shape.size() != 3) throw ConfigError("cnn extractor needs a [C,H,W] input shape");
    net.layers = {layer::Conv2d{spec.input_shape[0], 32}, layer::Relu{}, layer::MaxPool2d{},
                  layer::Conv2d{32, 64},                  layer::Relu{}, layer::MaxPool2d{},
                  layer::Conv2d{64, 128},                 layer::Relu{}, layer::Flatten{}};
  }
  infer_shapes(net);
  return net;
}

inline NetworkSpec head_network(const HeadSpec& spec) {
  if (spec.in_dim == 0 || spec.hidden == 0) throw ConfigError("head widths must be positive");
  switch (spec.kind) {
    case HeadKind::projection:
      if (spec.out_dim == 0) throw ConfigError("projection width must be positive");
      return {"p", {spec.in_dim}, {layer::Dense{spec.in_dim, spec.hidden}, layer::Relu{}, layer::Dense{spec.hidden, spec.out_dim}}};
    case HeadKind::discriminator:
      if (spec.hidden < 2) throw ConfigError("discriminator hidden width must be at least 2");
      return {"d", {spec.in_dim}, {layer::Dense{spec.in_dim, spec.hidden}, layer::Sigmoid{}, layer::Dense{spec.hidden, 1}, layer::Sigmoid{}}};
    case HeadKind::classifier:
      if (spec.out_dim < 2) throw ConfigError("classifier needs K >= 2 classes");
      return {"c", {spec.in_dim}, {layer::Dense{spec.in_dim, spec.hidden}, layer::Relu{}, layer::Dense{spec.hidden, spec.out_dim}, layer::Softmax{}}};
  }
  throw ConfigError("unknown head kind");
}

inline Model build_model(const ExtractorSpec& spec, std::uint64_t seed) {
  Model m{extractor_network(spec), {}};
  Rng rng(seed);
  m.params = init_params(m.net, rng);
  return m;
}

inline Model build_model(const HeadSpec& spec, std::uint64_t seed) {
  Model m{head_network(spec), {}};
  Rng rng(seed);
  m.params = init_params(m.net, rng);
  return m;
}

inline std::size_t feature_dim(const ExtractorSpec& spec) { return shape_size(output_shape(extractor_network(spec))); }

/// Architecture of the full framework.
struct ModelConfig {
  ExtractorSpec extractor;
  std::size_t hidden = 64;
  std::size_t projection_dim = 64;
  std::size_t classes = 2;
};

struct ModelSet {
  Model g;  // feature extractor
  Model p;  // projection head
  Model d;  // domain discriminator
  Model c;  // label classifier
};

/// Builds all four components; each draws from its own seed stream.
inline ModelSet build_models(const ModelConfig& cfg, std::uint64_t seed) {
  const std::size_t f = feature_dim(cfg.extractor);
  return {build_model(cfg.extractor, derive_seed(seed, "init.g")),
          build_model(HeadSpec{HeadKind::projection, f, cfg.hidden, cfg.projection_dim}, derive_seed(seed, "init.p")),
          build_model(HeadSpec{HeadKind::discriminator, f, cfg.hidden, 1}, derive_seed(seed, "init.d")),
          build_model(HeadSpec{HeadKind::classifier, f, cfg.hidden, cfg.classes}, derive_seed(seed, "init.c"))};
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Loss value with its gradient with respect to the network output.
struct LossGrad {
  double value = 0.0;
  Tensor grad;
  bool clamped = false;  // some probability hit the [1e-12, 1 - 1e-12] clamp
};

/// L_c = -(1/n) sum_i log p_i[y_i] over softmax rows; labels are 1..K.
inline LossGrad classification_loss(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.rows() == 0) throw DomainError("classification_loss: probs must be a nonempty [n, K] matrix");
  if (labels.size() != probs.rows()) throw DomainError("classification_loss: label count differs from batch size");
  const std::size_t n = probs.rows(), k = probs.row_size();
  LossGrad out{0.0, Tensor(probs.shape()), false};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > k) {
      throw DomainError("classification_loss: label " + std::to_string(labels[i]) + " outside 1.." + std::to_string(k));
    }
    const std::size_t y = static_cast<std::size_t>(labels[i]) - 1;
    const double p = probs.at(i, y);
    const double pc = std::max(p, kProbabilityFloor);  // log 1 = 0 needs no upper clamp
    if (pc != p) out.clamped = true;
    out.value -= std::log(pc) * inv_n;
    out.grad.at(i, y) = pc == p ? -inv_n / p : 0.0;
  }
  return out;
}

/// Gradients of L_d with respect to the discriminator's scalar outputs.
struct AdversarialLoss {
  double value = 0.0;
  Tensor d_source;
  Tensor d_target;
  bool clamped = false;
};

/// L_d = -sum log D(G(x_s)) - sum log(1 - D(G(x_t))). With `normalized`,
/// each sum is divided by its sample count.
inline AdversarialLoss adversarial_loss(const Tensor& d_source, const Tensor& d_target, bool normalized = false) {
  if (d_source.empty() || d_target.empty()) throw DomainError("adversarial_loss: empty domain batch");
  AdversarialLoss out{0.0, Tensor(d_source.shape()), Tensor(d_target.shape()), false};
  const double ws = normalized ? 1.0 / static_cast<double>(d_source.size()) : 1.0;
  const double wt = normalized ? 1.0 / static_cast<double>(d_target.size()) : 1.0;
  for (std::size_t i = 0; i < d_source.size(); ++i) {
    const double p = d_source[i];
    const double pc = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
    if (pc != p) out.clamped = true;
    out.value -= ws * std::log(pc);
    out.d_source[i] = pc == p ? -ws / p : 0.0;
  }
  for (std::size_t i = 0; i < d_target.size(); ++i) {
    const double p = d_target[i];
    const double pc = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
    if (pc != p) out.clamped = true;
    out.value -= wt * std::log(1.0 - pc);
    out.d_target[i] = pc == p ? wt / (1.0 - p) : 0.0;
  }
  return out;
}

}  // namespace sdcda
