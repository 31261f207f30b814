#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "sdcda/error.hpp"
#include "sdcda/mask.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Plain gradient descent, p <- p - lr * g. Coordinates dropped by `mask`
/// keep their value bit for bit.
inline ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double lr,
                             const PruneMask* mask = nullptr) {
  if (!params.aligns_with(grads)) throw InternalError("sgd_step: gradients do not align with parameters");
  if (mask != nullptr && !mask->aligns_with(params)) throw InternalError("sgd_step: mask does not align with parameters");
  ParameterSet out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto p = out[i].tensor.values();
    auto g = grads[i].tensor.values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw DivergenceError("non-finite gradient at " + grads[i].name + "[" + std::to_string(j) +
                              "] = " + std::to_string(g[j]));
      }
    }
    if (mask == nullptr) {
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    } else {
      const auto& keep = mask->entries[i].keep;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (keep[j]) p[j] -= lr * g[j];
    }
  }
  return out;
}

inline ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads, double lr,
                             const PruneMask& mask) {
  return sgd_step(params, grads, lr, &mask);
}

}  // namespace sdcda
