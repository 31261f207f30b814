#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>

#include "sdcda/error.hpp"
#include "sdcda/mask.hpp"
#include "sdcda/optimizer.hpp"
#include "sdcda/random.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

enum class PruneStrategy { l1, random };

inline std::string to_string(PruneStrategy s) { return s == PruneStrategy::random ? "random" : "l1"; }

inline PruneStrategy parse_prune_strategy(std::string_view s) {
  if (s == "l1") return PruneStrategy::l1;
  if (s == "random") return PruneStrategy::random;
  throw ConfigError("pruning strategy must be l1 or random, got '" + std::string(s) + "'");
}

/// Weight tensors are prunable; biases never are.
inline bool is_prunable(const std::string& name) {
  constexpr std::string_view suffix = ".weight";
  return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::size_t pruned_count(double alpha, std::size_t n) {
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
}

namespace detail {
inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("prune proportion must lie in [0,1), got " + std::to_string(alpha));
}
}  // namespace detail

/// Layer-wise magnitude pruning: in every weight tensor of n entries, the
/// floor(alpha * n) entries of smallest |w| are dropped. Equal magnitudes
/// drop the lower flat index first.
inline PruneMask l1_mask(const ParameterSet& params, double alpha) {
  detail::check_alpha(alpha);
  PruneMask mask = PruneMask::all_kept(params);
  mask.alpha = alpha;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_prunable(params[i].name)) continue;
    auto w = params[i].tensor.values();
    const std::size_t drop = pruned_count(alpha, w.size());
    if (drop == 0) continue;
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::fabs(w[a]) < std::fabs(w[b]); });
    for (std::size_t k = 0; k < drop; ++k) mask.entries[i].keep[order[k]] = 0;
  }
  return mask;
}

/// Uniformly random pruning with the same per-tensor cardinality as l1_mask.
inline PruneMask random_mask(const ParameterSet& params, double alpha, Rng& rng) {
  detail::check_alpha(alpha);
  PruneMask mask = PruneMask::all_kept(params);
  mask.alpha = alpha;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_prunable(params[i].name)) continue;
    const std::size_t n = params[i].tensor.size();
    const std::size_t drop = pruned_count(alpha, n);
    if (drop == 0) continue;
    auto order = rng.permutation(n);
    for (std::size_t k = 0; k < drop; ++k) mask.entries[i].keep[order[k]] = 0;
  }
  return mask;
}

inline PruneMask make_mask(const ParameterSet& params, double alpha, PruneStrategy strategy, Rng* rng = nullptr) {
  if (strategy == PruneStrategy::l1) return l1_mask(params, alpha);
  if (rng == nullptr) throw InternalError("random pruning needs an rng");
  return random_mask(params, alpha, *rng);
}

/// Materializes the pruned model: dropped coordinates become exactly 0.
inline ParameterSet apply_mask(const ParameterSet& params, const PruneMask& mask) {
  if (!mask.aligns_with(params)) throw InternalError("apply_mask: mask does not align with parameters");
  ParameterSet out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto v = out[i].tensor.values();
    const auto& keep = mask.entries[i].keep;
    for (std::size_t j = 0; j < v.size(); ++j)
      if (!keep[j]) v[j] = 0.0;
  }
  return out;
}

/// Gradient of the loss given the full parameters and their pruned copy.
using PrunedGradFn = std::function<ParameterSet(const ParameterSet& full, const ParameterSet& pruned)>;

/// One prune -> update survivors -> recombine cycle. Survivors take a descent
/// step; pruned coordinates come back with their original values.
inline ParameterSet masked_update_cycle(const ParameterSet& params, double alpha, const PrunedGradFn& grad_fn,
                                        double lr) {
  const PruneMask mask = l1_mask(params, alpha);
  const ParameterSet pruned = apply_mask(params, mask);
  const ParameterSet grads = grad_fn(params, pruned);
  return sgd_step(params, grads, lr, mask);
}

}  // namespace sdcda
