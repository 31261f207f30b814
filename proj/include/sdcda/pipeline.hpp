#pragma once

// Training loops: contrastive pre-training of the feature extractor with a
// pruned partner path, and boundary-aware adversarial adaptation. Plain
// SimCLR and DANN loops share the per-iteration machinery and serve as the
// reference points the pruned variants reduce to.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sdcda/container.hpp"
#include "sdcda/contrastive.hpp"
#include "sdcda/data.hpp"
#include "sdcda/error.hpp"
#include "sdcda/models.hpp"
#include "sdcda/network.hpp"
#include "sdcda/optimizer.hpp"
#include "sdcda/pruning.hpp"
#include "sdcda/random.hpp"

namespace sdcda {

// ------------------------------------------------------------ augmentation

enum class AugmentKind { gaussian_noise, random_mask };

inline std::string to_string(AugmentKind k) { return k == AugmentKind::random_mask ? "random-mask" : "gaussian-noise"; }

inline AugmentKind parse_augment_kind(std::string_view s) {
  if (s == "gaussian-noise") return AugmentKind::gaussian_noise;
  if (s == "random-mask") return AugmentKind::random_mask;
  throw ConfigError("unknown augmentation '" + std::string(s) + "'");
}

struct AugmentationSpec {
  AugmentKind kind = AugmentKind::gaussian_noise;
  double strength = 0.3;  // noise std, or masked fraction of each sample
};

/// One augmentation per sample. gaussian-noise adds strength * N(0, 1) to every
/// coordinate; random-mask zeroes round(strength * d) coordinates of each sample.
inline Tensor augment(const Tensor& batch, const AugmentationSpec& spec, Rng& rng) {
  if (!(spec.strength >= 0.0) || !std::isfinite(spec.strength)) throw ConfigError("augmentation strength must be >= 0");
  Tensor out = batch;
  if (spec.strength == 0.0) return out;
  if (spec.kind == AugmentKind::gaussian_noise) {
    for (double& v : out.values()) v += spec.strength * rng.normal();
    return out;
  }
  if (spec.strength > 1.0) throw ConfigError("random-mask strength must lie in [0,1]");
  const std::size_t d = out.row_size();
  const auto zeroed = static_cast<std::size_t>(std::floor(spec.strength * static_cast<double>(d) + 0.5));
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto perm = rng.permutation(d);
    auto row = out.row(r);
    for (std::size_t k = 0; k < zeroed; ++k) row[perm[k]] = 0.0;
  }
  return out;
}

// ----------------------------------------------------------------- configs

struct IaClrConfig {
  double alpha_g = 0.25;
  double temperature = 0.5;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AugmentationSpec augmentation;
  std::uint64_t seed = 0;
  std::size_t mask_cadence = 1;  // iterations between mask recomputations
  PruneStrategy strategy = PruneStrategy::l1;
  std::size_t bottleneck_window = 50;
};

struct BaAdaConfig {
  double lambda_c = 1.0;
  double lambda_d = 1.0;
  double lambda_bd = 1e-7;
  double alpha_d = 0.4;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double temperature = 0.5;
  bool normalize_adversarial = false;  // divide each sum of L_d by its batch size
  double bd_ceiling = 1e6;             // L_bd^p above this aborts the run
  std::size_t mask_cadence = 1;
  PruneStrategy strategy = PruneStrategy::l1;
  std::uint64_t seed = 0;
};

inline void validate(const IaClrConfig& c) {
  if (!(c.alpha_g >= 0.0 && c.alpha_g < 1.0)) throw ConfigError("alpha_g must lie in [0,1)");
  if (!(c.temperature > 0.0)) throw ConfigError("iaclr temperature must be positive");
  if (!(c.lr > 0.0)) throw ConfigError("iaclr learning rate must be positive");
  if (c.batch_size == 0) throw ConfigError("iaclr batch_size must be positive");
  if (c.mask_cadence == 0) throw ConfigError("mask_cadence must be positive");
  if (c.bottleneck_window == 0) throw ConfigError("bottleneck_window must be positive");
}

inline void validate(const BaAdaConfig& c) {
  if (!(c.alpha_d >= 0.0 && c.alpha_d < 1.0)) throw ConfigError("alpha_d must lie in [0,1)");
  if (!(c.lambda_c >= 0.0 && c.lambda_d >= 0.0 && c.lambda_bd >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(c.lr > 0.0)) throw ConfigError("baada learning rate must be positive");
  if (!(c.temperature > 0.0)) throw ConfigError("baada temperature must be positive");
  if (c.batch_size < 2) throw ConfigError("baada batch_size must be at least 2");
  if (c.mask_cadence == 0) throw ConfigError("mask_cadence must be positive");
  if (!(c.bd_ceiling > 0.0)) throw ConfigError("bd_ceiling must be positive");
}

/// Recommended-range advisories; they never change the run.
inline std::vector<std::string> warnings(const IaClrConfig& c) {
  std::vector<std::string> w;
  if (c.alpha_g < 0.1 || c.alpha_g > 0.3)
    w.push_back("alpha_g=" + std::to_string(c.alpha_g) + " outside recommended band 0.1-0.3");
  return w;
}

inline std::vector<std::string> warnings(const BaAdaConfig& c) {
  std::vector<std::string> w;
  if (c.lambda_c < c.lambda_d) w.push_back("lambda_c < lambda_d; recommended lambda_c > lambda_d");
  if (c.lambda_bd >= c.lambda_d) w.push_back("lambda_bd >= lambda_d; recommended lambda_bd < lambda_d");
  if (c.alpha_d < 0.3 || c.alpha_d > 0.5)
    w.push_back("alpha_d=" + std::to_string(c.alpha_d) + " outside recommended band 0.3-0.5");
  return w;
}

// -------------------------------------------------------------- train state

namespace trace {
inline constexpr const char* pnt_xent = "pnt_xent";
inline constexpr const char* classification = "classification";
inline constexpr const char* adversarial = "adversarial";
inline constexpr const char* boundary = "boundary";
}  // namespace trace

struct TrainState {
  std::size_t iteration = 0;
  std::map<std::string, std::vector<double>> traces;
  std::vector<std::string> warnings;
  std::string rng_state;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// Divergence raised from inside a training loop, with the trace so far.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainState state) : DivergenceError(what), state_(std::move(state)) {}
  const TrainState& state() const { return state_; }

 private:
  TrainState state_;
};

namespace detail {

// Cyclic shuffled index stream; reshuffles when fewer than `batch` indices remain.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch) : n_(n), batch_(batch) {}

  std::vector<std::size_t> next(Rng& rng) {
    if (pos_ + batch_ > order_.size()) {
      order_ = rng.permutation(n_);
      pos_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
    pos_ += batch_;
    return out;
  }

 private:
  std::size_t n_, batch_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline void check_finite(double value, const char* what, std::size_t iteration, const TrainState& state) {
  if (!std::isfinite(value)) {
    throw TrainingDiverged(std::string(what) + " became non-finite at iteration " + std::to_string(iteration), state);
  }
}

inline void flag_bottleneck(TrainState& state, const std::vector<double>& trace, std::size_t window) {
  const std::size_t n = trace.size();
  if (n < 2 * window || n % window != 0) return;
  double prev = 0.0, last = 0.0;
  for (std::size_t i = n - 2 * window; i < n - window; ++i) prev += trace[i];
  for (std::size_t i = n - window; i < n; ++i) last += trace[i];
  if (last >= prev) {
    state.warnings.push_back("bottleneck: pnt_xent did not decrease over iterations " + std::to_string(n - window) + "-" +
                             std::to_string(n - 1));
  }
}

// Gradients of the two-view contrastive loss. `partner_params` feeds the
// augmented view; extractor gradients of both paths are summed.
struct TwoViewStep {
  double loss = 0.0;
  ParameterSet g_grads;
  ParameterSet p_grads;
  std::size_t dropped = 0;  // pairs left out because a projection was exactly zero
};

inline bool zero_row(const Tensor& t, std::size_t r) {
  for (double v : t.row(r))
    if (v != 0.0) return false;
  return true;
}

// PNT-Xent over the pairs whose projections are both nonzero. A dead
// projection (every ReLU of the head off, zero bias) has no cosine, so its
// pair is left out and receives zero gradient. A batch with no live pair
// contributes loss 0.
inline PairLoss live_pair_loss(const Tensor& a, const Tensor& b, const ContrastiveConfig& cc, std::size_t& dropped) {
  std::vector<std::size_t> live;
  for (std::size_t r = 0; r < a.rows(); ++r)
    if (!zero_row(a, r) && !zero_row(b, r)) live.push_back(r);
  dropped = a.rows() - live.size();
  if (dropped == 0) return pnt_xent_with_grad(a, b, cc);
  if (live.empty()) return {0.0, Tensor(a.shape()), Tensor(b.shape())};  // nothing to contrast this batch
  PairLoss sub = pnt_xent_with_grad(a.gather_rows(live), b.gather_rows(live), cc);
  PairLoss out{sub.value, Tensor(a.shape()), Tensor(b.shape())};
  for (std::size_t i = 0; i < live.size(); ++i) {
    std::copy(sub.d_first.row(i).begin(), sub.d_first.row(i).end(), out.d_first.row(live[i]).begin());
    std::copy(sub.d_second.row(i).begin(), sub.d_second.row(i).end(), out.d_second.row(live[i]).begin());
  }
  return out;
}

inline TwoViewStep two_view_grads(const Model& g, const ParameterSet& partner_params, const Model& p, const Tensor& x,
                                  const Tensor& x_aug, const ContrastiveConfig& cc, Rng& rng) {
  auto fa = forward(g.net, g.params, x, Mode::train, &rng);
  auto fb = forward(g.net, partner_params, x_aug, Mode::train, &rng);
  auto pa = forward(p.net, p.params, fa.output, Mode::train, &rng);
  auto pb = forward(p.net, p.params, fb.output, Mode::train, &rng);
  std::size_t dropped = 0;
  auto loss = live_pair_loss(pa.output, pb.output, cc, dropped);
  auto bpa = backward(p.net, p.params, pa.cache, loss.d_first);
  auto bpb = backward(p.net, p.params, pb.cache, loss.d_second);
  auto bga = backward(g.net, g.params, fa.cache, bpa.input_grad);
  auto bgb = backward(g.net, partner_params, fb.cache, bpb.input_grad);
  bpa.grads += bpb.grads;
  bga.grads += bgb.grads;
  return {loss.value, std::move(bga.grads), std::move(bpa.grads), dropped};
}

inline Tensor pretrain_pool(const UnlabeledDataset& source, const UnlabeledDataset& target) {
  if (source.features.empty() || target.features.empty()) throw ConfigError("pre-training needs source and target samples");
  if (source.features.row_size() != target.features.row_size() ||
      !std::equal(source.features.shape().begin() + 1, source.features.shape().end(), target.features.shape().begin() + 1,
                  target.features.shape().end())) {
    throw ConfigError("source and target feature shapes differ");
  }
  return concat_rows(source.features, target.features);
}

}  // namespace detail

struct PretrainResult {
  ParameterSet g;  // theta_g
  ParameterSet p;  // theta_h (projection head)
  TrainState state;
};

/// Contrastive pre-training with a pruned partner path. Per iteration: recompute
/// the L1 mask of G (every `mask_cadence` iterations), encode x with G and the
/// augmented x with G^p, take PNT-Xent, descend the projection head fully and
/// only the surviving extractor coordinates, then recombine.
inline PretrainResult iaclr_pretrain(const UnlabeledDataset& source, const UnlabeledDataset& target, const Model& g,
                                     const Model& p, const IaClrConfig& cfg) {
  validate(cfg);
  const Tensor pool = detail::pretrain_pool(source, target);
  if (pool.rows() < cfg.batch_size) throw ConfigError("iaclr batch_size exceeds the pooled sample count");
  const ContrastiveConfig cc{cfg.temperature};
  Rng rng(derive_seed(cfg.seed, "iaclr"));
  Rng prune_rng(derive_seed(cfg.seed, "iaclr.prune"));
  Model gm = g, pm = p;
  TrainState state;
  state.warnings = warnings(cfg);
  auto& trace = state.traces[trace::pnt_xent];
  const std::size_t per_epoch = pool.rows() / cfg.batch_size;
  PruneMask mask;
  std::size_t dropped = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(pool.rows());
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      const Tensor x = pool.gather_rows(idx);
      const Tensor x_aug = augment(x, cfg.augmentation, rng);
      if (state.iteration % cfg.mask_cadence == 0) mask = make_mask(gm.params, cfg.alpha_g, cfg.strategy, &prune_rng);
      const ParameterSet pruned = apply_mask(gm.params, mask);
      auto step = detail::two_view_grads(gm, pruned, pm, x, x_aug, cc, rng);
      dropped += step.dropped;
      detail::check_finite(step.loss, "pnt_xent", state.iteration, state);
      pm.params = sgd_step(pm.params, step.p_grads, cfg.lr);
      gm.params = sgd_step(gm.params, step.g_grads, cfg.lr, mask);
      trace.push_back(step.loss);
      ++state.iteration;
      detail::flag_bottleneck(state, trace, cfg.bottleneck_window);
    }
  }
  if (dropped > 0) {
    state.warnings.push_back("degenerate: " + std::to_string(dropped) + " pairs with an all-zero projection left out of pnt_xent");
  }
  state.rng_state = rng.state();
  return {std::move(gm.params), std::move(pm.params), std::move(state)};
}

/// Plain SimCLR pre-training: both views through the same unpruned G.
inline PretrainResult simclr_pretrain(const UnlabeledDataset& source, const UnlabeledDataset& target, const Model& g,
                                      const Model& p, const IaClrConfig& cfg) {
  validate(cfg);
  const Tensor pool = detail::pretrain_pool(source, target);
  if (pool.rows() < cfg.batch_size) throw ConfigError("batch_size exceeds the pooled sample count");
  const ContrastiveConfig cc{cfg.temperature};
  Rng rng(derive_seed(cfg.seed, "iaclr"));
  Model gm = g, pm = p;
  TrainState state;
  state.warnings = warnings(cfg);
  auto& trace = state.traces[trace::pnt_xent];
  const std::size_t per_epoch = pool.rows() / cfg.batch_size;
  std::size_t dropped = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(pool.rows());
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size, cfg.batch_size);
      const Tensor x = pool.gather_rows(idx);
      const Tensor x_aug = augment(x, cfg.augmentation, rng);
      auto step = detail::two_view_grads(gm, gm.params, pm, x, x_aug, cc, rng);
      dropped += step.dropped;
      detail::check_finite(step.loss, "nt_xent", state.iteration, state);
      pm.params = sgd_step(pm.params, step.p_grads, cfg.lr);
      gm.params = sgd_step(gm.params, step.g_grads, cfg.lr);
      trace.push_back(step.loss);
      ++state.iteration;
      detail::flag_bottleneck(state, trace, cfg.bottleneck_window);
    }
  }
  if (dropped > 0) {
    state.warnings.push_back("degenerate: " + std::to_string(dropped) + " pairs with an all-zero projection left out of pnt_xent");
  }
  state.rng_state = rng.state();
  return {std::move(gm.params), std::move(pm.params), std::move(state)};
}

// ----------------------------------------------------------- adaptation

/// Parameters updated during adaptation.
struct AdaptModels {
  Model g;
  Model c;
  Model d;
};

struct StepLosses {
  double classification = 0.0;
  double adversarial = 0.0;
};

/// Joint supervised + adversarial update, all gradients taken at the current
/// parameters:
///   g <- g - lambda_c w dL_c/dg + lambda_d w dL_d/dg   (G ascends L_d)
///   d <- d - lambda_d w dL_d/dd
///   c <- c - lambda_c w dL_c/dc
inline StepLosses adversarial_step(AdaptModels& m, const Tensor& xs, std::span<const int> ys, const Tensor& xt,
                                   const BaAdaConfig& cfg, Rng& rng) {
  auto fs = forward(m.g.net, m.g.params, xs, Mode::train, &rng);
  auto ft = forward(m.g.net, m.g.params, xt, Mode::train, &rng);
  auto cs = forward(m.c.net, m.c.params, fs.output, Mode::train, &rng);
  auto ds = forward(m.d.net, m.d.params, fs.output, Mode::train, &rng);
  auto dt = forward(m.d.net, m.d.params, ft.output, Mode::train, &rng);
  const LossGrad lc = classification_loss(cs.output, ys);
  const AdversarialLoss ld = adversarial_loss(ds.output, dt.output, cfg.normalize_adversarial);

  auto bc = backward(m.c.net, m.c.params, cs.cache, lc.grad);
  auto bds = backward(m.d.net, m.d.params, ds.cache, ld.d_source);
  auto bdt = backward(m.d.net, m.d.params, dt.cache, ld.d_target);

  // Upstream into G: lambda_c dL_c/df - lambda_d dL_d/df, so that one descent
  // step with rate w realizes the mixed descent/ascent rule above.
  Tensor up_s = bc.input_grad;
  for (std::size_t i = 0; i < up_s.size(); ++i) up_s[i] = cfg.lambda_c * up_s[i] - cfg.lambda_d * bds.input_grad[i];
  Tensor up_t = bdt.input_grad;
  for (double& v : up_t.values()) v = -cfg.lambda_d * v;
  auto bgs = backward(m.g.net, m.g.params, fs.cache, up_s);
  auto bgt = backward(m.g.net, m.g.params, ft.cache, up_t);
  bgs.grads += bgt.grads;
  bds.grads += bdt.grads;

  m.g.params = sgd_step(m.g.params, bgs.grads, cfg.lr);
  m.d.params = sgd_step(m.d.params, bds.grads, cfg.lambda_d * cfg.lr);
  m.c.params = sgd_step(m.c.params, bc.grads, cfg.lambda_c * cfg.lr);
  return {lc.value, ld.value};
}

namespace detail {

inline Tensor frozen_features(const Model& g, const Tensor& x) { return forward(g.net, g.params, x, Mode::eval).output; }

// SupCon-DA gradient of the discriminator's hidden representation, evaluated
// with parameters `d_params`, for frozen features.
inline std::pair<double, ParameterSet> boundary_grads(const Model& d, const ParameterSet& d_params, const Tensor& fs,
                                                      const Tensor& ft, const ContrastiveConfig& cc) {
  auto ds = forward(d.net, d_params, fs, Mode::train);
  auto dt = forward(d.net, d_params, ft, Mode::train);
  PairLoss loss;
  try {
    loss = psupcon_da_with_grad(ds.cache.activations[kDiscriminatorTap], dt.cache.activations[kDiscriminatorTap], cc);
  } catch (const DomainError& e) {
    throw DivergenceError(std::string("discriminator representation degenerate: ") + e.what());
  }
  const TapGrad tap_s{kDiscriminatorTap, loss.d_first};
  const TapGrad tap_t{kDiscriminatorTap, loss.d_second};
  auto bs = backward(d.net, d_params, ds.cache, Tensor(ds.output.shape()), std::span(&tap_s, 1));
  auto bt = backward(d.net, d_params, dt.cache, Tensor(dt.output.shape()), std::span(&tap_t, 1));
  bs.grads += bt.grads;
  return {loss.value, std::move(bs.grads)};
}

}  // namespace detail

/// Boundary-aware step with G and C frozen: prune D at alpha_d, take
/// PSupCon-DA over the pruned discriminator's hidden outputs for both domains,
/// descend D's surviving coordinates at rate lambda_bd * w, recombine.
inline double boundary_step(AdaptModels& m, const Tensor& xs, const Tensor& xt, const BaAdaConfig& cfg,
                            Rng& prune_rng, const PruneMask* reuse_mask = nullptr, PruneMask* mask_out = nullptr) {
  const Tensor fs = detail::frozen_features(m.g, xs);
  const Tensor ft = detail::frozen_features(m.g, xt);
  const PruneMask mask = reuse_mask ? *reuse_mask : make_mask(m.d.params, cfg.alpha_d, cfg.strategy, &prune_rng);
  const ParameterSet pruned = apply_mask(m.d.params, mask);
  auto [value, grads] = detail::boundary_grads(m.d, pruned, fs, ft, ContrastiveConfig{cfg.temperature});
  if (!std::isfinite(value) || value > cfg.bd_ceiling) {
    throw DivergenceError("boundary loss " + std::to_string(value) + " is non-finite or above ceiling " +
                          std::to_string(cfg.bd_ceiling));
  }
  m.d.params = sgd_step(m.d.params, grads, cfg.lambda_bd * cfg.lr, mask);
  if (mask_out) *mask_out = mask;
  return value;
}

/// Unpruned SupCon-DA fine-tuning of D (the alpha_d = 0 reference).
inline double supcon_finetune_step(AdaptModels& m, const Tensor& xs, const Tensor& xt, const BaAdaConfig& cfg) {
  const Tensor fs = detail::frozen_features(m.g, xs);
  const Tensor ft = detail::frozen_features(m.g, xt);
  auto [value, grads] = detail::boundary_grads(m.d, m.d.params, fs, ft, ContrastiveConfig{cfg.temperature});
  m.d.params = sgd_step(m.d.params, grads, cfg.lambda_bd * cfg.lr);
  return value;
}

struct AdaptResult {
  ParameterSet g;
  ParameterSet c;
  ParameterSet d;
  TrainState state;
};

namespace detail {

inline AdaptResult adapt_loop(const DomainDataset& source, const UnlabeledDataset& target, const AdaptModels& init,
                              const BaAdaConfig& cfg, bool boundary) {
  validate(cfg);
  if (!source.labels) throw ConfigError("adaptation needs labeled source data");
  if (source.size() < cfg.batch_size || target.size() < cfg.batch_size)
    throw ConfigError("each domain needs at least batch_size samples");
  Rng rng(derive_seed(cfg.seed, "baada"));
  Rng prune_rng(derive_seed(cfg.seed, "baada.prune"));
  AdaptModels m = init;
  TrainState state;
  state.warnings = warnings(cfg);
  auto& tc = state.traces[trace::classification];
  auto& td = state.traces[trace::adversarial];
  auto* tb = boundary ? &state.traces[trace::boundary] : nullptr;
  BatchStream src_stream(source.size(), cfg.batch_size);
  BatchStream tgt_stream(target.size(), cfg.batch_size);
  const std::size_t per_epoch = std::max(source.size(), target.size()) / cfg.batch_size;
  std::vector<int> ys(cfg.batch_size);
  PruneMask mask;
  for (std::size_t it = 0; it < cfg.epochs * per_epoch; ++it) {
    const auto si = src_stream.next(rng);
    const auto ti = tgt_stream.next(rng);
    const Tensor xs = source.features.gather_rows(si);
    const Tensor xt = target.features.gather_rows(ti);
    for (std::size_t i = 0; i < si.size(); ++i) ys[i] = (*source.labels)[si[i]];
    try {
      const auto losses = adversarial_step(m, xs, ys, xt, cfg, rng);
      check_finite(losses.classification, "classification loss", it, state);
      check_finite(losses.adversarial, "adversarial loss", it, state);
      tc.push_back(losses.classification);
      td.push_back(losses.adversarial);
      if (boundary) {
        const bool fresh = it % cfg.mask_cadence == 0;
        tb->push_back(boundary_step(m, xs, xt, cfg, prune_rng, fresh ? nullptr : &mask, fresh ? &mask : nullptr));
      }
    } catch (const TrainingDiverged&) {
      throw;
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(std::string(e.what()) + " (iteration " + std::to_string(it) + ")", state);
    }
    ++state.iteration;
  }
  state.rng_state = rng.state();
  return {std::move(m.g.params), std::move(m.c.params), std::move(m.d.params), std::move(state)};
}

}  // namespace detail

/// Boundary-aware adversarial adaptation: per iteration one joint
/// supervised/adversarial step followed by one pruned boundary step on D.
inline AdaptResult baada_train(const DomainDataset& source, const UnlabeledDataset& target, const AdaptModels& init,
                               const BaAdaConfig& cfg) {
  return detail::adapt_loop(source, target, init, cfg, true);
}

/// Plain domain-adversarial training (no boundary step).
inline AdaptResult dann_train(const DomainDataset& source, const UnlabeledDataset& target, const AdaptModels& init,
                              const BaAdaConfig& cfg) {
  return detail::adapt_loop(source, target, init, cfg, false);
}

// ------------------------------------------------------------- end to end

/// Which components run on top of the DANN baseline.
struct Variant {
  bool pretrain = true;  // Ia-CLR
  bool boundary = true;  // Ba-ADA boundary step

  std::string name() const {
    if (pretrain && boundary) return "Sd-CDA";
    if (pretrain) return "DANN+Ia-CLR";
    if (boundary) return "DANN+Ba-ADA";
    return "DANN";
  }
  friend bool operator==(const Variant&, const Variant&) = default;
};

struct SdcdaResult {
  ModelSet models;
  TrainState pretrain_state;
  TrainState adapt_state;
};

/// Pre-training followed by adaptation, starting from `init`.
inline SdcdaResult sdcda_train(const DomainDataset& source, const UnlabeledDataset& target, const ModelSet& init,
                               const IaClrConfig& iaclr, const BaAdaConfig& baada, Variant variant = {}) {
  validate(iaclr);
  validate(baada);
  SdcdaResult r{init, {}, {}};
  if (variant.pretrain) {
    auto pre = iaclr_pretrain(unlabeled_view(source), target, init.g, init.p, iaclr);
    r.models.g.params = std::move(pre.g);
    r.models.p.params = std::move(pre.p);
    r.pretrain_state = std::move(pre.state);
  }
  const AdaptModels am{r.models.g, r.models.c, r.models.d};
  auto adapted = variant.boundary ? baada_train(source, target, am, baada) : dann_train(source, target, am, baada);
  r.models.g.params = std::move(adapted.g);
  r.models.c.params = std::move(adapted.c);
  r.models.d.params = std::move(adapted.d);
  r.adapt_state = std::move(adapted.state);
  return r;
}

// ------------------------------------------------------------ checkpoints

inline Container model_container(const Model& m) {
  Container c;
  c.spec_digest = spec_digest(m.net);
  c.attributes["kind"] = "model";
  c.attributes["network"] = describe(m.net);
  c.tensors = m.params;
  return c;
}

/// Loads parameters into `m`, checking that the checkpoint was written for the same network.
inline void load_model_params(const std::filesystem::path& path, Model& m) {
  const Container c = read_container(path);
  if (c.spec_digest != spec_digest(m.net)) {
    throw IngestionError(path.string() + ": checkpoint network '" +
                         (c.attributes.count("network") ? c.attributes.at("network") : std::string("?")) +
                         "' does not match '" + describe(m.net) + "'");
  }
  m.params = c.tensors;
}

inline void save_model(const std::filesystem::path& path, const Model& m) { write_container(path, model_container(m)); }

/// TrainState as a container (traces) plus a key=value manifest (iteration,
/// rng state, config digest, warnings).
inline void save_train_state(const std::filesystem::path& dir, const std::string& stem, const TrainState& s,
                             std::uint64_t config_digest) {
  Container c;
  c.spec_digest = config_digest;
  c.attributes["kind"] = "train-state";
  for (const auto& [name, values] : s.traces) {
    if (values.empty()) {
      c.attributes["empty-trace." + name] = "1";
    } else {
      c.tensors.add(name, Tensor({values.size()}, values));
    }
  }
  write_container(dir / (stem + ".state"), c);
  std::ostringstream m;
  m << "iteration=" << s.iteration << "\n";
  m << "config_digest=" << hex_digest(config_digest) << "\n";
  std::string rng = s.rng_state;
  m << "rng_state=" << rng << "\n";
  for (const auto& w : s.warnings) m << "warning=" << w << "\n";
  write_file_atomic(dir / (stem + ".manifest"), m.str());
}

inline TrainState load_train_state(const std::filesystem::path& dir, const std::string& stem) {
  TrainState s;
  const Container c = read_container(dir / (stem + ".state"));
  for (const auto& e : c.tensors) s.traces[e.name] = std::vector<double>(e.tensor.values().begin(), e.tensor.values().end());
  for (const auto& [k, v] : c.attributes)
    if (k.rfind("empty-trace.", 0) == 0) s.traces[k.substr(12)] = {};
  std::istringstream in(read_file(dir / (stem + ".manifest")));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "iteration") s.iteration = std::stoull(val);
    else if (key == "rng_state") s.rng_state = val;
    else if (key == "warning") s.warnings.push_back(val);
  }
  return s;
}

}  // namespace sdcda
