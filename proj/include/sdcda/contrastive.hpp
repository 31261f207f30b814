#pragma once

// Contrastive objectives over batches of vectors (one vector per row):
//   nt_xent     SimCLR loss anchored on the first view
//   pnt_xent    same form with the partner view produced by a pruned encoder
//   supcon_da   supervised contrastive loss with domain identity as label
//   psupcon_da  supcon_da over pruned-discriminator outputs
// All entry points L2-normalize their inputs, so d(u, v) = exp(cos(u, v) / tau).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sdcda/error.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda {

struct ContrastiveConfig {
  double temperature = 0.5;
};

namespace detail {

inline void check_temperature(const ContrastiveConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature))
    throw ConfigError("temperature must be positive and finite");
}

inline double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

struct Normalized {
  Tensor unit;               // rows scaled to norm 1
  std::vector<double> norms; // original row norms
};

inline Normalized normalize_rows(const Tensor& raw) {
  if (raw.rank() != 2) throw DomainError("contrastive input must be a [n, dim] matrix, got " + shape_string(raw.shape()));
  Normalized out{raw, std::vector<double>(raw.rows())};
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const double n = norm(raw.row(r));
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("zero or non-finite vector at row " + std::to_string(r));
    out.norms[r] = n;
    for (double& v : out.unit.row(r)) v /= n;
  }
  return out;
}

// dL/d(raw) from dL/d(unit) through u / ||u||.
inline Tensor normalize_backward(const Normalized& nz, const Tensor& d_unit) {
  Tensor d_raw(d_unit.shape());
  const std::size_t dim = d_unit.row_size();
  for (std::size_t r = 0; r < d_unit.rows(); ++r) {
    auto z = nz.unit.row(r);
    auto g = d_unit.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dot += z[j] * g[j];
    auto out = d_raw.row(r);
    for (std::size_t j = 0; j < dim; ++j) out[j] = (g[j] - z[j] * dot) / nz.norms[r];
  }
  return d_raw;
}

struct Anchor {
  std::size_t index;
  std::vector<std::size_t> positives;
  double weight;
};

// Sum over anchors of weight * sum_{q in positives} -log(exp(s_aq) / sum_{p != a} exp(s_ap))
// with s = z_a . z_p / tau. Returns value and dL/dz.
inline std::pair<double, Tensor> contrastive_kernel(const Tensor& z, std::span<const Anchor> anchors, double tau) {
  const std::size_t m = z.rows();
  const std::size_t dim = z.row_size();
  std::vector<double> sim(m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      double dot = 0.0;
      auto za = z.row(a);
      auto zb = z.row(b);
      for (std::size_t j = 0; j < dim; ++j) dot += za[j] * zb[j];
      sim[a * m + b] = sim[b * m + a] = dot / tau;
    }

  // Anchors sharing a weight are summed first and scaled once, so symmetric
  // batches (all terms equal) reproduce closed forms bitwise.
  double loss = 0.0, group_sum = 0.0, group_weight = 0.0;
  Tensor dz(z.shape());
  std::vector<double> ds(m);
  for (const Anchor& an : anchors) {
    const std::size_t a = an.index;
    const double* s = sim.data() + a * m;
    double mx = -INFINITY;
    for (std::size_t p = 0; p < m; ++p)
      if (p != a) mx = std::max(mx, s[p]);
    double total = 0.0;
    for (std::size_t p = 0; p < m; ++p)
      if (p != a) total += std::exp(s[p] - mx);
    const double log_total = std::log(total);
    const double lse = mx + log_total;

    if (an.weight != group_weight) {
      loss += group_weight * group_sum;
      group_weight = an.weight;
      group_sum = 0.0;
    }
    std::fill(ds.begin(), ds.end(), 0.0);
    const double count = static_cast<double>(an.positives.size());
    for (std::size_t q : an.positives) {
      group_sum += (mx - s[q]) + log_total;
      ds[q] -= an.weight;
    }
    for (std::size_t p = 0; p < m; ++p)
      if (p != a) ds[p] += an.weight * count * std::exp(s[p] - lse);

    auto za = z.row(a);
    auto dza = dz.row(a);
    for (std::size_t p = 0; p < m; ++p) {
      if (ds[p] == 0.0) continue;
      const double c = ds[p] / tau;
      auto zp = z.row(p);
      auto dzp = dz.row(p);
      for (std::size_t j = 0; j < dim; ++j) {
        dza[j] += c * zp[j];
        dzp[j] += c * za[j];
      }
    }
  }
  loss += group_weight * group_sum;
  return {loss, std::move(dz)};
}

inline Tensor top_rows(const Tensor& t, std::size_t begin, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return t.gather_rows(idx);
}

}  // namespace detail

/// d(u, v) = exp(cos(u, v) / tau).
inline double similarity_d(std::span<const double> u, std::span<const double> v, const ContrastiveConfig& cfg) {
  detail::check_temperature(cfg);
  if (u.size() != v.size()) throw DomainError("similarity_d: dimension mismatch");
  const double nu = detail::norm(u), nv = detail::norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("similarity_d: zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  const double cos = std::clamp(dot / (nu * nv), -1.0, 1.0);
  return std::exp(cos / cfg.temperature);
}

/// Loss value plus gradients with respect to the two raw input batches.
struct PairLoss {
  double value = 0.0;
  Tensor d_first;
  Tensor d_second;
};

/// NT-Xent anchored on `anchors`: for anchor i the positive is partners[i] and
/// the negatives are the other 2(N-1) vectors of both batches.
inline PairLoss nt_xent_with_grad(const Tensor& anchors, const Tensor& partners, const ContrastiveConfig& cfg) {
  detail::check_temperature(cfg);
  if (anchors.rank() != 2 || anchors.rows() == 0) throw DomainError("nt_xent: empty batch");
  if (anchors.shape() != partners.shape()) throw DomainError("nt_xent: anchors and partners differ in shape");
  const std::size_t n = anchors.rows();
  const auto nz = detail::normalize_rows(concat_rows(anchors, partners));
  std::vector<detail::Anchor> list;
  list.reserve(n);
  for (std::size_t i = 0; i < n; ++i) list.push_back({i, {n + i}, 1.0 / static_cast<double>(n)});
  auto [value, dz] = detail::contrastive_kernel(nz.unit, list, cfg.temperature);
  const Tensor d_raw = detail::normalize_backward(nz, dz);
  return {value, detail::top_rows(d_raw, 0, n), detail::top_rows(d_raw, n, n)};
}

inline double nt_xent(const Tensor& anchors, const Tensor& partners, const ContrastiveConfig& cfg) {
  return nt_xent_with_grad(anchors, partners, cfg).value;
}

/// PNT-Xent: anchors are the unpruned projections v_i, partners the pruned
/// projections of the augmented inputs. Negatives are every other projection
/// from both paths.
inline PairLoss pnt_xent_with_grad(const Tensor& unpruned, const Tensor& pruned_partners, const ContrastiveConfig& cfg) {
  if (unpruned.shape() != pruned_partners.shape()) throw DomainError("pnt_xent: length mismatch between paths");
  return nt_xent_with_grad(unpruned, pruned_partners, cfg);
}

inline double pnt_xent(const Tensor& unpruned, const Tensor& pruned_partners, const ContrastiveConfig& cfg) {
  return pnt_xent_with_grad(unpruned, pruned_partners, cfg).value;
}

/// SupCon-DA: every same-domain output is a positive, every other output
/// belongs to the denominator. Per-sample terms carry a leading minus so that
/// minimizing pulls same-domain outputs together.
inline PairLoss supcon_da_with_grad(const Tensor& source, const Tensor& target, const ContrastiveConfig& cfg) {
  detail::check_temperature(cfg);
  if (source.rank() != 2 || target.rank() != 2 || source.rows() < 2 || target.rows() < 2) {
    throw DomainError("supcon_da: each domain needs at least 2 outputs");
  }
  if (source.row_size() != target.row_size()) throw DomainError("supcon_da: output dimensions differ");
  const std::size_t ns = source.rows(), nt = target.rows();
  const auto nz = detail::normalize_rows(concat_rows(source, target));
  std::vector<detail::Anchor> list;
  list.reserve(ns + nt);
  auto add_domain = [&](std::size_t begin, std::size_t count) {
    const double w = 1.0 / (static_cast<double>(count) * static_cast<double>(count - 1));
    for (std::size_t i = 0; i < count; ++i) {
      detail::Anchor an{begin + i, {}, w};
      for (std::size_t j = 0; j < count; ++j)
        if (j != i) an.positives.push_back(begin + j);
      list.push_back(std::move(an));
    }
  };
  add_domain(0, ns);
  add_domain(ns, nt);
  auto [value, dz] = detail::contrastive_kernel(nz.unit, list, cfg.temperature);
  const Tensor d_raw = detail::normalize_backward(nz, dz);
  return {value, detail::top_rows(d_raw, 0, ns), detail::top_rows(d_raw, ns, nt)};
}

inline double supcon_da(const Tensor& source, const Tensor& target, const ContrastiveConfig& cfg) {
  return supcon_da_with_grad(source, target, cfg).value;
}

/// PSupCon-DA: supcon_da over outputs of the pruned discriminator.
inline PairLoss psupcon_da_with_grad(const Tensor& pruned_source, const Tensor& pruned_target,
                                     const ContrastiveConfig& cfg) {
  return supcon_da_with_grad(pruned_source, pruned_target, cfg);
}

inline double psupcon_da(const Tensor& pruned_source, const Tensor& pruned_target, const ContrastiveConfig& cfg) {
  return psupcon_da_with_grad(pruned_source, pruned_target, cfg).value;
}

}  // namespace sdcda
