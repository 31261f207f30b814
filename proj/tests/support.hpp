#pragma once

// Independent oracles shared by the unit tests and the acceptance binary:
// central finite differences and brute-force contrastive losses written with
// plain scalar loops (no library loss code).

#include <cmath>
#include <functional>
#include <vector>

#include "sdcda/network.hpp"
#include "sdcda/random.hpp"
#include "sdcda/tensor.hpp"

namespace sdcda::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradRelTol = 1e-4;
// Denominator floor of the relative error, so components near zero are
// compared at an absolute 1e-9 instead of amplifying round-off.
inline constexpr double kGradFloor = 1e-5;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline double relative_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), kGradFloor});
}

struct GradCheck {
  double worst = 0.0;       // largest relative error over checked coordinates
  std::size_t checked = 0;
  std::size_t kinks = 0;    // coordinates skipped because f is not differentiable there
  bool ok() const { return worst <= kGradRelTol && checked > 0; }
};

/// Compares `analytic` with central differences of `f` around `x`, one
/// coordinate at a time. A coordinate whose one-sided slopes disagree sits on
/// a kink (relu, max-pool switch) and is skipped.
inline GradCheck check_gradient(const std::function<double(const Tensor&)>& f, Tensor x, const Tensor& analytic,
                                GradCheck acc = {}) {
  const double f0 = f(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + kFdStep;
    const double fp = f(x);
    x[i] = orig - kFdStep;
    const double fm = f(x);
    x[i] = orig;
    const double fwd = (fp - f0) / kFdStep, bwd = (f0 - fm) / kFdStep;
    if (std::fabs(fwd - bwd) > 1e-3 * std::max({1.0, std::fabs(fwd), std::fabs(bwd)})) {
      ++acc.kinks;
      continue;
    }
    acc.worst = std::max(acc.worst, relative_error(analytic[i], (fp - fm) / (2.0 * kFdStep)));
    ++acc.checked;
  }
  return acc;
}

/// Checks every parameter tensor of a ParameterSet.
inline GradCheck check_param_gradients(const std::function<double(const ParameterSet&)>& f, const ParameterSet& params,
                                       const ParameterSet& analytic, GradCheck acc = {}) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto fk = [&](const Tensor& t) {
      ParameterSet p = params;
      p[k].tensor = t;
      return f(p);
    };
    acc = check_gradient(fk, params[k].tensor, analytic[k].tensor, acc);
  }
  return acc;
}

inline GradCheck merge(GradCheck a, const GradCheck& b) {
  a.worst = std::max(a.worst, b.worst);
  a.checked += b.checked;
  a.kinks += b.kinks;
  return a;
}

/// A random linear functional L = sum r_i y_i, so that dL/dy = r.
struct Probe {
  Tensor weights;
  double operator()(const Tensor& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
    return s;
  }
};

// Gradient of a random linear probe of the output with respect to the input
// and every parameter, in train mode with a frozen dropout draw.
inline GradCheck check_network(const NetworkSpec& net, Rng& rng, double input_scale) {
  const ParameterSet p = init_params(net, rng);
  ParameterSet params = p;
  for (auto& e : params)
    for (double& v : e.tensor.values()) v += 0.1 * rng.normal();  // nonzero biases too
  Shape in = net.input_shape;
  in.insert(in.begin(), 1 + rng.index(3));
  const Tensor x = random_tensor(in, rng, input_scale);
  const std::uint64_t drop_seed = rng.next();
  Shape out = output_shape(net);
  out.insert(out.begin(), in[0]);
  const Probe probe{random_tensor(out, rng)};

  auto run = [&](const ParameterSet& q, const Tensor& xi) {
    Rng dr(drop_seed);
    return forward(net, q, xi, Mode::train, &dr);
  };
  const auto f = run(params, x);
  const auto b = backward(net, params, f.cache, probe.weights);
  GradCheck chk = check_gradient([&](const Tensor& xi) { return probe(run(params, xi).output); }, x, b.input_grad);
  return check_param_gradients([&](const ParameterSet& q) { return probe(run(q, x).output); }, params, b.grads, chk);
}

/// Rows i where both a_i and b_i are nonzero, the pairs a contrastive loss can use.
inline std::vector<std::size_t> live_pairs(const Tensor& a, const Tensor& b) {
  std::vector<std::size_t> live;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    bool za = true, zb = true;
    for (double v : a.row(r)) za = za && v == 0.0;
    for (double v : b.row(r)) zb = zb && v == 0.0;
    if (!za && !zb) live.push_back(r);
  }
  return live;
}

// ---------------------------------------------------- brute-force losses

inline double bf_cos(std::span<const double> u, std::span<const double> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return uv / std::sqrt(uu * vv);
}

inline double bf_d(std::span<const double> u, std::span<const double> v, double tau) { return std::exp(bf_cos(u, v) / tau); }

/// NT-Xent anchored on `a`: mean_i -log(d(a_i, b_i) / (d(a_i, b_i) + sum over
/// negatives)), negatives = {a_k : k != i} and {b_k : k != i}.
inline double bf_nt_xent(const Tensor& a, const Tensor& b, double tau) {
  const std::size_t n = a.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = bf_d(a.row(i), b.row(i), tau);
    double neg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      neg += bf_d(a.row(i), a.row(k), tau);
      neg += bf_d(a.row(i), b.row(k), tau);
    }
    total += -std::log(pos / (pos + neg));
  }
  return total / static_cast<double>(n);
}

/// SupCon-DA with explicit positive set A(u) (other same-domain outputs) and
/// denominator set B(u) (every output except u).
inline double bf_supcon_da(const Tensor& s, const Tensor& t, double tau) {
  std::vector<std::span<const double>> all;
  std::vector<int> dom;
  for (std::size_t i = 0; i < s.rows(); ++i) all.push_back(s.row(i)), dom.push_back(0);
  for (std::size_t i = 0; i < t.rows(); ++i) all.push_back(t.row(i)), dom.push_back(1);
  double per_domain[2] = {0.0, 0.0};
  const double count[2] = {static_cast<double>(s.rows()), static_cast<double>(t.rows())};
  for (std::size_t a = 0; a < all.size(); ++a) {
    double denom = 0.0;
    for (std::size_t p = 0; p < all.size(); ++p)
      if (p != a) denom += bf_d(all[a], all[p], tau);
    double sum_log = 0.0;
    for (std::size_t q = 0; q < all.size(); ++q)
      if (q != a && dom[q] == dom[a]) sum_log += std::log(bf_d(all[a], all[q], tau) / denom);
    per_domain[dom[a]] += -sum_log / (count[dom[a]] - 1.0);
  }
  return per_domain[0] / count[0] + per_domain[1] / count[1];
}

}  // namespace sdcda::testing
