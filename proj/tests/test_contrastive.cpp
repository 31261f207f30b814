#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sdcda/contrastive.hpp"
#include "support.hpp"

namespace sdcda {
namespace {

using testing::bf_nt_xent;
using testing::bf_supcon_da;
using testing::random_tensor;

constexpr double kOracleTol = 1e-10;

Tensor rows(std::size_t n, std::size_t d, std::vector<double> v) { return Tensor({n, d}, std::move(v)); }

TEST(Similarity, HandValues) {
  const std::vector<double> u{1, 0}, v{0, 1}, w{-1, 0};
  EXPECT_NEAR(similarity_d(u, u, {0.5}), std::exp(2.0), 1e-14);
  EXPECT_NEAR(similarity_d(u, u, {0.5}), 7.38906, 1e-5);
  EXPECT_EQ(similarity_d(u, v, {0.5}), 1.0);
  EXPECT_NEAR(similarity_d(u, w, {1.0}), 0.36788, 1e-5);
}

TEST(Similarity, ZeroVectorIsDomainError) {
  const std::vector<double> u{1, 0}, z{0, 0};
  EXPECT_THROW(similarity_d(u, z, {}), DomainError);
  EXPECT_THROW(similarity_d(u, u, {0.0}), ConfigError);
}

TEST(NtXent, SinglePairIsZero) {
  Rng rng(1);
  EXPECT_EQ(nt_xent(random_tensor({1, 3}, rng), random_tensor({1, 3}, rng), {}), 0.0);
  EXPECT_EQ(pnt_xent(random_tensor({1, 3}, rng), random_tensor({1, 3}, rng), {}), 0.0);
}

TEST(NtXent, TwoDuplicatedBasisVectorsHand) {
  // Each anchor: positive e^1, negatives e^0 + e^0.
  const Tensor a = rows(2, 2, {1, 0, 0, 1});
  const double e = std::numbers::e;
  EXPECT_NEAR(nt_xent(a, a, {1.0}), -std::log(e / (e + 2.0)), 1e-14);
}

TEST(PntXent, TwoPairsOfPlaneVectorsHand) {
  // cos(u_i, w_i) = 0.6, cos(u_i, u_k) = 0, cos(u_i, w_k) = 0.8, tau = 0.5.
  const Tensor u = rows(2, 2, {1, 0, 0, 1});
  const Tensor w = rows(2, 2, {0.6, 0.8, 0.8, 0.6});
  const double expect = -std::log(std::exp(1.2) / (std::exp(1.2) + 1.0 + std::exp(1.6)));
  EXPECT_NEAR(pnt_xent(u, w, {0.5}), expect, 1e-14);
}

TEST(NtXent, Errors) {
  EXPECT_THROW(nt_xent(Tensor({2, 3}), Tensor({2, 3}), {}), DomainError);  // zero rows
  Rng rng(2);
  EXPECT_THROW(pnt_xent(random_tensor({2, 3}, rng), random_tensor({3, 3}, rng), {}), DomainError);
  EXPECT_THROW(nt_xent(random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), {-1.0}), ConfigError);
}

TEST(SupConDa, FourIdenticalOutputs) {
  Rng rng(3);
  const Tensor x = random_tensor({1, 5}, rng);
  const Tensor s = concat_rows(x, x);
  const double expect = 2.0 * -std::log(1.0 / 3.0);
  EXPECT_EQ(supcon_da(s, s, {}), expect);
  EXPECT_EQ(psupcon_da(s, s, {}), expect);
  EXPECT_NEAR(expect, 2.19722, 1e-5);
}

TEST(SupConDa, BasisDomainsHand) {
  const Tensor s = rows(2, 2, {1, 0, 1, 0}), t = rows(2, 2, {0, 1, 0, 1});
  const double e = std::numbers::e;
  EXPECT_NEAR(supcon_da(s, t, {1.0}), -2.0 * std::log(e / (e + 2.0)), 1e-14);
}

TEST(SupConDa, NeedsTwoPerDomain) {
  Rng rng(4);
  EXPECT_THROW(supcon_da(random_tensor({1, 3}, rng), random_tensor({2, 3}, rng), {}), DomainError);
  EXPECT_THROW(supcon_da(random_tensor({2, 3}, rng), random_tensor({1, 3}, rng), {}), DomainError);
  EXPECT_THROW(supcon_da(random_tensor({2, 3}, rng), random_tensor({2, 4}, rng), {}), DomainError);
}

TEST(Reduction, PrunedLossesEqualUnprunedOnSameInputs) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = random_tensor({4, 3}, rng), b = random_tensor({4, 3}, rng);
    EXPECT_EQ(pnt_xent(a, b, {}), nt_xent(a, b, {}));
    EXPECT_EQ(psupcon_da(a, b, {}), supcon_da(a, b, {}));
  }
}

// ---------------------------------------------------- brute-force oracle

TEST(Oracle, AllFourLossesMatchSetEnumeration) {
  Rng rng(6);
  double worst = 0.0;
  for (int i = 0; i < 400; ++i) {
    const std::size_t n = 1 + rng.index(6), d = 2 + rng.index(4);
    const double tau = 0.1 + rng.uniform();
    const Tensor a = random_tensor({n, d}, rng), b = random_tensor({n, d}, rng);
    worst = std::max(worst, std::fabs(nt_xent(a, b, {tau}) - bf_nt_xent(a, b, tau)));
    worst = std::max(worst, std::fabs(pnt_xent(a, b, {tau}) - bf_nt_xent(a, b, tau)));
    const std::size_t ns = 2 + rng.index(5), nt = 2 + rng.index(5);  // total <= 6 per domain
    const Tensor s = random_tensor({ns, d}, rng), t = random_tensor({nt, d}, rng);
    worst = std::max(worst, std::fabs(supcon_da(s, t, {tau}) - bf_supcon_da(s, t, tau)));
    worst = std::max(worst, std::fabs(psupcon_da(s, t, {tau}) - bf_supcon_da(s, t, tau)));
  }
  EXPECT_LE(worst, kOracleTol);
}

TEST(Oracle, ThreeRandomUnitVectorsPerDomain) {
  Rng rng(7);
  auto unit = [&](std::size_t n) {
    Tensor t = random_tensor({n, 3}, rng);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0;
      for (double v : t.row(r)) s += v * v;
      for (double& v : t.row(r)) v /= std::sqrt(s);
    }
    return t;
  };
  const Tensor s = unit(3), t = unit(3);
  EXPECT_NEAR(psupcon_da(s, t, {}), bf_supcon_da(s, t, 0.5), kOracleTol);
}

// ---------------------------------------------------------- invariants

TEST(Invariant, ScaleInvariantPerRow) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    const double base = nt_xent(a, b, {}), sbase = supcon_da(a, b, {});
    for (double& v : a.row(1)) v *= 7.5;
    EXPECT_NEAR(nt_xent(a, b, {}), base, 1e-12);
    EXPECT_NEAR(supcon_da(a, b, {}), sbase, 1e-12);
  }
}

TEST(Invariant, SupConSymmetricInDomainsAndBoundedBelow) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    EXPECT_NEAR(supcon_da(a, b, {}), supcon_da(b, a, {}), 1e-12);
    // Every log ratio is below 0: each positive is one of >= 3 denominator terms.
    EXPECT_GT(supcon_da(a, b, {}), 0.0);
    EXPECT_GE(nt_xent(a, b, {}), 0.0);
  }
}

// -------------------------------------------------- gradient checks

template <typename F>
void check_pair_gradient(F loss_with_grad, bool supcon, std::uint64_t seed) {
  Rng rng(seed);
  testing::GradCheck total;
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = (supcon ? 2 : 1) + rng.index(supcon ? 4 : 6), m = supcon ? 2 + rng.index(4) : n;
    const std::size_t d = 2 + rng.index(4);
    const double tau = 0.2 + rng.uniform();
    const Tensor a = random_tensor({n, d}, rng), b = random_tensor({m, d}, rng);
    const auto g = loss_with_grad(a, b, ContrastiveConfig{tau});
    total = testing::check_gradient([&](const Tensor& x) { return loss_with_grad(x, b, ContrastiveConfig{tau}).value; }, a,
                                    g.d_first, total);
    total = testing::check_gradient([&](const Tensor& x) { return loss_with_grad(a, x, ContrastiveConfig{tau}).value; }, b,
                                    g.d_second, total);
  }
  EXPECT_LE(total.worst, testing::kGradRelTol);
  EXPECT_EQ(total.kinks, 0u);
  EXPECT_GT(total.checked, 1000u);
}

TEST(Gradient, NtXent) { check_pair_gradient(nt_xent_with_grad, false, 21); }
TEST(Gradient, PntXent) { check_pair_gradient(pnt_xent_with_grad, false, 22); }
TEST(Gradient, SupConDa) { check_pair_gradient(supcon_da_with_grad, true, 23); }
TEST(Gradient, PSupConDa) { check_pair_gradient(psupcon_da_with_grad, true, 24); }

}  // namespace
}  // namespace sdcda
