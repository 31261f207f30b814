#include <gtest/gtest.h>

#include <cmath>

#include "sdcda/network.hpp"
#include "sdcda/optimizer.hpp"
#include "sdcda/pruning.hpp"
#include "support.hpp"

namespace sdcda {
namespace {

ParameterSet weights(std::vector<double> v) {
  ParameterSet p;
  const std::size_t n = v.size();
  p.add("l.0.weight", Tensor({n}, std::move(v)));
  return p;
}

std::vector<std::uint8_t> keep(const PruneMask& m, std::size_t i = 0) { return m.entries.at(i).keep; }

TEST(L1Mask, DropsTwoSmallestMagnitudes) {
  EXPECT_EQ(keep(l1_mask(weights({0.5, -0.1, 0.3, -0.7}), 0.5)), (std::vector<std::uint8_t>{1, 0, 0, 1}));
}

TEST(L1Mask, ZeroAlphaKeepsEverything) {
  EXPECT_EQ(keep(l1_mask(weights({0.5, -0.1, 0.3}), 0.0)), (std::vector<std::uint8_t>{1, 1, 1}));
}

TEST(L1Mask, TieDropsLowestFlatIndex) {
  EXPECT_EQ(keep(l1_mask(weights({0.2, -0.2, 0.2}), 1.0 / 3.0)), (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(L1Mask, BiasesExempt) {
  ParameterSet p;
  p.add("l.0.weight", Tensor({2}, std::vector<double>{1.0, 2.0}));
  p.add("l.0.bias", Tensor({2}, std::vector<double>{0.0, 0.0}));
  auto m = l1_mask(p, 0.5);
  EXPECT_EQ(m.kept(0), 1u);
  EXPECT_EQ(m.kept(1), 2u);
}

TEST(L1Mask, AlphaOutsideRangeIsConfigError) {
  auto p = weights({1.0});
  EXPECT_THROW(l1_mask(p, 1.0), ConfigError);
  EXPECT_THROW(l1_mask(p, -0.1), ConfigError);
  EXPECT_THROW(l1_mask(p, std::nan("")), ConfigError);
  Rng rng(1);
  EXPECT_THROW(random_mask(p, 1.0, rng), ConfigError);
}

TEST(ApplyMask, ZeroesDropped) {
  auto p = weights({0.5, -0.1, 0.3, -0.7});
  auto q = apply_mask(p, l1_mask(p, 0.5));
  EXPECT_EQ(q[0].tensor, Tensor({4}, std::vector<double>{0.5, 0, 0, -0.7}));
}

TEST(ApplyMask, AllKeptIsIdentity) {
  auto p = weights({0.5, -0.0, 0.3});
  EXPECT_TRUE(bitwise_equal(apply_mask(p, PruneMask::all_kept(p)), p));
}

TEST(ApplyMask, HalfOfTwoLeavesOneZero) {
  auto q = apply_mask(weights({0.4, -0.9}), l1_mask(weights({0.4, -0.9}), 0.5));
  EXPECT_EQ(q[0].tensor[0], 0.0);
  EXPECT_EQ(q[0].tensor[1], -0.9);
}

TEST(ApplyMask, MisalignedMaskIsInternalError) {
  auto p = weights({1, 2});
  EXPECT_THROW(apply_mask(p, PruneMask::all_kept(weights({1, 2, 3}))), InternalError);
}

TEST(MaskedUpdateCycle, ZeroAlphaEqualsPlainSgd) {
  Rng rng(3);
  auto p = weights({0.3, -1.2, 0.8, 0.05});
  auto g = weights({0.1, 0.2, -0.3, 0.4});
  auto grad_fn = [&](const ParameterSet&, const ParameterSet&) { return g; };
  EXPECT_TRUE(bitwise_equal(masked_update_cycle(p, 0.0, grad_fn, 0.1), sgd_step(p, g, 0.1)));
}

TEST(MaskedUpdateCycle, ZeroRateLeavesParams) {
  auto p = weights({0.3, -1.2, 0.8});
  auto grad_fn = [](const ParameterSet& full, const ParameterSet&) { return full; };
  EXPECT_TRUE(bitwise_equal(masked_update_cycle(p, 0.5, grad_fn, 0.0), p));
}

TEST(MaskedUpdateCycle, DenseToyHandArithmetic) {
  // One dense layer with 4 weights; alpha 0.25 drops |w| = 0.1 (index 2).
  ParameterSet p;
  p.add("d.0.weight", Tensor({2, 2}, std::vector<double>{0.5, -0.4, 0.1, 0.9}));
  p.add("d.0.bias", Tensor({2}, std::vector<double>{0.2, -0.2}));
  ParameterSet seen;
  auto grad_fn = [&](const ParameterSet&, const ParameterSet& pruned) {
    seen = pruned;
    ParameterSet g;
    g.add("d.0.weight", Tensor({2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0}));
    g.add("d.0.bias", Tensor({2}, std::vector<double>{1.0, -1.0}));
    return g;
  };
  auto out = masked_update_cycle(p, 0.25, grad_fn, 0.1);
  EXPECT_EQ(seen.at("d.0.weight")[2], 0.0);
  const Tensor& w = out.at("d.0.weight");
  EXPECT_DOUBLE_EQ(w[0], 0.5 - 0.1 * 1.0);
  EXPECT_DOUBLE_EQ(w[1], -0.4 - 0.1 * 2.0);
  EXPECT_EQ(w[2], 0.1);
  EXPECT_DOUBLE_EQ(w[3], 0.9 - 0.1 * 4.0);
  EXPECT_DOUBLE_EQ(out.at("d.0.bias")[0], 0.2 - 0.1);
  EXPECT_DOUBLE_EQ(out.at("d.0.bias")[1], -0.2 + 0.1);
}

// ---------------------------------------------------------- properties

ParameterSet random_params(Rng& rng) {
  NetworkSpec net{"n", {1 + rng.index(7)}, {}};
  net.layers.push_back(layer::Dense{net.input_shape[0], 1 + rng.index(9)});
  net.layers.push_back(layer::Relu{});
  net.layers.push_back(layer::Dense{std::get<layer::Dense>(net.layers[0]).out, 1 + rng.index(5)});
  auto p = init_params(net, rng);
  for (auto& e : p)
    for (double& v : e.tensor.values())
      if (rng.uniform() < 0.2) v = std::round(v * 4.0) / 4.0;  // force magnitude ties
  return p;
}

TEST(PruningProperty, KeptCountPerTensor) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = random_params(rng);
    const double alpha = rng.uniform() * 0.99;
    for (const PruneMask& m : {l1_mask(p, alpha), random_mask(p, alpha, rng)}) {
      ASSERT_TRUE(m.aligns_with(p));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t n = p[i].tensor.size();
        const std::size_t expect = is_prunable(p[i].name) ? n - static_cast<std::size_t>(std::floor(alpha * n)) : n;
        EXPECT_EQ(m.kept(i), expect);
      }
    }
  }
}

TEST(PruningProperty, L1DropsOnlySmallestMagnitudes) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    auto p = random_params(rng);
    auto m = l1_mask(p, rng.uniform() * 0.99);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto w = p[i].tensor.values();
      for (std::size_t a = 0; a < w.size(); ++a)
        for (std::size_t b = 0; b < w.size(); ++b) {
          if (m.entries[i].keep[a] || !m.entries[i].keep[b]) continue;
          // a dropped, b kept
          EXPECT_LE(std::fabs(w[a]), std::fabs(w[b]));
          if (std::fabs(w[a]) == std::fabs(w[b])) {
            EXPECT_LT(a, b);
          }
        }
    }
  }
}

TEST(PruningProperty, MaskDeterminism) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_params(rng);
    const double alpha = rng.uniform() * 0.99;
    EXPECT_EQ(l1_mask(p, alpha), l1_mask(p, alpha));
    const auto seed = rng.next();
    Rng a(seed), b(seed);
    EXPECT_EQ(random_mask(p, alpha, a), random_mask(p, alpha, b));
  }
}

TEST(PruningProperty, PrunedCoordinatesFrozenThroughManyCycles) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_params(rng);
    const double alpha = 0.1 + 0.8 * rng.uniform();
    const auto grad_seed = rng.next();
    Rng grng(grad_seed);
    auto grad_fn = [&](const ParameterSet& full, const ParameterSet&) {
      ParameterSet g = full.zeros_like();
      for (auto& e : g)
        for (double& v : e.tensor.values()) v = grng.normal();
      return g;
    };
    for (int cycle = 0; cycle < 20; ++cycle) {
      const PruneMask m = l1_mask(p, alpha);
      const ParameterSet before = p;
      p = masked_update_cycle(p, alpha, grad_fn, 0.05);
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[i].tensor.size(); ++j) {
          if (m.entries[i].keep[j]) continue;
          const double x = before[i].tensor[j], y = p[i].tensor[j];
          EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0);
        }
    }
  }
}

TEST(PruneStrategy, ParseRoundTrip) {
  EXPECT_EQ(parse_prune_strategy(to_string(PruneStrategy::l1)), PruneStrategy::l1);
  EXPECT_EQ(parse_prune_strategy(to_string(PruneStrategy::random)), PruneStrategy::random);
  EXPECT_THROW(parse_prune_strategy("magnitude"), ConfigError);
  auto p = weights({1, 2});
  EXPECT_THROW(make_mask(p, 0.5, PruneStrategy::random, nullptr), InternalError);
}

}  // namespace
}  // namespace sdcda
