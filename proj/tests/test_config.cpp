#include <gtest/gtest.h>

#include "sdcda/config.hpp"

namespace sdcda {
namespace {

void expect_config_error(std::string_view text, const std::string& fragment) {
  try {
    parse_config(text);
    FAIL() << "expected ConfigError for: " << text;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(Config, DefaultsMatchBenchmark) {
  const RunConfig c;
  EXPECT_EQ(c.experiment.baada.lambda_d, benchmark_baada().lambda_d);
  EXPECT_EQ(c.experiment.baada.lambda_bd, benchmark_baada().lambda_bd);
  EXPECT_EQ(c.experiment.iaclr.alpha_g, 0.25);
  EXPECT_EQ(c.experiment.baada.alpha_d, 0.4);
  EXPECT_EQ(c.experiment.iaclr.temperature, 0.5);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, DumpParseDumpIsStable) {
  RunConfig c;
  c.seed = 12345;
  c.setting = Setting::b2i;
  c.out = "with \"quotes\" and \\slash";
  c.experiment.baada.lambda_bd = 1e-7;
  c.experiment.iaclr.augmentation = {AugmentKind::random_mask, 0.25};
  c.experiment.source_ratios = {1.0, 0.2, 0.1, 0.05};
  c.experiment.settings = {Setting::i2i};
  c.sweep_parameter = SweepParameter::lambda_bd;
  c.sweep_grid = {1e-9, 1e-7, 1e-5};
  for (bool documented : {true, false}) {
    const std::string text = dump_config(c, documented);
    const RunConfig back = parse_config(text);
    EXPECT_EQ(dump_config(back, documented), text);
    EXPECT_EQ(back.out, c.out);
    EXPECT_EQ(back.sweep_grid, c.sweep_grid);
  }
}

TEST(Config, JsonFormEquivalent) {
  RunConfig c;
  c.seed = 7;
  c.experiment.baada.alpha_d = 0.35;
  const RunConfig back = parse_config(config_json(c).dump(2));
  EXPECT_EQ(dump_config(back), dump_config(c));
}

TEST(Config, PartialFileOverridesOnlyGivenKeys) {
  const RunConfig c = parse_config("# comment\n[baada]\nalpha_d = 0.45\n\n[run]\nseed = 3\n");
  EXPECT_EQ(c.experiment.baada.alpha_d, 0.45);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.experiment.baada.lambda_d, RunConfig{}.experiment.baada.lambda_d);
}

TEST(Config, RejectsUnknownAndMalformed) {
  expect_config_error("[baada]\nalpha = 0.4\n", "unknown config key baada.alpha");
  expect_config_error("[nosuch]\nx = 1\n", "unknown config key nosuch.x");
  expect_config_error("seed = 1\n", "outside any [section]");
  expect_config_error("[run]\nseed = 1\nseed = 2\n", "repeated");
  expect_config_error("[run]\n[run]\n", "repeated");
  expect_config_error("[run]\nseed = \"x\"\n", "run.seed");
  expect_config_error("[run]\nsetting = \"X2Y\"\n", "X2Y");
  expect_config_error("[run]\nout = \"unterminated\n", "line 2");
  expect_config_error("{\"run\": {\"bogus\": 1}}", "unknown config key run.bogus");
  expect_config_error("{not json", "config json");
}

TEST(Config, ValidateCrossFieldRules) {
  RunConfig c;
  c.sweep_grid = {0.5, 0.1};
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.threads = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.experiment.source_ratios = {1.0, 1.0};  // wrong length for K = 4
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.experiment.baada.alpha_d = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, DigestIgnoresOutputLocationAndThreads) {
  RunConfig a, b;
  b.out = "elsewhere";
  b.threads = 8;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(Config, MissingFileIsConfigError) { EXPECT_THROW(load_config("/nonexistent/sdcda.toml"), ConfigError); }

}  // namespace
}  // namespace sdcda
