#include <gtest/gtest.h>

#include "skewprod/config.hpp"

using namespace skewprod;
using nlohmann::json;

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = ExperimentConfig::from_json(json::object());
  EXPECT_EQ(c.family.p0, 0.5);
  EXPECT_EQ(c.grid.n_x, 256u);
  EXPECT_FALSE(c.strict);
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, ParsesPotentialTerms) {
  const auto c = ExperimentConfig::from_json(
      json::parse(R"({"potential": {"constant": 0.1, "terms": [[1, 0, 0.01], [0, 2, -0.02]]}})"));
  ASSERT_EQ(c.potential.terms().size(), 2u);
  EXPECT_EQ(c.potential.terms()[1].ky, 2);
  EXPECT_EQ(c.potential.constant(), 0.1);
}

TEST(Config, HashTracksNumericsOnly) {
  auto base = ExperimentConfig::from_json(json::object());
  auto seeded = ExperimentConfig::from_json(json::parse(R"({"seed": 99, "output_dir": "x"})"));
  auto other = ExperimentConfig::from_json(json::parse(R"({"fiber_family": {"p1": 0.4}})"));
  EXPECT_EQ(base.hash(), seeded.hash());
  EXPECT_NE(base.hash(), other.hash());
  EXPECT_EQ(ExperimentConfig::from_json(base.to_json()).hash(), base.hash());
}

TEST(Config, RejectsBadInput) {
  const auto expect_config_error = [](const char* text) {
    try {
      (void)ExperimentConfig::from_json(json::parse(text));
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config) << text;
    }
  };
  expect_config_error(R"({"unknown": 1})");
  expect_config_error(R"({"grid": {"n_x": 100}})");
  expect_config_error(R"({"grid": {"n_theta": 256}})");
  expect_config_error(R"({"potential": {"terms": [[1, 0]]}})");
  expect_config_error(R"({"fiber_family": {"delta_a": 0.6}})");
  expect_config_error(R"({"constants": {"iota": 1.5}})");
  expect_config_error(R"({"mode": "loose"})");
  expect_config_error(R"({"fiber_family": {"p0": "half"}})");
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"default.json", "constant.json", "in_regime.json"}) {
    EXPECT_NO_THROW((void)ExperimentConfig::load(std::string(SKEWPROD_CONFIG_DIR) + "/" + name)) << name;
  }
  EXPECT_THROW((void)ExperimentConfig::load("/nonexistent.json"), Error);
}
