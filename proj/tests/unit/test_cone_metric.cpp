#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skewprod/cone_metric.hpp"

using namespace skewprod;

namespace {
std::vector<double> values_of(const GridFn& g) { return {g.values().begin(), g.values().end()}; }

const TrigPotential kSmallTrig(0.0, {{1, 0, 0.004}, {0, 1, 0.003}, {1, 1, 0.003}});
}  // namespace

TEST(HolderSeminorm, ConstantIsZero) { EXPECT_EQ(holder_seminorm(GridFn(64, 3.0), 1.0), 0.0); }

TEST(HolderSeminorm, CosineSlope) {
  const GridFn g = GridFn::sample(512, [](double y) { return std::cos(2 * std::numbers::pi * y); });
  const double v = holder_seminorm(g, 1.0);
  EXPECT_LE(v, 2 * std::numbers::pi);
  EXPECT_GE(v, 0.95 * 2 * std::numbers::pi);
}

TEST(HolderSeminorm, HomogeneousAndMatchesOracle) {
  const GridFn g = GridFn::sample(64, [](double y) { return std::sin(6 * std::numbers::pi * y) + y * y; });
  GridFn scaled = g;
  scaled.log_offset = std::log(3.0);
  EXPECT_NEAR(holder_seminorm(scaled, 0.7), 3.0 * holder_seminorm(g, 0.7), 1e-12);
  EXPECT_NEAR(holder_seminorm(g, 0.7), oracle::holder_seminorm(values_of(g), 0.7), 1e-12);
}

TEST(InCone, Examples) {
  EXPECT_TRUE(in_cone(GridFn(64, 1.0), {1e-3 + 2.0, 1.0}));
  const GridFn bump = GridFn::sample(256, [](double y) { return 1 + 0.5 * std::cos(2 * std::numbers::pi * y); });
  EXPECT_TRUE(in_cone(bump, {10.0, 1.0}));   // pi <= 10 * 1/2
  EXPECT_FALSE(in_cone(bump, {6.0, 1.0}));   // pi > 6 * 1/2
  GridFn bad(64, 1.0);
  bad[5] = 0.0;
  EXPECT_FALSE(in_cone(bad, {50.0, 1.0}));
}

TEST(HilbertDistance, IdentityAndScaling) {
  const ConeParams cone{10.0, 1.0};
  const GridFn f = GridFn::sample(64, [](double y) { return 1 + 0.1 * std::cos(2 * std::numbers::pi * y); });
  EXPECT_NEAR(hilbert_distance(f, f, cone), 0.0, 1e-14);
  GridFn g = f;
  for (auto& v : g.values()) v *= 2.5;
  g.log_offset = 0.3;
  EXPECT_NEAR(hilbert_distance(f, g, cone), 0.0, 1e-12);
}

TEST(HilbertDistance, MatchesBruteForceOracle) {
  const ConeParams cone{10.0, 1.0};
  const GridFn one(32, 1.0);
  const GridFn psi = GridFn::sample(32, [](double y) { return 1 + 0.1 * std::cos(2 * std::numbers::pi * y); });
  EXPECT_NEAR(hilbert_distance(one, psi, cone, 32),
              oracle::hilbert_distance(values_of(one), values_of(psi), 10.0, 1.0), 1e-9);

  std::mt19937_64 rng(9);
  const ConeParams wide{50.0, 0.8};
  for (int t = 0; t < 5; ++t) {
    const GridFn f = random_cone_element(rng, wide, 32);
    const GridFn g = extremal_cone_element(rng, wide, 32);
    EXPECT_NEAR(hilbert_distance(f, g, wide, 32),
                oracle::hilbert_distance(values_of(f), values_of(g), 50.0, 0.8), 1e-9);
  }
}

TEST(HilbertDistance, ProjectiveInvariance) {
  std::mt19937_64 rng(4);
  const ConeParams cone{50.0, 1.0};
  const GridFn f = random_cone_element(rng, cone, 128), g = random_cone_element(rng, cone, 128);
  GridFn af = f, bg = g;
  af.log_offset = std::log(7.0);
  for (auto& v : bg.values()) v *= 0.01;
  EXPECT_NEAR(hilbert_distance(af, bg, cone), hilbert_distance(f, g, cone), 1e-10);
}

TEST(HilbertDistance, SymmetricAndTriangle) {
  std::mt19937_64 rng(12);
  const ConeParams cone{50.0, 1.0};
  for (int t = 0; t < 10; ++t) {
    const GridFn a = random_cone_element(rng, cone, 64);
    const GridFn b = extremal_cone_element(rng, cone, 64);
    const GridFn c = random_cone_element(rng, cone, 64);
    const double ab = hilbert_distance(a, b, cone), ba = hilbert_distance(b, a, cone);
    EXPECT_NEAR(ab, ba, 1e-10);
    EXPECT_LE(hilbert_distance(a, c, cone), ab + hilbert_distance(b, c, cone) + 1e-10);
  }
}

TEST(HilbertDistance, PointMassesBoundFromBelow) {
  std::mt19937_64 rng(13);
  const ConeParams cone{50.0, 1.0};
  for (int t = 0; t < 10; ++t) {
    const GridFn a = random_cone_element(rng, cone, 64);
    const GridFn b = extremal_cone_element(rng, cone, 64);
    EXPECT_LE(positive_cone_distance(a, b), hilbert_distance(a, b, cone) + 1e-9);
  }
}

TEST(HilbertDistance, RejectsOutsideCone) {
  const GridFn f(64, 1.0);
  const GridFn steep = GridFn::sample(64, [](double y) { return 1 + 0.9 * std::cos(2 * std::numbers::pi * y); });
  try {
    (void)hilbert_distance(f, steep, {5.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::cone_violation);
  }
}

TEST(ConeSamples, StayInsideCone) {
  std::mt19937_64 rng(21);
  for (double alpha : {1.0, 0.5}) {
    const ConeParams cone{50.0, alpha};
    for (const auto& g : sample_cone_elements(rng, cone, 256, 40)) EXPECT_TRUE(in_cone(g, cone));
  }
}

TEST(ImageDiameter, ConstantsUnderZeroPotential) {
  std::vector<GridFn> constants;
  for (int i = 0; i < 20; ++i) constants.emplace_back(128, 1.0 + i);
  const auto rep = image_diameter(TrigPotential(), MpFamily{}, BasePoint::from_bits("011"),
                                  ConeParams{50.0, 1.0}, constants);
  EXPECT_NEAR(rep.M_emp, 0.0, 1e-12);
  EXPECT_EQ(rep.samples, 20u);
}

TEST(ImageDiameter, TauIsTanhQuarter) { EXPECT_NEAR(std::tanh(4.0 / 4.0), 0.76159, 1e-5); }

TEST(ImageDiameter, BirkhoffContraction) {
  std::mt19937_64 rng(31);
  const ConeParams cone{50.0, 1.0};
  const BasePoint x = BasePoint::random(rng);
  const auto rep = image_diameter(kSmallTrig, MpFamily{}, x, cone, rng, 30, 256);
  EXPECT_GT(rep.tau, 0.0);
  EXPECT_LT(rep.tau, 1.0);
  EXPECT_NEAR(rep.tau, std::tanh(rep.M_emp / 4), 1e-15);
  for (int t = 0; t < 5; ++t) {
    const GridFn f = random_cone_element(rng, cone, 256), g = random_cone_element(rng, cone, 256);
    const GridFn lf = apply_fiber_operator(kSmallTrig, MpFamily{}, x, f);
    const GridFn lg = apply_fiber_operator(kSmallTrig, MpFamily{}, x, g);
    EXPECT_LE(hilbert_distance(lf, lg, cone), rep.tau * hilbert_distance(f, g, cone) + 1e-8);
  }
}

TEST(ImageDiameter, ZetaBelowAnalyticForCompliantPotential) {
  MpFamily family;
  family.delta_a = 0.3;
  HypothesisInputs in;
  in.eps_phi = 0.1;
  const auto k = estimate_constants(family, in, 2000, 1);
  ASSERT_TRUE(check_condition_P(kSmallTrig, k, 64).passed());
  std::mt19937_64 rng(8);
  const auto rep = image_diameter(kSmallTrig, family, BasePoint::random(rng), ConeParams{50.0, 1.0},
                                  rng, 20, 256, &k);
  EXPECT_LE(rep.zeta_emp, k.zeta);
  EXPECT_EQ(rep.zeta_bound, k.zeta);
}
