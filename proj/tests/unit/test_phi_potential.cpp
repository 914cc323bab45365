#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "skewprod/cone_metric.hpp"
#include "skewprod/phi_potential.hpp"

using namespace skewprod;

namespace {
const TrigPotential kSmallTrig(0.0, {{1, 0, 0.004}, {0, 1, 0.003}, {1, 1, 0.003}});

PhiOptions small_grid() {
  PhiOptions o;
  o.ny = 128;
  return o;
}
}  // namespace

TEST(PhiN, ZeroPotentialGivesLogTwo) {
  std::mt19937_64 rng(1);
  const BasePoint x = BasePoint::random(rng);
  for (std::size_t n : {0u, 1u, 7u}) {
    EXPECT_NEAR(phi_n(TrigPotential(), MpFamily{}, x, n, small_grid()), std::log(2.0), 1e-14);
  }
}

TEST(PhiN, ConstantPotentialShifts) {
  const BasePoint x = BasePoint::from_bits("1101001");
  EXPECT_NEAR(phi_n(TrigPotential::constant_potential(0.05), MpFamily{}, x, 5, small_grid()),
              std::log(2.0) + 0.05, 1e-14);
}

TEST(PhiN, NeedsCapacity) {
  const BasePoint x = BasePoint::from_bits("1101", 4);
  try {
    (void)phi_n(kSmallTrig, MpFamily{}, x, 4, small_grid());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capacity_exhausted);
  }
}

TEST(PhiN, AnchorIndependenceAtRate) {
  std::mt19937_64 rng(2);
  const BasePoint x = BasePoint::random(rng);
  PhiOptions uniform = small_grid();
  uniform.anchor = Anchor::uniform();
  const auto fit = fit_convergence_rate(kSmallTrig, MpFamily{}, x, 5, 30, 70, small_grid());
  const auto a = phi_sequence(kSmallTrig, MpFamily{}, x, 30, small_grid());
  const auto b = phi_sequence(kSmallTrig, MpFamily{}, x, 30, uniform);
  for (std::size_t n = 10; n <= 30; ++n) {
    EXPECT_LE(std::fabs(a[n] - b[n]), fit.C1_emp * std::pow(fit.tau_emp, n) + 1e-13) << n;
  }
}

TEST(ComputePhi, ZeroPotentialStopsImmediately) {
  const auto v = compute_phi(TrigPotential(), MpFamily{}, BasePoint::from_bits("01"), 1e-10, small_grid());
  EXPECT_NEAR(v.value, std::log(2.0), 1e-14);
  EXPECT_LE(v.n_used, 2u);
  EXPECT_GT(v.bound, 0.0);
  EXPECT_LT(v.bound, 1e-12);
}

TEST(ComputePhi, ConstantPotential) {
  const auto v = compute_phi(TrigPotential::constant_potential(0.05), MpFamily{},
                             BasePoint::from_bits("0111"), 1e-10, small_grid());
  EXPECT_NEAR(v.value, std::log(2.0) + 0.05, 1e-13);
}

TEST(ComputePhi, AgreesWithLongRun) {
  std::mt19937_64 rng(3);
  const double tol = 1e-10;
  for (int t = 0; t < 3; ++t) {
    const BasePoint x = BasePoint::random(rng);
    const auto v = compute_phi(kSmallTrig, MpFamily{}, x, tol, small_grid());
    EXPECT_NEAR(v.value, phi_n(kSmallTrig, MpFamily{}, x, 40, small_grid()), 10 * tol);
    EXPECT_GT(v.bound, 0.0);
    EXPECT_TRUE(std::isfinite(v.bound));
  }
}

TEST(ComputePhi, ReportsNonConvergence) {
  PhiOptions o = small_grid();
  o.max_n = 2;
  try {
    (void)compute_phi(kSmallTrig, MpFamily{}, BasePoint::from_bits("0110111"), 1e-14, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_convergence);
  }
}

TEST(ComputePhi, ConstantShiftCovariance) {
  std::mt19937_64 rng(4);
  const BasePoint x = BasePoint::random(rng);
  const double a = compute_phi(kSmallTrig, MpFamily{}, x, 1e-12, small_grid()).value;
  const double b = compute_phi(kSmallTrig.shifted(0.37), MpFamily{}, x, 1e-12, small_grid()).value;
  EXPECT_NEAR(b - a, 0.37, 1e-10);
}

TEST(ConvergenceFit, ZeroPotentialIsDegenerate) {
  try {
    (void)fit_convergence_rate(TrigPotential(), MpFamily{}, BasePoint::from_bits("1"), 5, 20, 40, small_grid());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_fit);
  }
}

TEST(ConvergenceFit, GeometricForSmallTrig) {
  std::mt19937_64 rng(5);
  const auto fit = fit_convergence_rate(kSmallTrig, MpFamily{}, BasePoint::random(rng), 5, 35, 80, small_grid());
  EXPECT_LT(fit.tau_emp, 1.0);
  EXPECT_GT(fit.tau_emp, 0.0);
  EXPECT_GE(fit.r2, 0.98);
  for (std::size_t n = fit.n_lo; n <= fit.n_hi; ++n) {
    if (fit.errors[n] > 1e-13) EXPECT_LE(fit.errors[n], fit.C1_emp * std::pow(fit.tau_emp, n) * (1 + 1e-9));
  }
}

TEST(ConvergenceFit, RateBelowConeFactor) {
  std::mt19937_64 rng(6);
  const BasePoint x = BasePoint::random(rng);
  const auto fit = fit_convergence_rate(kSmallTrig, MpFamily{}, x, 5, 35, 80, small_grid());
  const auto rep = image_diameter(kSmallTrig, MpFamily{}, x, ConeParams{50.0, 1.0}, rng, 30, 256);
  EXPECT_LE(fit.tau_emp, rep.tau + 0.05);
}

TEST(PhiTable, RoundTripAndHashCheck) {
  PhiTable table("abc");
  table.tau_emp = 0.4;
  table.insert(BasePoint::from_bits("1011"), {0.69, 12, 1e-13});
  const auto path = (std::filesystem::temp_directory_path() / "phi_table_test.json").string();
  table.save(path);
  const PhiTable back = PhiTable::load(path, "abc");
  ASSERT_EQ(back.size(), 1u);
  const auto e = back.find(BasePoint::from_bits("10110000"));
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->value, 0.69);
  EXPECT_EQ(e->n_used, 12u);
  EXPECT_EQ(back.tau_emp, 0.4);
  EXPECT_EQ(PhiTable::load(path, "other").size(), 0u);
  EXPECT_EQ(PhiTable::load(path + ".missing", "abc").size(), 0u);
  std::filesystem::remove(path);
}

TEST(PhiEvaluator, CachesValues) {
  PhiTable table;
  const PhiEvaluator eval(kSmallTrig, MpFamily{}, 1e-11, small_grid(), &table);
  const BasePoint x = BasePoint::from_bits("010011");
  const double a = eval(x);
  EXPECT_EQ(table.size(), 1u);
  EXPECT_EQ(eval(x), a);
  EXPECT_EQ(table.size(), 1u);
}

TEST(Holder, ZeroPotentialDegenerate) {
  std::mt19937_64 rng(7);
  const PhiEvaluator eval(TrigPotential(), MpFamily{}, 1e-12, small_grid());
  const auto est = estimate_holder(eval, {4, 6, 8}, 4, rng);
  EXPECT_TRUE(est.degenerate);
  for (double m : est.medians) EXPECT_LE(m, 1e-14);
}

TEST(Holder, PositiveExponentAndMonotoneMedians) {
  std::mt19937_64 rng(8);
  const PhiEvaluator eval(kSmallTrig, MpFamily{}, 1e-12, small_grid());
  const auto est = estimate_holder(eval, {4, 6, 8, 10, 12}, 8, rng);
  ASSERT_FALSE(est.degenerate);
  EXPECT_GT(est.exponent_emp, 0.0);
  for (std::size_t i = 1; i < est.medians.size(); ++i) EXPECT_LT(est.medians[i], est.medians[i - 1]);
  const double mid = median(est.ratios);
  for (double r : est.ratios) {
    EXPECT_LE(r, 2 * mid);
    EXPECT_GE(r, mid / 2);
  }
}

TEST(Sandwich, ZeroPotentialIsFlat) {
  const PhiEvaluator eval(TrigPotential(), MpFamily{}, 1e-12, small_grid());
  for (const auto& row : sandwich_profile(TrigPotential(), MpFamily{}, BasePoint::from_bits("1"), 10, eval)) {
    EXPECT_NEAR(row.log_min, 0.0, 1e-12);
    EXPECT_NEAR(row.log_max, 0.0, 1e-12);
  }
}
