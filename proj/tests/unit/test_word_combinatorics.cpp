#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "skewprod/word_combinatorics.hpp"

using namespace skewprod;

namespace {
const TrigPotential kSmallTrig(0.0, {{1, 0, 0.004}, {0, 1, 0.003}, {1, 1, 0.003}});
}

TEST(IsGood, Examples) {
  const Word all_expanding(9, 2);
  for (std::size_t m : {1u, 2u, 5u}) {
    for (double iota : {0.1, 0.5, 0.99}) EXPECT_TRUE(is_good(all_expanding, m, iota, 1));
  }
  EXPECT_FALSE(is_good(Word{1, 1}, 2, 0.5, 1));
  // n = 2, m = 2, iota = 1/2: exactly (1,1) is bad.
  EXPECT_TRUE(is_good(Word{1, 2}, 2, 0.5, 1));
  EXPECT_TRUE(is_good(Word{2, 1}, 2, 0.5, 1));
  EXPECT_TRUE(is_good(Word{2, 2}, 2, 0.5, 1));
}

TEST(IsGood, WindowsAnchoredAtTheEnd) {
  // Trailing window of length 2 holds one neutral letter; the full window holds two of four.
  EXPECT_TRUE(is_good(Word{1, 2, 2, 1}, 2, 0.5, 1));
  EXPECT_FALSE(is_good(Word{1, 1, 2, 1}, 2, 0.5, 1));
  EXPECT_FALSE(is_good(Word{1, 1, 1, 2}, 2, 0.5, 1));
  EXPECT_FALSE(is_good(Word{2, 1, 1, 1}, 2, 0.5, 1));
}

TEST(IsGood, PartitionCounts) {
  for (std::size_t n : {4u, 7u}) {
    for (std::size_t m : {1u, 2u, 3u}) {
      std::size_t good = 0, bad = 0;
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        Word w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = (mask >> i) & 1u ? 1 : 2;
        (is_good(w, m, 0.6, 1) ? good : bad)++;
      }
      EXPECT_EQ(good + bad, std::size_t{1} << n);
    }
  }
}

TEST(CountI, Examples) {
  EXPECT_EQ(count_I(0.0, 6, 1, 2), 64u);
  // Any positive iota demands at least one neutral letter.
  EXPECT_EQ(count_I(1e-3, 6, 1, 2), 63u);
  EXPECT_EQ(count_I_binomial(1e-3, 6, 1, 2), 63u);
  EXPECT_EQ(count_I(0.5, 2, 1, 2), 3u);
  EXPECT_EQ(count_I_exhaustive(0.9, 16, 1, 2), count_I_binomial(0.9, 16, 1, 2));
}

TEST(CountI, AllMethodsAgree) {
  for (double iota : {0.25, 0.5, 0.75, 0.9, 0.995}) {
    for (std::size_t n = 1; n <= 16; ++n) {
      const auto threshold = static_cast<std::size_t>(std::ceil(iota * n - 1e-9));
      const std::uint64_t oracle_count = oracle::count_words_with_ones(n, threshold);
      EXPECT_EQ(count_I_exhaustive(iota, n, 1, 2), oracle_count) << iota << " " << n;
      EXPECT_EQ(count_I_binomial(iota, n, 1, 2), oracle_count) << iota << " " << n;
    }
  }
  for (std::size_t n = 1; n <= 9; ++n) {
    EXPECT_EQ(count_I_exhaustive(0.4, n, 1, 3), count_I_binomial(0.4, n, 1, 3));
    EXPECT_EQ(count_I_exhaustive(0.6, n, 2, 3), count_I_binomial(0.6, n, 2, 3));
  }
}

TEST(CountI, GrowthRateNearIotaOne) {
  const double eps = 0.05;
  for (std::size_t n : {20u, 40u, 60u}) {
    const double rate = std::log(double(count_I_binomial(0.995, n, 1, 2))) / n;
    EXPECT_LE(rate, std::log(1.0) + eps + 0.05);
  }
}

TEST(BadMass, VacuousWhenWindowExceedsDepth) {
  const auto rows = bad_mass_ratio(TrigPotential(), MpFamily{}, BasePoint::from_bits("1"), 0.5, 6, {7, 9}, 0.5);
  for (const auto& r : rows) {
    EXPECT_EQ(r.ratio, 0.0);
    EXPECT_EQ(r.good_count, 64u);
  }
}

TEST(BadMass, ZeroPotentialCountsWords) {
  for (std::size_t n : {4u, 6u, 8u}) {
    const auto rows = bad_mass_ratio(TrigPotential(), MpFamily{}, BasePoint::from_bits("01"), 0.5, n, {n}, 0.5);
    const std::uint64_t bad = oracle::count_words_with_ones(n, n / 2 + 1);
    const std::uint64_t good = (std::uint64_t{1} << n) - bad;
    EXPECT_EQ(rows[0].bad_count, bad);
    EXPECT_EQ(rows[0].good_count, good);
    EXPECT_NEAR(rows[0].ratio, double(bad) / double(good), 1e-12);
  }
}

TEST(BadMass, GeometricDecayInWindow) {
  std::mt19937_64 rng(2);
  const auto rows = bad_mass_ratio(kSmallTrig, MpFamily{}, BasePoint::random(rng), 0.5, 14,
                                   {1, 2, 3, 4, 5, 6, 7}, 0.995);
  const double theta = derive_constants(2, 1, 1.25, 1.0, HypothesisInputs{}).theta;
  EXPECT_LE(std::exp(fit_bad_mass_decay(rows).slope), theta + 0.1);
}

TEST(BadMass, SingleLetterSplit) {
  // n = 1, m = 1, iota = 1/2: the single word (1) is bad and (2) is good.
  const auto rows = bad_mass_ratio(TrigPotential(), MpFamily{}, BasePoint::from_bits("1"), 0.5, 1, {1}, 0.5);
  EXPECT_EQ(rows[0].good_count, 1u);
  EXPECT_EQ(rows[0].bad_count, 1u);
}

TEST(BranchContraction, EqualPointsDegenerate) {
  const BasePoint x = BasePoint::from_bits("0101");
  EXPECT_TRUE(good_branch_contraction(MpFamily{}, x, x, 0.5, 8, 2, 0.995).degenerate);
}

TEST(BranchContraction, RatesAndDomination) {
  std::mt19937_64 rng(3);
  const BasePoint x = BasePoint::random(rng);
  const BasePoint xp = x.shifted(20);
  const std::size_t n = 12, m = 3;
  const auto bc = good_branch_contraction(MpFamily{}, x, xp, 0.5, n, m, 0.995);
  ASSERT_FALSE(bc.degenerate);
  EXPECT_GT(bc.decay_rate, 0.0);
  const auto k = estimate_constants(MpFamily{}, HypothesisInputs{}, 2000, 1, 1e-4, true);
  EXPECT_GE(bc.expanding_rate, std::log(k.gamma_sampled));

  const auto xs = base_orbit_values(x, n), xps = base_orbit_values(xp, n);
  for_each_paired_path(MpFamily{}, x, xp, 0.5, n, [&](std::span<const std::uint8_t> w,
                                                       std::span<const double> a,
                                                       std::span<const double> b) {
    if (!is_good(w, m, 0.995, 1)) return;
    for (std::size_t j = 0; j <= n; ++j) {
      const double dist = circle_distance(xs[j], xps[j]) + circle_distance(a[j], b[j]);
      EXPECT_LE(dist, std::pow(bc.Q_emp, m) * std::exp(-bc.decay_rate * double(n - j)) *
                          bc.root_distance * (1 + 1e-9));
    }
  });
}
