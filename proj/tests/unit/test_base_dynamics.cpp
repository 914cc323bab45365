#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "skewprod/base_dynamics.hpp"

using namespace skewprod;

TEST(BasePoint, DefaultIsZero) {
  BasePoint x;
  EXPECT_EQ(x.capacity(), BasePoint::kDefaultCapacity);
  EXPECT_EQ(x.value(), 0.0);
  EXPECT_EQ(x.key(), "");
}

TEST(BasePoint, DyadicMatchesRationalOrbit) {
  for (std::uint64_t a : {1u, 3u, 5u, 77u, 255u, 1000u}) {
    const unsigned k = 10;
    oracle::Dyadic r{a, k};
    BasePoint x = BasePoint::dyadic(a, k);
    for (int step = 0; step < 12; ++step) {
      EXPECT_EQ(x.value(), r.value()) << "a=" << a << " step=" << step;
      x = x.forward(1);
      r = r.forward();
    }
  }
}

TEST(BasePoint, PeriodicMatchesRationalOrbit) {
  // 5/7 = 0.(101) in binary.
  oracle::Periodic r{5, 3};
  BasePoint x = BasePoint::periodic("", "101");
  for (int step = 0; step < 30; ++step) {
    EXPECT_NEAR(x.value(), r.value(), 1e-15);
    x = x.forward(1);
    r = r.forward();
  }
}

TEST(BasePoint, ForwardConsumesCapacity) {
  BasePoint x = BasePoint::from_bits("1011", 8);
  EXPECT_EQ(x.forward(3).capacity(), 5u);
  EXPECT_EQ(x.forward(8).capacity(), 0u);
  try {
    (void)x.forward(9);
    FAIL() << "expected capacity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capacity_exhausted);
  }
}

TEST(BasePoint, PreimagesMapBack) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const BasePoint x = BasePoint::random(rng, 40);
    const auto pre = x.preimages();
    EXPECT_NEAR(pre[0].value(), 0.5 * x.value(), 1e-15);
    EXPECT_NEAR(pre[1].value(), 0.5 * (x.value() + 1.0), 1e-15);
    for (const auto& p : pre) {
      EXPECT_EQ(p.capacity(), x.capacity() + 1);
      EXPECT_EQ(p.forward(1), x);
    }
  }
}

TEST(BasePoint, ShiftAddsDyadicStep) {
  const BasePoint x = BasePoint::from_bits("0110", 16);
  EXPECT_DOUBLE_EQ(x.shifted(4).value(), x.value() + 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(x.shifted(3).value(), x.value() + 1.0 / 8.0);  // carries through two digits
  const BasePoint ones = BasePoint::from_bits("1111", 4);
  EXPECT_EQ(ones.shifted(4).value(), 0.0);  // wraps mod 1
  EXPECT_THROW((void)x.shifted(0), Error);
  EXPECT_THROW((void)x.shifted(17), Error);
}

TEST(BasePoint, KeyIgnoresCapacity) {
  EXPECT_EQ(BasePoint::from_bits("101", 10).key(), "101");
  EXPECT_EQ(BasePoint::from_bits("101", 10).key(), BasePoint::from_bits("10100", 64).key());
  EXPECT_EQ(BasePoint::dyadic(5, 3, 20).key(), "101");
}

TEST(BasePoint, RejectsBadDigits) {
  EXPECT_THROW((void)BasePoint::from_bits("10a1"), Error);
  EXPECT_THROW((void)BasePoint::dyadic(8, 3), Error);
}

TEST(BasePoint, ValueNeverReachesOne) {
  const BasePoint x = BasePoint::from_bits(std::string(128, '1'));
  EXPECT_LT(x.value(), 1.0);
}

TEST(BaseOrbit, ValuesFollowDoubling) {
  const BasePoint x = BasePoint::dyadic(3, 7);
  const auto v = base_orbit_values(x, 7);
  ASSERT_EQ(v.size(), 8u);
  oracle::Dyadic r{3, 7};
  for (double value : v) {
    EXPECT_EQ(value, r.value());
    r = r.forward();
  }
  EXPECT_THROW((void)base_orbit_values(BasePoint(4), 5), Error);
}

TEST(CircleDistance, WrapsAround) {
  EXPECT_DOUBLE_EQ(circle_distance(0.1, 0.9), 0.2);
  EXPECT_DOUBLE_EQ(circle_distance(0.25, 0.75), 0.5);
  EXPECT_DOUBLE_EQ(circle_distance(0.3, 1.3), 0.0);
  EXPECT_DOUBLE_EQ(wrap_unit(-0.25), 0.75);
}
