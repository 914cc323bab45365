#include <algorithm>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skewprod/transfer_operator.hpp"

using namespace skewprod;

namespace {
MpFamily quadratic_family() {
  MpFamily f;
  f.p0 = 1.0;
  f.p1 = 0.0;
  f.delta_a = 0.3;
  return f;
}

// Periodic linear interpolation written independently of GridFn.
double lerp_periodic(const std::vector<double>& v, double y) {
  const std::size_t n = v.size();
  const double t = y * n;
  const std::size_t i = static_cast<std::size_t>(std::floor(t)) % n;
  const double frac = t - std::floor(t);
  return v[i] * (1 - frac) + v[(i + 1) % n] * frac;
}
}  // namespace

TEST(FiberKernel, MatchesQuadraticOracle) {
  const MpFamily f = quadratic_family();
  const TrigPotential phi(0.0, {{0, 1, 0.2}});
  const std::size_t n = 64;
  std::vector<double> psi(n);
  for (std::size_t j = 0; j < n; ++j) psi[j] = 2.0 + std::sin(2 * std::numbers::pi * j / n);
  std::vector<double> out(n);
  FiberKernel(phi, f, 0.3, n).apply(psi, out);
  for (std::size_t j = 0; j < n; ++j) {
    const auto [r1, r2] = oracle::quadratic_preimages(double(j) / n);
    const double expected = std::exp(phi(0.3, r1)) * lerp_periodic(psi, r1) +
                            std::exp(phi(0.3, r2)) * lerp_periodic(psi, r2);
    EXPECT_NEAR(out[j], expected, 1e-12) << j;
  }
}

TEST(FiberOperator, ConstantPotentialScalesConstants) {
  const GridFn one(32, 1.0);
  const GridFn out =
      apply_fiber_operator(TrigPotential::constant_potential(0.3), MpFamily{}, BasePoint(), one);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(out[j], 1.0, 1e-15);
  EXPECT_NEAR(out.log_offset, std::log(2.0) + 0.3, 1e-15);
}

TEST(FiberOperator, ConeSemanticsRejectNonpositive) {
  GridFn g(16, 1.0);
  for (std::size_t j = 0; j < 16; ++j) g[j] = -1.0;
  try {
    (void)apply_fiber_operator(TrigPotential(), MpFamily{}, BasePoint(), g, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::nonpositive_function);
  }
}

TEST(FiberCascade, MatchesRepeatedApplication) {
  MpFamily f;
  const TrigPotential phi(0.0, {{1, 1, 0.05}});
  const BasePoint x = BasePoint::from_bits("1001110101");
  const GridFn psi = GridFn::sample(64, [](double y) { return 1.5 + std::cos(2 * std::numbers::pi * y); });
  GridFn step = psi;
  BasePoint p = x;
  for (int k = 0; k < 5; ++k) {
    step = apply_fiber_operator(phi, f, p, step);
    p = p.forward(1);
  }
  const GridFn cascade = iterate_cascade(phi, f, x, psi, 5);
  EXPECT_NEAR(cascade.log_offset, step.log_offset, 1e-12);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(cascade[j], step[j], 1e-12);
}

TEST(FiberCascade, ThrowsWhenCapacityRunsOut) {
  const BasePoint x = BasePoint::from_bits("101", 3);
  EXPECT_THROW((void)iterate_cascade(TrigPotential(), MpFamily{}, x, GridFn(16), 4), Error);
}

TEST(SparseMatrix, TransposeIsAdjoint) {
  const auto op = FullTransferOperator(TrigPotential(0.0, {{1, 2, 0.1}}), MpFamily{}, 16, 16);
  const SparseMatrix& a = op.matrix();
  const SparseMatrix& at = op.adjoint_matrix();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(a.cols), w(a.rows), av(a.rows), atw(a.cols);
  for (auto& e : v) e = u(rng);
  for (auto& e : w) e = u(rng);
  a.multiply(v, av);
  at.multiply(w, atw);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < a.rows; ++i) lhs += av[i] * w[i];
  for (std::size_t i = 0; i < a.cols; ++i) rhs += v[i] * atw[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::fabs(lhs));
  // Transposing twice restores each row up to the order of its entries.
  const SparseMatrix back = at.transpose();
  ASSERT_EQ(back.row_start, a.row_start);
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::vector<std::pair<std::uint32_t, double>> x, y;
    for (std::size_t k = a.row_start[r]; k < a.row_start[r + 1]; ++k) x.emplace_back(a.col[k], a.val[k]);
    for (std::size_t k = back.row_start[r]; k < back.row_start[r + 1]; ++k) y.emplace_back(back.col[k], back.val[k]);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
  }
}

TEST(FullOperator, RowSumsForConstantPotential) {
  const FullTransferOperator op(TrigPotential::constant_potential(0.2), MpFamily{}, 32, 32);
  const GridFn2D out = op.apply(GridFn2D(32, 32, 1.0));
  for (double v : out.values()) EXPECT_NEAR(v, 1.0, 1e-14);
  EXPECT_NEAR(out.log_offset, std::log(4.0) + 0.2, 1e-14);
}

TEST(FullOperator, BaseOnlyFunctionsFollowDoubling) {
  // xi(x) on even-numbered refined preimages is read at nodes; odd ones at midpoints.
  const std::size_t nx = 32, ny = 16;
  const auto xi = [](double x) { return 2.0 + std::cos(2 * std::numbers::pi * x); };
  const GridFn2D psi = GridFn2D::sample(nx, ny, [&](double x, double) { return xi(x); });
  const FullTransferOperator op(TrigPotential(), MpFamily{}, nx, ny);
  std::vector<double> out(nx * ny);
  op.matrix().multiply(psi.values(), out);
  for (std::size_t i = 0; i < nx; ++i) {
    double expected = 0.0;
    for (std::size_t m : {i, i + nx}) {
      if (m % 2 == 0) {
        expected += 2.0 * xi(double(m / 2) / nx);
      } else {
        expected += 2.0 * 0.5 * (xi(double(m / 2) / nx) + xi(double(m / 2 + 1) / nx));
      }
    }
    for (std::size_t j = 0; j < ny; ++j) EXPECT_NEAR(out[i * ny + j], expected, 1e-12);
  }
}

TEST(BaseOperator, ConstantPhiDoublesWeight) {
  const BaseTransferOperator op(std::vector<double>(64, 0.4));
  const GridFn out = op.apply(GridFn(32, 1.0));
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(out[i], 1.0, 1e-15);
  EXPECT_NEAR(out.log_offset, std::log(2.0) + 0.4, 1e-15);
}

TEST(BaseOperator, FromFunctionUsesExactPreimages) {
  std::vector<double> seen;
  const auto op = BaseTransferOperator::from_function(16, [](const BasePoint& x) {
    return std::sin(2 * std::numbers::pi * x.value());
  });
  for (std::size_t m = 0; m < 32; ++m) {
    EXPECT_NEAR(op.phi_refined()[m], std::sin(2 * std::numbers::pi * m / 32.0), 1e-15);
  }
  EXPECT_THROW((void)BaseTransferOperator(std::vector<double>(20, 0.0)), Error);
}
