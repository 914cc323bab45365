#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"

namespace skewprod {

// ---------------------------------------------------------------------------
// Single Manneville-Pomeau map y -> y + y^{p+1} mod 1, parametrised by the exponent p.
// ---------------------------------------------------------------------------
namespace mp {

inline double lift(double p, double y) { return y + std::pow(y, p + 1.0); }

inline double derivative(double p, double y) { return 1.0 + (p + 1.0) * std::pow(y, p); }

/// Root of lift(p, y) = target in [lo, hi]. lift is increasing and convex, so Newton started
/// at a point with lift >= target descends monotonically onto the root; the bracket only
/// guards against rounding.
inline double solve_lift(double p, double target, double lo, double hi, double tol) {
  double y = hi;
  for (int it = 0; it < 200; ++it) {
    const double yp = std::pow(y, p);
    const double residual = y + y * yp - target;
    if (residual == 0.0) return y;
    if (residual < 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    double next = y - residual / (1.0 + (p + 1.0) * yp);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - y) <= tol || hi - lo <= tol) return next;
    y = next;
  }
  return 0.5 * (lo + hi);
}

/// The point c in (0,1) with c + c^{p+1} = 1 separating the two monotone branches.
inline double boundary(double p, double tol = 1e-13) { return solve_lift(p, 1.0, 0.0, 1.0, tol); }

/// Inverse branches of t: [0] in [0, c) (neutral branch), [1] in [c, 1).
inline std::array<double, 2> inverse(double p, double t, double c, double tol) {
  const double y1 = t <= 0.0 ? 0.0 : solve_lift(p, t, 0.0, std::min(t, c), tol);
  const double y2 = solve_lift(p, t + 1.0, c, 1.0, tol);
  return {y1, y2};
}

}  // namespace mp

/// The fiber family g_x(y) = y + y^{p(x)+1} mod 1 with p(x) = p0 + p1 (1 - cos 2 pi x) / 2.
struct MpFamily {
  static constexpr int degree = 2;            // d
  static constexpr int neutral_branches = 1;  // q

  double p0 = 0.5;
  double p1 = 0.5;
  double delta_a = 0.1;  // neutral region A = { |y| < delta_a mod 1 }
  double root_tol = 1e-13;

  double exponent(double x) const {
    return p0 + p1 * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x));
  }
  double exponent(const BasePoint& x) const { return exponent(x.value()); }

  /// dp/dx; the profile is Lipschitz with constant pi * p1.
  double exponent_slope(double x) const {
    return p1 * std::numbers::pi * std::sin(2.0 * std::numbers::pi * x);
  }

  bool in_neutral_region(double y) const { return circle_distance(y, 0.0) < delta_a; }

  void validate() const {
    if (!(p0 > 0.0)) fail(ErrorKind::invalid_argument, "MpFamily: p0 must be positive");
    if (!(p1 >= 0.0)) fail(ErrorKind::invalid_argument, "MpFamily: p1 must be nonnegative");
    if (!(root_tol > 0.0)) fail(ErrorKind::invalid_argument, "MpFamily: root_tol must be positive");
    // c(p) increases with p, so the smallest boundary sits at p0.
    if (!(delta_a > 0.0 && delta_a < mp::boundary(p0, root_tol))) {
      fail(ErrorKind::invalid_argument,
           "MpFamily: delta_a must lie in (0, branch boundary at p0)");
    }
  }
};

inline double fiber_forward(const MpFamily& family, double x, double y) {
  const double z = mp::lift(family.exponent(x), y);
  return z >= 1.0 ? wrap_unit(z) : z;
}

inline double fiber_forward(const MpFamily& family, const BasePoint& x, double y) {
  return fiber_forward(family, x.value(), y);
}

inline double branch_boundary(const MpFamily& family, const BasePoint& x) {
  return mp::boundary(family.exponent(x), family.root_tol);
}

/// (y1, y2): y1 on the neutral branch [0, c_x), y2 on the expanding branch [c_x, 1).
inline std::array<double, 2> fiber_inverse_branches(const MpFamily& family, double x, double t) {
  require(t >= 0.0 && t < 1.0, "fiber_inverse_branches: t must lie in [0,1)");
  const double p = family.exponent(x);
  return mp::inverse(p, t, mp::boundary(p, family.root_tol), family.root_tol);
}

inline std::array<double, 2> fiber_inverse_branches(const MpFamily& family, const BasePoint& x,
                                                    double t) {
  return fiber_inverse_branches(family, x.value(), t);
}

// ---------------------------------------------------------------------------
// Preimage trees
// ---------------------------------------------------------------------------

/// Branch labels in {1, ..., d}. Letter i (1-based) is the branch taken by F^{i-1}(x, y_w),
/// so letter 1 belongs to the deepest preimage and letter n to the first pull-back of y.
using Word = std::vector<std::uint8_t>;

namespace detail {

struct FiberLevel {
  double p;
  double boundary;
};

inline std::vector<FiberLevel> orbit_levels(const MpFamily& family, const BasePoint& x,
                                            std::size_t n) {
  const auto xs = base_orbit_values(x, n);
  std::vector<FiberLevel> levels(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = family.exponent(xs[k]);
    levels[k] = {p, mp::boundary(p, family.root_tol)};
  }
  return levels;
}

/// Depth-first walk over the d^n words. `paths[t][k]` is the fiber coordinate of
/// F^k(x_t, y_w) for tree t; `paths[t][n] = y`.
template <std::size_t Trees, class Visitor>
void preimage_dfs(const std::array<std::vector<FiberLevel>, Trees>& levels, double y,
                  std::size_t n, double tol, Visitor& visit) {
  std::array<std::vector<double>, Trees> paths;
  for (auto& p : paths) p.assign(n + 1, 0.0);
  for (auto& p : paths) p[n] = y;
  Word word(n, 0);
  std::function<void(std::size_t)> descend = [&](std::size_t level) {
    if (level == 0) {
      visit(std::span<const std::uint8_t>(word),
            std::span<const std::vector<double>, Trees>(paths));
      return;
    }
    const std::size_t k = level - 1;
    std::array<std::array<double, 2>, Trees> pre;
    for (std::size_t t = 0; t < Trees; ++t) {
      const auto& lv = levels[t][k];
      pre[t] = mp::inverse(lv.p, paths[t][level], lv.boundary, tol);
    }
    for (std::uint8_t b = 0; b < 2; ++b) {
      word[k] = static_cast<std::uint8_t>(b + 1);
      for (std::size_t t = 0; t < Trees; ++t) paths[t][k] = pre[t][b];
      descend(k);
    }
  };
  descend(n);
}

}  // namespace detail

/// Visits every n-step preimage of y under g_x^n. visitor(word, path) with path[k] the fiber
/// coordinate after k forward steps.
template <class Visitor>
void for_each_preimage_path(const MpFamily& family, const BasePoint& x, double y, std::size_t n,
                            Visitor&& visitor) {
  std::array<std::vector<detail::FiberLevel>, 1> levels{detail::orbit_levels(family, x, n)};
  auto adapter = [&](std::span<const std::uint8_t> w, std::span<const std::vector<double>, 1> p) {
    visitor(w, std::span<const double>(p[0]));
  };
  detail::preimage_dfs<1>(levels, y, n, family.root_tol, adapter);
}

/// As for_each_preimage_path, walking the trees of x and x' in lockstep; leaves sharing a word
/// are paired (branch-index pairing).
template <class Visitor>
void for_each_paired_path(const MpFamily& family, const BasePoint& x, const BasePoint& x_prime,
                          double y, std::size_t n, Visitor&& visitor) {
  std::array<std::vector<detail::FiberLevel>, 2> levels{detail::orbit_levels(family, x, n),
                                                        detail::orbit_levels(family, x_prime, n)};
  auto adapter = [&](std::span<const std::uint8_t> w, std::span<const std::vector<double>, 2> p) {
    visitor(w, std::span<const double>(p[0]), std::span<const double>(p[1]));
  };
  detail::preimage_dfs<2>(levels, y, n, family.root_tol, adapter);
}

struct PairedLeaf {
  Word word;
  double y = 0.0;        // preimage in the fiber over x
  double y_prime = 0.0;  // preimage in the fiber over x'
};

/// All d^n paired preimages of y under g_x^n and g_{x'}^n, in lexicographic word order.
inline std::vector<PairedLeaf> paired_preimage_trees(const MpFamily& family, const BasePoint& x,
                                                     const BasePoint& x_prime, double y,
                                                     std::size_t n) {
  require(n <= 24, "paired_preimage_trees: depth too large to materialise");
  std::vector<PairedLeaf> leaves;
  leaves.reserve(std::size_t{1} << n);
  for_each_paired_path(family, x, x_prime, y, n,
                       [&](std::span<const std::uint8_t> w, std::span<const double> a,
                           std::span<const double> b) {
                         leaves.push_back({Word(w.begin(), w.end()), a[0], b[0]});
                       });
  return leaves;
}

// ---------------------------------------------------------------------------
// Hypothesis constants
// ---------------------------------------------------------------------------

/// Free parameters of the standing assumptions; gamma and L come from the dynamics.
struct HypothesisInputs {
  double alpha = 1.0;
  double eps_phi = 0.04;
  double iota = 0.995;
  double eps = 0.05;
};

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool passed = false;
};

struct HypothesisConstants {
  int d = 2;
  int dhat = 2;
  int dbar = 4;
  int q = 1;
  double gamma = 0.0;
  double L = 1.0;
  double alpha = 1.0;
  double eps_phi = 0.0;
  double s = 0.0;
  double zeta = 0.0;
  double theta = 0.0;
  double iota = 0.0;
  double c = 0.0;
  double eps = 0.0;
  double diam_y = 0.5;

  // Sampling provenance (estimate_constants only).
  double gamma_sampled = 0.0;
  double L_sampled = 0.0;
  std::size_t samples = 0;
  double pair_distance = 0.0;
  bool exploratory = false;

  std::vector<InequalityCheck> checks;

  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }

  const InequalityCheck* first_failure() const {
    for (const auto& c : checks) {
      if (!c.passed) return &c;
    }
    return nullptr;
  }
};

/// Exponential growth rate of #{w in {1..d}^n : at least iota*n letters <= q}.
inline double neutral_word_growth_rate(double iota, int q, int d) {
  const double share = double(q) / double(d);
  if (iota <= share) return std::log(double(d));
  if (iota >= 1.0) return std::log(double(q));
  const double entropy = -iota * std::log(iota) - (1.0 - iota) * std::log(1.0 - iota);
  return entropy + iota * std::log(double(q)) + (1.0 - iota) * std::log(double(d - q));
}

/// Fills s, zeta, theta, c from (d, q, gamma, L) and the free parameters, and evaluates every
/// standing inequality.
inline HypothesisConstants derive_constants(int d, int q, double gamma, double L,
                                            const HypothesisInputs& in, double diam_y = 0.5) {
  HypothesisConstants k;
  k.d = d;
  k.q = q;
  k.dbar = k.dhat * d;
  k.gamma = gamma;
  k.L = L;
  k.alpha = in.alpha;
  k.eps_phi = in.eps_phi;
  k.iota = in.iota;
  k.eps = in.eps;
  k.diam_y = diam_y;

  const double a = in.alpha;
  k.s = std::exp(in.eps_phi) * ((d - q) * std::pow(gamma, -a) + q * std::pow(L, a)) / d;
  k.zeta = k.s + 2.0 * k.s * in.eps_phi * std::pow(diam_y, a);
  k.theta = q * std::exp(in.eps) * std::exp(in.eps_phi) / d;
  const double average = std::pow(gamma, -(1.0 - in.iota)) * std::pow(L, in.iota);
  k.c = average < 1.0 && average > 0.0 ? -0.25 * std::log(average)
                                       : std::numeric_limits<double>::quiet_NaN();

  auto add = [&](std::string name, double lhs, double rhs, bool ok) {
    k.checks.push_back({std::move(name), lhs, rhs, ok});
  };
  add("gamma > 1", gamma, 1.0, gamma > 1.0);
  add("L >= 1", L, 1.0, L >= 1.0);
  add("0 < alpha <= 1", a, 1.0, a > 0.0 && a <= 1.0);
  add("q < d", q, d, q >= 1 && q < d);
  const double eps_phi_cap = std::log(double(d)) - std::log(double(q));
  add("0 < eps_phi < log d - log q", in.eps_phi, eps_phi_cap,
      in.eps_phi > 0.0 && in.eps_phi < eps_phi_cap);
  add("s < 1", k.s, 1.0, k.s < 1.0);
  add("zeta < 1", k.zeta, 1.0, k.zeta < 1.0);
  add("theta < 1", k.theta, 1.0, k.theta < 1.0);
  add("0 < iota < 1", in.iota, 1.0, in.iota > 0.0 && in.iota < 1.0);
  const double growth = neutral_word_growth_rate(in.iota, q, d);
  add("word growth rate < log q + eps", growth, std::log(double(q)) + in.eps,
      growth < std::log(double(q)) + in.eps);
  add("gamma^-(1-iota) L^iota < e^{-2c} < 1", average, 1.0, average > 0.0 && average < 1.0);
  return k;
}

/// Samples the local inverse Lipschitz behaviour of F at separation `pair_distance` (L1 metric
/// on the torus). gamma is the smallest expansion ratio over paired preimages with both fiber
/// coordinates outside the neutral region; L the largest inverse ratio over pairs touching it.
/// Throws hypothesis_violated on the first failed inequality unless `exploratory`.
inline HypothesisConstants estimate_constants(const MpFamily& family, const HypothesisInputs& in,
                                              std::size_t samples, std::uint64_t seed,
                                              double pair_distance = 1e-4,
                                              bool exploratory = false) {
  family.validate();
  require(samples >= 1000, "estimate_constants: at least 1000 samples required");
  require(pair_distance > 0.0 && pair_distance < 1e-2, "estimate_constants: bad pair distance");
  std::mt19937_64 rng(seed);
  const double margin = 2.0 * pair_distance;
  std::uniform_real_distribution<double> coord(margin, 1.0 - margin);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution sign(0.5);

  double gamma = std::numeric_limits<double>::infinity();
  double inverse_sup = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = coord(rng), y = coord(rng);
    const double share = unit(rng);
    const double dx = (sign(rng) ? 1.0 : -1.0) * share * pair_distance;
    const double dy = (sign(rng) ? 1.0 : -1.0) * (1.0 - share) * pair_distance;
    const double x2 = x + dx, y2 = y + dy;
    const double image_distance = std::fabs(dx) + std::fabs(dy);
    for (int b = 0; b < 2; ++b) {
      const double xb = 0.5 * (x + b), xb2 = 0.5 * (x2 + b);
      const auto pre = fiber_inverse_branches(family, xb, y);
      const auto pre2 = fiber_inverse_branches(family, xb2, y2);
      for (int k = 0; k < 2; ++k) {
        const double pre_distance =
            circle_distance(xb, xb2) + circle_distance(pre[k], pre2[k]);
        if (pre_distance <= 0.0) continue;
        const double ratio = image_distance / pre_distance;
        if (!family.in_neutral_region(pre[k]) && !family.in_neutral_region(pre2[k])) {
          gamma = std::min(gamma, ratio);
        } else {
          inverse_sup = std::max(inverse_sup, 1.0 / ratio);
        }
      }
    }
  }
  HypothesisConstants k = derive_constants(MpFamily::degree, MpFamily::neutral_branches, gamma,
                                           std::max(1.0, inverse_sup), in);
  k.gamma_sampled = gamma;
  k.L_sampled = inverse_sup;
  k.samples = samples;
  k.pair_distance = pair_distance;
  k.exploratory = exploratory;
  if (!exploratory) {
    if (const auto* bad = k.first_failure()) {
      fail(ErrorKind::hypothesis_violated, "hypothesis violated: " + bad->name);
    }
  }
  return k;
}

}  // namespace skewprod
