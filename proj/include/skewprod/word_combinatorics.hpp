#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/stats.hpp"

namespace skewprod {

namespace detail {
// Tolerance for comparing integer counts with iota * length.
inline constexpr double kCountSlack = 1e-9;
}  // namespace detail

/// Good: for every j with j m <= n, the last j m letters contain at most iota j m letters <= q.
/// Bad is the complement.
inline bool is_good(std::span<const std::uint8_t> w, std::size_t m, double iota, int q) {
  require(m >= 1, "is_good: m must be positive");
  require(iota > 0.0 && iota < 1.0, "is_good: iota must lie in (0,1)");
  const std::size_t n = w.size();
  std::size_t count = 0, seen = 0;
  for (std::size_t j = 1; j * m <= n; ++j) {
    for (; seen < j * m; ++seen) count += (w[n - 1 - seen] <= q) ? 1 : 0;
    if (double(count) > iota * double(j * m) + detail::kCountSlack) return false;
  }
  return true;
}

/// #{w in {1..d}^n : #{k : w_k <= q} >= iota n} by enumeration.
inline std::uint64_t count_I_exhaustive(double iota, std::size_t n, int q, int d) {
  require(d >= 2 && q >= 0 && q <= d && n >= 1, "count_I: bad alphabet");
  require(std::pow(double(d), double(n)) <= double(1u << 24), "count_I: d^n above 2^24");
  const double threshold = iota * double(n) - detail::kCountSlack;
  // Split on the first letter; the rest is an odometer over {1..d}^{n-1}.
  std::vector<std::uint64_t> partial(d, 0);
  parallel_for(std::size_t(d), [&](std::size_t first) {
    Word w(n, 1);
    w[0] = static_cast<std::uint8_t>(first + 1);
    std::size_t low = 0;
    for (auto c : w) low += (c <= q) ? 1 : 0;
    std::uint64_t hits = 0;
    while (true) {
      if (double(low) >= threshold) ++hits;
      std::size_t pos = n;
      while (pos > 1) {
        --pos;
        const bool was_low = w[pos] <= q;
        if (w[pos] < d) {
          ++w[pos];
          low += (w[pos] <= q ? 1 : 0) - (was_low ? 1 : 0);
          break;
        }
        w[pos] = 1;
        low += (1 <= q ? 1 : 0) - (was_low ? 1 : 0);
        if (pos == 1) {
          pos = 0;
          break;
        }
      }
      if (pos == 0 || n == 1) break;
    }
    partial[first] = hits;
  });
  std::uint64_t total = 0;
  for (auto h : partial) total += h;
  return total;
}

/// sum_{k >= ceil(iota n)} C(n,k) q^k (d-q)^{n-k}, exact in 64 bits.
inline std::uint64_t count_I_binomial(double iota, std::size_t n, int q, int d) {
  require(d >= 2 && q >= 0 && q <= d && n >= 1, "count_I: bad alphabet");
  require(double(n) * std::log2(double(d)) < 63.0, "count_I: d^n overflows 64 bits");
  const auto k_min = static_cast<std::size_t>(
      std::max(0.0, std::ceil(iota * double(n) - detail::kCountSlack)));
  const auto ipow = [](std::uint64_t b, std::size_t e) {
    std::uint64_t r = 1;
    while (e--) r *= b;
    return r;
  };
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(n, k), updated incrementally
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0) binom = binom * (n - k + 1) / k;
    if (k >= k_min) total += binom * ipow(q, k) * ipow(d - q, n - k);
  }
  return total;
}

inline std::uint64_t count_I(double iota, std::size_t n, int q, int d) {
  if (std::pow(double(d), double(n)) <= double(1u << 24)) return count_I_exhaustive(iota, n, q, d);
  return count_I_binomial(iota, n, q, d);
}

struct BadMassRow {
  std::size_t m = 0;
  std::uint64_t good_count = 0;
  std::uint64_t bad_count = 0;
  double good_mass = 0.0;
  double bad_mass = 0.0;
  double ratio = 0.0;  // bad_mass / good_mass
};

/// Walks the depth-n preimage tree of y under g_x^n, weights each leaf by e^{S_n phi}, and splits
/// the mass into good and bad words for every m in `ms`.
inline std::vector<BadMassRow> bad_mass_ratio(const TrigPotential& phi, const MpFamily& family,
                                              const BasePoint& x, double y, std::size_t n,
                                              const std::vector<std::size_t>& ms, double iota) {
  require(n >= 1 && n <= 22, "bad_mass_ratio: depth must lie in [1, 22]");
  const auto xs = base_orbit_values(x, n);
  std::vector<BadMassRow> rows(ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) rows[i].m = ms[i];
  for_each_preimage_path(family, x, y, n, [&](std::span<const std::uint8_t> w,
                                              std::span<const double> path) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += phi(xs[k], path[k]);
    const double weight = std::exp(s);
    for (auto& row : rows) {
      if (is_good(w, row.m, iota, MpFamily::neutral_branches)) {
        ++row.good_count;
        row.good_mass += weight;
      } else {
        ++row.bad_count;
        row.bad_mass += weight;
      }
    }
  });
  for (auto& row : rows) {
    if (row.good_count == 0) {
      fail(ErrorKind::empty_good_set, "bad_mass_ratio: no good words at m = " +
                                          std::to_string(row.m));
    }
    row.ratio = row.bad_mass / row.good_mass;
  }
  return rows;
}

/// Fits log ratio against m over rows with a nonzero ratio; returns the geometric base e^slope.
inline LineFit fit_bad_mass_decay(const std::vector<BadMassRow>& rows) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.ratio > 0.0) {
      xs.push_back(double(r.m));
      ys.push_back(std::log(r.ratio));
    }
  }
  return fit_line(xs, ys);
}

struct BranchContraction {
  bool degenerate = false;
  double decay_rate = 0.0;  // fitted -d log(distance ratio) / d(n-k); equals 2 c_emp
  double c_emp = 0.0;
  double Q_emp = 0.0;       // smallest Q with every ratio <= Q^m e^{-2 c_emp (n-k)}
  double r2 = 0.0;
  double root_distance = 0.0;  // d(f^n x, f^n x')
  std::size_t good_words = 0;
  double expanding_rate = 0.0;  // decay rate along the all-expanding word (d, ..., d)
};

/// Distances between paired partial preimages F^k(x, yb) and F^k(x', yb') along good words,
/// measured in the sum metric on the torus and divided by d(f^n x, f^n x').
inline BranchContraction good_branch_contraction(const MpFamily& family, const BasePoint& x,
                                                 const BasePoint& x_prime, double y,
                                                 std::size_t n, std::size_t m, double iota) {
  require(n >= 2 && n <= 22, "good_branch_contraction: depth must lie in [2, 22]");
  BranchContraction out;
  const auto bx = base_orbit_values(x, n);
  const auto bxp = base_orbit_values(x_prime, n);
  out.root_distance = circle_distance(bx[n], bxp[n]);
  if (out.root_distance == 0.0) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> lx, ly;
  std::vector<std::vector<double>> good_paths;
  std::vector<double> expanding;
  for_each_paired_path(family, x, x_prime, y, n,
                       [&](std::span<const std::uint8_t> w, std::span<const double> a,
                           std::span<const double> b) {
                         const bool all_expanding = std::all_of(
                             w.begin(), w.end(), [](auto c) { return c == MpFamily::degree; });
                         const bool good = is_good(w, m, iota, MpFamily::neutral_branches);
                         if (!good && !all_expanding) return;
                         std::vector<double> ratios(n + 1);
                         for (std::size_t k = 0; k <= n; ++k) {
                           const double dist = circle_distance(bx[k], bxp[k]) +
                                               circle_distance(a[k], b[k]);
                           ratios[k] = dist / out.root_distance;
                         }
                         if (all_expanding) expanding = ratios;
                         if (!good) return;
                         ++out.good_words;
                         for (std::size_t k = 0; k < n; ++k) {
                           if (ratios[k] > 0.0) {
                             lx.push_back(double(n - k));
                             ly.push_back(std::log(ratios[k]));
                           }
                         }
                         good_paths.push_back(std::move(ratios));
                       });
  if (lx.size() < 2) {
    out.degenerate = true;
    return out;
  }
  const LineFit line = fit_line(lx, ly);
  out.decay_rate = -line.slope;
  out.c_emp = 0.5 * out.decay_rate;
  out.r2 = line.r2;
  double envelope = 0.0;
  for (const auto& ratios : good_paths) {
    for (std::size_t k = 0; k <= n; ++k) {
      envelope = std::max(envelope, ratios[k] * std::exp(out.decay_rate * double(n - k)));
    }
  }
  out.Q_emp = std::pow(envelope, 1.0 / double(m));
  if (!expanding.empty() && expanding[0] > 0.0) {
    out.expanding_rate = -std::log(expanding[0]) / double(n);
  }
  return out;
}

}  // namespace skewprod
