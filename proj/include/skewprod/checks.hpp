#pragma once

// Property checks over a configured system. Each returns a named pass/fail with the measured
// numbers attached; the CLI `verify` command and the acceptance runner both use them.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "skewprod/base_dynamics.hpp"
#include "skewprod/cone_metric.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/phi_potential.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/rpf_measures.hpp"
#include "skewprod/stats.hpp"
#include "skewprod/word_combinatorics.hpp"

namespace skewprod {

struct CheckResult {
  std::string name;
  bool passed = false;
  nlohmann::json detail = nlohmann::json::object();
};

/// The system under test plus the numerical settings shared by all checks.
struct CheckContext {
  MpFamily family{};
  TrigPotential phi{};
  HypothesisConstants constants{};
  PhiOptions phi_opts{};
  double phi_tol = 1e-12;
  ConeParams cone{};
  std::size_t n_theta = 64;
  double power_tol = 1e-10;
  std::size_t max_iter = 10000;
};

// ---------------------------------------------------------------------------
// Test-function generators
// ---------------------------------------------------------------------------

/// 1 + two random Fourier modes with total amplitude below 0.6.
template <class Rng>
GridFn random_fiber_test_function(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> freq(1, 4);
  const double a = 0.3 * unit(rng), b = 0.3 * unit(rng);
  const int k1 = freq(rng), k2 = freq(rng);
  const double t1 = 2.0 * std::numbers::pi * unit(rng), t2 = 2.0 * std::numbers::pi * unit(rng);
  return GridFn::sample(n, [=](double y) {
    return 1.0 + a * std::sin(2.0 * std::numbers::pi * k1 * y + t1) +
           b * std::cos(2.0 * std::numbers::pi * k2 * y + t2);
  });
}

/// 1 + a cos(2 pi (kx x + ky y) + t) + b sin(2 pi kx' x) cos(2 pi ky' y).
template <class Rng>
GridFn2D random_torus_test_function(Rng& rng, std::size_t nx, std::size_t ny) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> freq(0, 3);
  const double a = 0.4 * unit(rng), b = 0.3 * unit(rng);
  const int kx = freq(rng), ky = freq(rng) + 1, kx2 = freq(rng) + 1, ky2 = freq(rng);
  const double t = 2.0 * std::numbers::pi * unit(rng);
  return GridFn2D::sample(nx, ny, [=](double x, double y) {
    return 1.0 + a * std::cos(2.0 * std::numbers::pi * (kx * x + ky * y) + t) +
           b * std::sin(2.0 * std::numbers::pi * kx2 * x) * std::cos(2.0 * std::numbers::pi * ky2 * y);
  });
}

template <class Rng>
std::vector<BasePoint> random_base_points(Rng& rng, std::size_t count,
                                          std::size_t capacity = BasePoint::kDefaultCapacity) {
  std::vector<BasePoint> xs;
  for (std::size_t i = 0; i < count; ++i) xs.push_back(BasePoint::random(rng, capacity));
  return xs;
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// phi = c: Phi = log 2 + c at every point, and both operators have eigenvalue 4 e^c.
inline CheckResult check_constant_potential(const CheckContext& ctx, double c,
                                            std::span<const BasePoint> xs, std::size_t nx,
                                            std::size_t ny, std::size_t n_base) {
  CheckResult r{"constant potential closed forms"};
  const TrigPotential phi = TrigPotential::constant_potential(c);
  const double phi_expected = std::log(2.0) + c, lambda_expected = std::log(4.0) + c;
  double phi_err = 0.0;
  for (const auto& x : xs) {
    phi_err = std::max(phi_err, std::fabs(compute_phi(phi, ctx.family, x, 1e-12, ctx.phi_opts).value -
                                          phi_expected));
  }
  PhiEvaluator eval(phi, ctx.family, 1e-12, ctx.phi_opts);
  const RpfSolution base = rpf_base_solve(eval, n_base, ctx.power_tol, ctx.max_iter);
  const RpfSolution full = rpf_full_solve(phi, ctx.family, nx, ny, ctx.power_tol, ctx.max_iter);
  const double base_err = std::fabs(base.log_eigenvalue - lambda_expected);
  const double full_err = std::fabs(full.log_eigenvalue - lambda_expected);
  r.passed = phi_err <= 1e-9 && base_err <= 1e-8 && full_err <= 1e-8;
  r.detail = {{"c", c}, {"phi_max_error", phi_err}, {"base_log_eigenvalue_error", base_err},
              {"full_log_eigenvalue_error", full_err}, {"points", xs.size()}};
  return r;
}

/// Geometric convergence of Phi_n at each point and closeness of two anchors at the fitted rate.
/// Checked on n in [anchor_from, n_hi] with a 1e-13 roundoff allowance.
inline CheckResult check_phi_convergence(const CheckContext& ctx, std::span<const BasePoint> xs,
                                         std::size_t n_lo, std::size_t n_hi, std::size_t n_ref,
                                         double r2_min, std::size_t anchor_from,
                                         PhiTable* table = nullptr) {
  CheckResult r{"geometric convergence of Phi_n"};
  r.passed = true;
  double tau_max = 0.0, r2_min_seen = 1.0, c1_max = 0.0, anchor_excess = -1.0;
  std::size_t degenerate = 0;
  auto& rows = r.detail["points"] = nlohmann::json::array();
  PhiOptions uniform = ctx.phi_opts;
  uniform.anchor = Anchor::uniform();
  for (const auto& x : xs) {
    nlohmann::json row{{"x", x.value()}};
    ConvergenceFit fit;
    try {
      fit = fit_convergence_rate(ctx.phi, ctx.family, x, n_lo, n_hi, n_ref, ctx.phi_opts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_fit) throw;
      // Increments vanish from the start: the sequence is constant (constant potentials).
      const auto seq = phi_sequence(ctx.phi, ctx.family, x, n_hi, ctx.phi_opts);
      const bool constant = std::all_of(seq.begin(), seq.end(),
                                        [&](double v) { return std::fabs(v - seq[0]) <= 1e-13; });
      row["degenerate"] = true;
      row["constant_sequence"] = constant;
      if (!constant) r.passed = false;
      ++degenerate;
      rows.push_back(row);
      continue;
    }
    const auto delta = phi_sequence(ctx.phi, ctx.family, x, n_hi, ctx.phi_opts);
    const auto unif = phi_sequence(ctx.phi, ctx.family, x, n_hi, uniform);
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t n = anchor_from; n <= n_hi; ++n) {
      const double bound = fit.C1_emp * std::pow(fit.tau_emp, double(n)) + 1e-13;
      excess = std::max(excess, std::fabs(delta[n] - unif[n]) - bound);
    }
    const bool ok = fit.tau_emp < 1.0 && fit.r2 >= r2_min && excess <= 0.0;
    r.passed = r.passed && ok;
    tau_max = std::max(tau_max, fit.tau_emp);
    r2_min_seen = std::min(r2_min_seen, fit.r2);
    c1_max = std::max(c1_max, fit.C1_emp);
    anchor_excess = std::max(anchor_excess, excess);
    row.update({{"tau_emp", fit.tau_emp}, {"C1_emp", fit.C1_emp}, {"r2", fit.r2},
                {"points_fitted", fit.points}, {"phi", delta.back()}, {"anchor_excess", excess}});
    rows.push_back(row);
  }
  if (table && degenerate < xs.size()) {
    table->tau_emp = tau_max;
    table->C1_emp = c1_max;
  }
  r.detail.update({{"tau_emp_max", tau_max}, {"r2_min", r2_min_seen}, {"C1_emp_max", c1_max},
                   {"anchor_excess_max", anchor_excess}, {"degenerate_points", degenerate},
                   {"fit_range", {n_lo, n_hi}}, {"reference_depth", n_ref}});
  return r;
}

struct ConeCheckOutput {
  CheckResult result;
  double M_emp_max = 0.0;
};

/// Image diameter at each point from a mixed smooth/extremal sample; M_emp is the largest of
/// these, since the diameter bound is uniform in x. Every point must keep the images of
/// `pairs` smooth pairs inside Lambda_{zeta_emp K} with zeta_emp < 1, and every pair must
/// contract by tanh(M_emp / 4).
template <class Rng>
ConeCheckOutput check_cone_contraction(const CheckContext& ctx, std::span<const BasePoint> xs,
                                       std::size_t pairs, std::size_t diameter_samples, Rng& rng,
                                       std::size_t n = 512) {
  ConeCheckOutput out;
  CheckResult& r = out.result;
  r.name = "cone contraction";
  r.passed = true;

  struct PointData {
    ContractionReport rep;
    double zeta = 0.0;
    std::vector<double> before, after;
  };
  std::vector<PointData> data;
  for (const auto& x : xs) {
    PointData d;
    const auto diameter_pool = sample_cone_elements(rng, ctx.cone, n, diameter_samples);
    d.rep = image_diameter(ctx.phi, ctx.family, x, ctx.cone, diameter_pool, &ctx.constants,
                           ctx.n_theta);
    std::vector<GridFn> pool;
    for (std::size_t i = 0; i < 2 * pairs; ++i) pool.push_back(random_cone_element(rng, ctx.cone, n));
    std::vector<GridFn> images;
    const ContractionReport pair_rep = image_diameter(ctx.phi, ctx.family, x, ctx.cone, pool,
                                                      &ctx.constants, ctx.n_theta, &images);
    d.zeta = std::max(d.rep.zeta_emp, pair_rep.zeta_emp);
    for (std::size_t i = 0; i < pairs; ++i) {
      d.before.push_back(hilbert_distance(pool[2 * i], pool[2 * i + 1], ctx.cone, ctx.n_theta));
      d.after.push_back(hilbert_distance(images[2 * i], images[2 * i + 1], ctx.cone, ctx.n_theta));
    }
    out.M_emp_max = std::max(out.M_emp_max, d.rep.M_emp);
    data.push_back(std::move(d));
  }

  const double tau = std::tanh(out.M_emp_max / 4.0);
  auto& rows = r.detail["points"] = nlohmann::json::array();
  double worst_excess = -std::numeric_limits<double>::infinity(), zeta_max = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const PointData& d = data[k];
    double excess = -std::numeric_limits<double>::infinity(), ratio_max = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
      excess = std::max(excess, d.after[i] - (tau * d.before[i] + 1e-8));
      if (d.before[i] > 0.0) ratio_max = std::max(ratio_max, d.after[i] / d.before[i]);
    }
    r.passed = r.passed && d.zeta < 1.0 && excess <= 0.0;
    worst_excess = std::max(worst_excess, excess);
    zeta_max = std::max(zeta_max, d.zeta);
    rows.push_back({{"x", xs[k].value()}, {"M_emp_local", d.rep.M_emp}, {"zeta_emp", d.zeta},
                    {"zeta_bound", ctx.constants.zeta}, {"contraction_ratio_max", ratio_max},
                    {"excess", excess}});
  }
  r.detail.update({{"K", ctx.cone.K}, {"pairs_per_point", pairs},
                   {"diameter_samples", diameter_samples}, {"zeta_emp_max", zeta_max},
                   {"M_emp_max", out.M_emp_max}, {"tau", tau}, {"excess_max", worst_excess}});
  return out;
}

/// Fiber eigen-equation residual at depths n_lo < n_hi for every (point, test function).
/// Requires residual(n_hi) <= tol and residual(n_lo) >= factor * residual(n_hi) per case. For a
/// constant potential both sides agree exactly, so the decay requirement becomes 1e-10 at both.
inline CheckResult check_eigen_equation(const CheckContext& ctx, std::span<const BasePoint> xs,
                                        std::span<const GridFn> psis, std::size_t n_lo,
                                        std::size_t n_hi, double tol, double factor,
                                        PhiTable* table = nullptr) {
  CheckResult r{"fiber eigen-equation"};
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, table);
  std::vector<double> lo(xs.size() * psis.size()), hi(lo.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    const double phi_x = eval(xs[i]);
    for (std::size_t t = 0; t < psis.size(); ++t) {
      lo[i * psis.size() + t] =
          eigen_equation_residual(ctx.phi, ctx.family, xs[i], psis[t], n_lo, phi_x, ctx.phi_opts.anchor);
      hi[i * psis.size() + t] =
          eigen_equation_residual(ctx.phi, ctx.family, xs[i], psis[t], n_hi, phi_x, ctx.phi_opts.anchor);
    }
  });
  const bool exact = ctx.phi.is_constant();
  double hi_max = 0.0, lo_max = 0.0, ratio_min = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (std::size_t k = 0; k < lo.size(); ++k) {
    hi_max = std::max(hi_max, hi[k]);
    lo_max = std::max(lo_max, lo[k]);
    const double ratio = hi[k] > 0.0 ? lo[k] / hi[k] : std::numeric_limits<double>::infinity();
    ratio_min = std::min(ratio_min, ratio);
    if (exact) {
      ok = ok && lo[k] <= 1e-10 && hi[k] <= 1e-10;
    } else {
      ok = ok && hi[k] <= tol && ratio >= factor;
    }
  }
  r.passed = ok;
  r.detail = {{"depths", {n_lo, n_hi}}, {"residual_max_lo", lo_max}, {"residual_max_hi", hi_max},
              {"decay_ratio_min", std::isfinite(ratio_min) ? nlohmann::json(ratio_min) : nlohmann::json("inf")},
              {"cases", lo.size()}, {"constant_potential", exact}};
  return r;
}

struct PressureRun {
  double P_phi = 0.0;
  double P_Phi = 0.0;
  double gap = 0.0;
  std::size_t nx = 0, ny = 0, n_base = 0;
};

/// Pressures of phi (full operator) and of Phi (base operator); Phi uses an n_y fiber grid.
inline PressureRun pressure_run(const CheckContext& ctx, std::size_t nx, std::size_t ny,
                                std::size_t n_base, PhiTable* table = nullptr) {
  PhiOptions opts = ctx.phi_opts;
  opts.ny = ny;
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, opts, table);
  const RpfSolution full = rpf_full_solve(ctx.phi, ctx.family, nx, ny, ctx.power_tol, ctx.max_iter);
  const RpfSolution base = rpf_base_solve(eval, n_base, ctx.power_tol, ctx.max_iter);
  return {full.log_eigenvalue, base.log_eigenvalue,
          std::fabs(full.log_eigenvalue - base.log_eigenvalue), nx, ny, n_base};
}

/// Gap <= tol at the given grids, and at least `shrink` times smaller with every grid doubled.
/// A gap already below 1e-12 counts as exact agreement.
inline CheckResult check_pressure(const CheckContext& ctx, std::size_t nx, std::size_t ny,
                                  std::size_t n_base, double tol, double shrink) {
  CheckResult r{"pressure equality"};
  const PressureRun coarse = pressure_run(ctx, nx, ny, n_base);
  const PressureRun fine = pressure_run(ctx, 2 * nx, 2 * ny, 2 * n_base);
  const bool exact = coarse.gap <= 1e-12 && fine.gap <= 1e-12;
  const double ratio = fine.gap > 0.0 ? coarse.gap / fine.gap : std::numeric_limits<double>::infinity();
  r.passed = coarse.gap <= tol && (exact || ratio >= shrink);
  r.detail = {{"P_phi", coarse.P_phi}, {"P_Phi", coarse.P_Phi}, {"gap", coarse.gap},
              {"P_phi_refined", fine.P_phi}, {"P_Phi_refined", fine.P_Phi}, {"gap_refined", fine.gap},
              {"shrink", std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json("inf")},
              {"grids", {nx, ny, n_base}}};
  return r;
}

inline CheckResult check_intertwining(const CheckContext& ctx, std::span<const BasePoint> xs,
                                      std::span<const GridFn2D> psis, std::size_t n, double tol,
                                      PhiTable* table = nullptr) {
  CheckResult r{"intertwining"};
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, table);
  double worst = 0.0;
  for (const auto& psi : psis) {
    worst = std::max(worst, intertwine_residual(ctx.phi, ctx.family, psi, xs, n, eval, ctx.phi_opts.anchor));
  }
  r.passed = worst <= tol;
  r.detail = {{"residual_max", worst}, {"depth", n}, {"functions", psis.size()}, {"points", xs.size()}};
  return r;
}

/// mu_x(Y_x) = 1 at sample points and int Psi d mu by two routes (direct / conditional).
inline CheckResult check_disintegration(const CheckContext& ctx, std::span<const BasePoint> xs,
                                        std::span<const GridFn2D> psis, std::size_t nx,
                                        std::size_t ny, std::size_t n_base, std::size_t n,
                                        double mass_tol, double route_tol) {
  CheckResult r{"disintegration"};
  PhiOptions opts = ctx.phi_opts;
  opts.ny = ny;
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, opts);
  const RpfSolution full = rpf_full_solve(ctx.phi, ctx.family, nx, ny, ctx.power_tol, ctx.max_iter);
  const RpfSolution base = rpf_base_solve(eval, n_base, ctx.power_tol, ctx.max_iter);
  const GridFn one(ny, 1.0);
  std::vector<double> mass(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    mass[i] = conditional_integrate(ctx.phi, ctx.family, xs[i], one, full, base, n, opts.anchor);
  });
  double mass_err = 0.0;
  for (double m : mass) mass_err = std::max(mass_err, std::fabs(m - 1.0));
  const auto routes = disintegration_routes(ctx.phi, ctx.family, psis, full, base, n, opts.anchor);
  double route_err = 0.0;
  auto& rows = r.detail["routes"] = nlohmann::json::array();
  for (const auto& rt : routes) {
    route_err = std::max(route_err, std::fabs(rt.direct - rt.conditional));
    rows.push_back({{"direct", rt.direct}, {"conditional", rt.conditional}});
  }
  r.passed = mass_err <= mass_tol && route_err <= route_tol;
  r.detail.update({{"mass_error_max", mass_err}, {"route_difference_max", route_err},
                   {"grids", {nx, ny, n_base}}, {"depth", n}});
  return r;
}

/// Counting identity for n <= n_max, bad-mass decay in m against theta, and the sandwich
/// e^{-M} <= L_x^n 1 e^{-S_n Phi} <= e^{M} for n <= sandwich_n.
inline CheckResult check_words(const CheckContext& ctx, std::size_t n_max,
                               const std::vector<double>& iotas, std::span<const BasePoint> xs,
                               std::size_t words_n, const std::vector<std::size_t>& ms,
                               double M_emp, std::size_t sandwich_n, PhiTable* table = nullptr) {
  CheckResult r{"word lemmas"};
  bool counts_ok = true;
  std::size_t comparisons = 0;
  for (double iota : iotas) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      counts_ok = counts_ok && count_I_exhaustive(iota, n, MpFamily::neutral_branches, MpFamily::degree) ==
                                   count_I_binomial(iota, n, MpFamily::neutral_branches, MpFamily::degree);
      ++comparisons;
    }
  }
  double base_max = 0.0;
  auto& fits = r.detail["bad_mass"] = nlohmann::json::array();
  for (const auto& x : xs) {
    const auto rows = bad_mass_ratio(ctx.phi, ctx.family, x, ctx.phi_opts.anchor.y, words_n, ms,
                                     ctx.constants.iota);
    const LineFit fit = fit_bad_mass_decay(rows);
    base_max = std::max(base_max, std::exp(fit.slope));
    fits.push_back({{"x", x.value()}, {"base", std::exp(fit.slope)}, {"r2", fit.r2}});
  }
  const bool decay_ok = base_max <= ctx.constants.theta + 0.1;

  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, table);
  double lo = 0.0, hi = 0.0;
  for (const auto& x : xs) {
    for (const auto& row : sandwich_profile(ctx.phi, ctx.family, x, sandwich_n, eval)) {
      lo = std::min(lo, row.log_min);
      hi = std::max(hi, row.log_max);
    }
  }
  const bool sandwich_ok = lo >= -M_emp && hi <= M_emp;
  r.passed = counts_ok && decay_ok && sandwich_ok;
  r.detail.update({{"count_comparisons", comparisons}, {"counts_match", counts_ok},
                   {"bad_mass_base_max", base_max}, {"theta", ctx.constants.theta},
                   {"sandwich_log_range", {lo, hi}}, {"M_emp", M_emp}});
  return r;
}

/// Positive Holder exponent with per-scale ratios within a factor 2 of their median. A constant
/// Phi (all medians below 1e-12) passes as the degenerate case.
template <class Rng>
CheckResult check_holder(const CheckContext& ctx, const std::vector<std::size_t>& ks,
                         std::size_t pairs, Rng& rng, PhiTable* table = nullptr) {
  CheckResult r{"Holder regularity of Phi"};
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, table);
  const HolderEstimate est = estimate_holder(eval, ks, pairs, rng);
  r.detail = {{"scales", est.scales}, {"medians", est.medians}, {"degenerate", est.degenerate}};
  if (est.degenerate) {
    r.passed = std::all_of(est.medians.begin(), est.medians.end(), [](double m) { return m <= 1e-12; });
    return r;
  }
  const double mid = median(est.ratios);
  double spread = 0.0;
  for (double q : est.ratios) spread = std::max({spread, q / mid, mid / q});
  r.passed = est.exponent_emp > 0.0 && spread <= 2.0;
  r.detail.update({{"exponent_emp", est.exponent_emp}, {"seminorm_emp", est.seminorm_emp},
                   {"r2", est.r2}, {"ratios", est.ratios}, {"ratio_spread", spread}});
  return r;
}

}  // namespace skewprod
