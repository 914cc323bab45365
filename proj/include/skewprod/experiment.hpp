#pragma once

// Glue between ExperimentConfig and the checks: builds the check context and runs the full
// invariant suite with sizes taken from a VerifyPlan.

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "skewprod/checks.hpp"
#include "skewprod/config.hpp"

namespace skewprod {

/// Hypothesis constants for a config. Strict configs throw on the first failed inequality.
inline HypothesisConstants config_constants(const ExperimentConfig& cfg) {
  return estimate_constants(cfg.family, cfg.constants, cfg.sampling.hypothesis_samples, cfg.seed,
                            1e-4, !cfg.strict);
}

inline CheckContext make_context(const ExperimentConfig& cfg, const HypothesisConstants& constants) {
  CheckContext ctx;
  ctx.family = cfg.family;
  ctx.phi = cfg.potential;
  ctx.constants = constants;
  ctx.phi_opts.ny = cfg.grid.n_fiber;
  ctx.phi_opts.anchor = Anchor::delta(cfg.anchor_y);
  ctx.phi_opts.tau = cfg.tol.phi_tau;
  ctx.phi_opts.max_n = cfg.tol.phi_max_n;
  ctx.phi_tol = cfg.tol.phi_tol;
  ctx.cone.K = cfg.cone_K;
  ctx.cone.alpha = cfg.constants.alpha;
  ctx.n_theta = cfg.grid.n_theta;
  ctx.power_tol = cfg.tol.power_tol;
  ctx.max_iter = cfg.tol.max_iter;
  return ctx;
}

/// Sample sizes, depths and tolerances of the invariant suite.
struct VerifyPlan {
  std::vector<double> constants{0.0, 0.3};
  std::size_t constant_points = 20;
  std::size_t nx = 256, ny = 256, n_base = 512;

  std::size_t convergence_points = 10;
  std::size_t fit_lo = 5, fit_hi = 35, fit_ref = 80;
  double r2_min = 0.98;
  std::size_t anchor_from = 10;

  std::size_t cone_points = 5, cone_pairs = 50, cone_diameter_samples = 50, cone_grid = 512;

  std::size_t eigen_points = 10, eigen_functions = 10, eigen_lo = 15, eigen_hi = 30;
  double eigen_tol = 1e-6, eigen_factor = 3.0;

  double pressure_tol = 5e-3, pressure_shrink = 1.5;

  std::size_t intertwine_points = 10, intertwine_functions = 5, intertwine_depth = 30;
  double intertwine_tol = 1e-4;

  std::size_t disint_points = 10, disint_functions = 5, disint_nx = 256, disint_ny = 256,
              disint_base = 256, disint_depth = 30;
  double mass_tol = 1e-5, route_tol = 1e-3;

  std::size_t words_max = 16;
  std::vector<double> iotas{0.5, 0.75, 0.9, 0.995};
  std::size_t words_points = 3, words_n = 16;
  std::vector<std::size_t> words_m{1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t sandwich_n = 30;

  std::vector<std::size_t> holder_scales{4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::size_t holder_pairs = 16;

  /// Sizes from a config's grid and sampling sections; tolerances keep their defaults.
  static VerifyPlan from_config(const ExperimentConfig& cfg) {
    VerifyPlan p;
    const auto& g = cfg.grid;
    const auto& s = cfg.sampling;
    p.constants = {cfg.potential.constant()};
    if (cfg.potential.constant() != 0.3) p.constants.push_back(0.3);
    p.constant_points = 2 * s.base_points;
    p.nx = g.n_x;
    p.ny = g.n_y;
    p.n_base = g.n_base;
    p.convergence_points = s.base_points;
    p.cone_points = s.cone_points;
    p.cone_pairs = s.cone_pairs;
    p.cone_diameter_samples = s.cone_pairs;
    p.cone_grid = g.n_fiber;
    p.eigen_points = s.base_points;
    p.eigen_functions = s.test_functions;
    p.eigen_hi = s.fiber_depth;
    p.eigen_lo = std::max<std::size_t>(1, s.fiber_depth / 2);
    p.intertwine_points = s.base_points;
    p.intertwine_functions = std::max<std::size_t>(1, s.test_functions / 2);
    p.intertwine_depth = s.fiber_depth;
    p.disint_points = s.base_points;
    p.disint_functions = std::max<std::size_t>(1, s.test_functions / 2);
    p.disint_nx = g.n_x;
    p.disint_ny = g.n_y;
    p.disint_base = g.n_x;
    p.disint_depth = s.fiber_depth;
    p.words_max = std::min<std::size_t>(16, s.words_n);
    p.words_points = std::max<std::size_t>(1, std::min<std::size_t>(3, s.base_points));
    p.words_n = s.words_n;
    p.words_m = s.words_m;
    p.sandwich_n = std::min<std::size_t>(30, s.fiber_depth);
    p.holder_scales = s.holder_scales;
    p.holder_pairs = s.holder_pairs;
    return p;
  }
};

struct TimedResult {
  CheckResult result;
  double seconds = 0.0;
};

/// Runs the nine invariant checks in order. Random draws come from one generator seeded by
/// `seed`, so a fixed plan and seed reproduce every sample.
inline std::vector<TimedResult> run_verify(const CheckContext& ctx, const VerifyPlan& plan,
                                           std::uint64_t seed, PhiTable* table = nullptr) {
  std::mt19937_64 rng(seed);
  std::vector<TimedResult> out;
  auto timed = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r = fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.detail["seconds"] = dt;
    out.push_back({std::move(r), dt});
  };

  timed([&] {
    const auto xs = random_base_points(rng, plan.constant_points);
    CheckResult all{"constant potential closed forms", true};
    auto& cases = all.detail["cases"] = nlohmann::json::array();
    for (double c : plan.constants) {
      const CheckResult r = check_constant_potential(ctx, c, xs, plan.nx, plan.ny, plan.n_base);
      all.passed = all.passed && r.passed;
      cases.push_back(r.detail);
    }
    return all;
  });

  timed([&] {
    const auto xs = random_base_points(rng, plan.convergence_points);
    return check_phi_convergence(ctx, xs, plan.fit_lo, plan.fit_hi, plan.fit_ref, plan.r2_min,
                                 plan.anchor_from, table);
  });

  double M_emp = 0.0;
  timed([&] {
    const auto xs = random_base_points(rng, plan.cone_points);
    ConeCheckOutput c = check_cone_contraction(ctx, xs, plan.cone_pairs, plan.cone_diameter_samples,
                                               rng, plan.cone_grid);
    M_emp = c.M_emp_max;
    return c.result;
  });

  timed([&] {
    const auto xs = random_base_points(rng, plan.eigen_points);
    std::vector<GridFn> psis;
    for (std::size_t i = 0; i < plan.eigen_functions; ++i) {
      psis.push_back(random_fiber_test_function(rng, ctx.phi_opts.ny));
    }
    return check_eigen_equation(ctx, xs, psis, plan.eigen_lo, plan.eigen_hi, plan.eigen_tol,
                                plan.eigen_factor, table);
  });

  timed([&] {
    return check_pressure(ctx, plan.nx, plan.ny, plan.n_base, plan.pressure_tol, plan.pressure_shrink);
  });

  timed([&] {
    const auto xs = random_base_points(rng, plan.intertwine_points);
    std::vector<GridFn2D> psis;
    for (std::size_t i = 0; i < plan.intertwine_functions; ++i) {
      psis.push_back(random_torus_test_function(rng, plan.nx, ctx.phi_opts.ny));
    }
    return check_intertwining(ctx, xs, psis, plan.intertwine_depth, plan.intertwine_tol, table);
  });

  timed([&] {
    const auto xs = random_base_points(rng, plan.disint_points);
    std::vector<GridFn2D> psis;
    for (std::size_t i = 0; i < plan.disint_functions; ++i) {
      psis.push_back(random_torus_test_function(rng, plan.disint_nx, plan.disint_ny));
    }
    return check_disintegration(ctx, xs, psis, plan.disint_nx, plan.disint_ny, plan.disint_base,
                                plan.disint_depth, plan.mass_tol, plan.route_tol);
  });

  timed([&] {
    const auto xs = random_base_points(rng, plan.words_points);
    return check_words(ctx, plan.words_max, plan.iotas, xs, plan.words_n, plan.words_m, M_emp,
                       plan.sandwich_n, table);
  });

  timed([&] { return check_holder(ctx, plan.holder_scales, plan.holder_pairs, rng, table); });
  return out;
}

}  // namespace skewprod
