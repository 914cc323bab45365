#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/parallel.hpp"

namespace skewprod {

struct TrigTerm {
  int kx = 0;
  int ky = 0;
  double amplitude = 0.0;
};

/// phi(x, y) = constant + sum amplitude * cos(2 pi (kx x + ky y)).
class TrigPotential {
 public:
  TrigPotential() = default;
  explicit TrigPotential(double constant, std::vector<TrigTerm> terms = {})
      : terms_(std::move(terms)), constant_(constant) {
    for (const auto& t : terms_) {
      const double freq = std::abs(t.kx) + std::abs(t.ky);
      lipschitz_bound_ += 2.0 * std::numbers::pi * std::fabs(t.amplitude) * freq;
      amplitude_sum_ += std::fabs(t.amplitude);
    }
  }

  static TrigPotential constant_potential(double c) { return TrigPotential(c); }

  double operator()(double x, double y) const noexcept {
    double v = constant_;
    for (const auto& t : terms_) {
      v += t.amplitude * std::cos(2.0 * std::numbers::pi * (t.kx * x + t.ky * y));
    }
    return v;
  }

  const std::vector<TrigTerm>& terms() const noexcept { return terms_; }
  double constant() const noexcept { return constant_; }
  bool is_constant() const noexcept { return amplitude_sum_ == 0.0; }

  /// Upper bound for |phi|_Lip in the L1 metric on the torus.
  double lipschitz_bound() const noexcept { return lipschitz_bound_; }
  /// sup phi - inf phi <= 2 * amplitude_sum().
  double amplitude_sum() const noexcept { return amplitude_sum_; }

  TrigPotential shifted(double c) const { return TrigPotential(constant_ + c, terms_); }

 private:
  std::vector<TrigTerm> terms_;
  double constant_ = 0.0;
  double lipschitz_bound_ = 0.0;
  double amplitude_sum_ = 0.0;
};

inline double eval(const TrigPotential& phi, double x, double y) { return phi(x, y); }

/// S_n phi(x, y) = sum_{k=0}^{n-1} phi(F^k(x, y)).
inline double birkhoff_sum(const TrigPotential& phi, const MpFamily& family, const BasePoint& x,
                           double y, std::size_t n) {
  const auto xs = base_orbit_values(x, n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum += phi(xs[k], y);
    y = fiber_forward(family, xs[k], y);
  }
  return sum;
}

struct ConditionPReport {
  double sup_phi = 0.0;
  double inf_phi = 0.0;
  double exp_phi_seminorm = 0.0;  // grid estimate of |e^phi|_alpha
  double eps_phi = 0.0;
  bool oscillation_ok = false;    // sup - inf < eps_phi
  bool regularity_ok = false;     // |e^phi|_alpha < eps_phi e^{inf phi}
  bool eps_range_ok = false;      // 0 < eps_phi < log d - log q
  bool passed() const { return oscillation_ok && regularity_ok && eps_range_ok; }
};

/// Grid estimate of |e^phi|_alpha on the torus with the L1 metric (all node pairs).
inline double exp_potential_seminorm(const TrigPotential& phi, double alpha, std::size_t grid) {
  const std::size_t n = grid * grid;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      values[i * grid + j] = std::exp(phi(double(i) / grid, double(j) / grid));
    }
  }
  // Distances depend only on index offsets; tabulate 1 / d^alpha per offset pair.
  std::vector<double> inv_dist(n, 0.0);
  for (std::size_t dx = 0; dx < grid; ++dx) {
    for (std::size_t dy = 0; dy < grid; ++dy) {
      const double dist = circle_distance(0.0, double(dx) / grid) +
                          circle_distance(0.0, double(dy) / grid);
      inv_dist[dx * grid + dy] = dist > 0.0 ? std::pow(dist, -alpha) : 0.0;
    }
  }
  std::vector<double> partial(n, 0.0);
  parallel_for(n, [&](std::size_t a) {
    const std::size_t ai = a / grid, aj = a % grid;
    double best = 0.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t dx = (ai + grid - b / grid) % grid, dy = (aj + grid - b % grid) % grid;
      best = std::max(best, std::fabs(values[a] - values[b]) * inv_dist[dx * grid + dy]);
    }
    partial[a] = best;
  });
  double best = 0.0;
  for (double v : partial) best = std::max(best, v);
  return best;
}

/// Condition (P) on a grid: oscillation, Holder regularity of e^phi, and the range of eps_phi.
inline ConditionPReport check_condition_P(const TrigPotential& phi,
                                          const HypothesisConstants& constants,
                                          std::size_t grid = 128) {
  require(grid >= 2, "check_condition_P: grid too small");
  ConditionPReport r;
  r.eps_phi = constants.eps_phi;
  r.sup_phi = -std::numeric_limits<double>::infinity();
  r.inf_phi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const double v = phi(double(i) / grid, double(j) / grid);
      r.sup_phi = std::max(r.sup_phi, v);
      r.inf_phi = std::min(r.inf_phi, v);
    }
  }
  r.exp_phi_seminorm = phi.is_constant() ? 0.0 : exp_potential_seminorm(phi, constants.alpha, grid);
  r.oscillation_ok = r.sup_phi - r.inf_phi < constants.eps_phi;
  r.regularity_ok = r.exp_phi_seminorm < constants.eps_phi * std::exp(r.inf_phi);
  r.eps_range_ok = constants.eps_phi > 0.0 &&
                   constants.eps_phi < std::log(double(constants.d)) - std::log(double(constants.q));
  return r;
}

}  // namespace skewprod
