#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/phi_potential.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/transfer_operator.hpp"

namespace skewprod {

// ---------------------------------------------------------------------------
// Fiber measures nu_{x,n}: psi -> <L_x^n psi, sigma> / <L_x^n 1, sigma>
// ---------------------------------------------------------------------------

class FiberMeasure {
 public:
  FiberMeasure(const TrigPotential& phi, const MpFamily& family, BasePoint x, std::size_t n,
               Anchor anchor = {})
      : phi_(phi), family_(family), x_(std::move(x)), n_(n), anchor_(anchor) {
    if (x_.capacity() < n_) fail(ErrorKind::capacity_exhausted, "FiberMeasure: capacity < n");
  }

  const BasePoint& x() const noexcept { return x_; }
  std::size_t depth() const noexcept { return n_; }
  const Anchor& anchor() const noexcept { return anchor_; }

  /// Integrates several functions with one cascade. All must share the grid size.
  std::vector<double> integrate_many(std::span<const GridFn> psis) const {
    require(!psis.empty(), "FiberMeasure: nothing to integrate");
    const std::size_t ny = psis.front().size();
    std::vector<GridFn> work;
    std::vector<char> zero(psis.size(), 0);
    work.reserve(psis.size() + 1);
    work.emplace_back(ny, 1.0);
    for (std::size_t i = 0; i < psis.size(); ++i) {
      require(psis[i].size() == ny, "FiberMeasure: grid size mismatch");
      zero[i] = std::all_of(psis[i].values().begin(), psis[i].values().end(),
                            [](double v) { return v == 0.0; });
      work.push_back(zero[i] ? GridFn(ny, 1.0) : psis[i]);
    }
    std::vector<GridFn*> ptrs;
    for (auto& g : work) ptrs.push_back(&g);
    FiberCascade cascade(phi_, family_, x_, ny);
    for (std::size_t k = 0; k < n_; ++k) cascade.advance(ptrs);
    const double one = anchor_.shape_pairing(work[0]);
    std::vector<double> out(psis.size());
    for (std::size_t i = 0; i < psis.size(); ++i) {
      out[i] = zero[i] ? 0.0
                       : std::exp(work[i + 1].log_offset - work[0].log_offset) *
                             anchor_.shape_pairing(work[i + 1]) / one;
    }
    return out;
  }

  double integrate(const GridFn& psi) const { return integrate_many({&psi, 1}).front(); }

 private:
  TrigPotential phi_;
  MpFamily family_;
  BasePoint x_;
  std::size_t n_;
  Anchor anchor_;
};

inline double fiber_integrate(const TrigPotential& phi, const MpFamily& family,
                              const BasePoint& x, const GridFn& psi, std::size_t n,
                              Anchor anchor = {}) {
  return FiberMeasure(phi, family, x, n, anchor).integrate(psi);
}

/// |int L_x psi d nu_{fx,n} - e^{Phi(x)} int psi d nu_{x,n+1}|.
inline double eigen_equation_residual(const TrigPotential& phi, const MpFamily& family,
                                      const BasePoint& x, const GridFn& psi, std::size_t n,
                                      double phi_x, Anchor anchor = {}) {
  if (x.capacity() < n + 1) fail(ErrorKind::capacity_exhausted, "eigen residual: capacity");
  GridFn pushed(psi.size(), 0.0);
  FiberKernel(phi, family, x.value(), psi.size()).apply(psi.values(), pushed.values());
  pushed.log_offset = psi.log_offset;
  const double lhs = fiber_integrate(phi, family, x.forward(1), pushed, n, anchor);
  const double rhs = std::exp(phi_x) * fiber_integrate(phi, family, x, psi, n + 1, anchor);
  return std::fabs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

struct PowerResult {
  double log_eigenvalue = 0.0;
  std::vector<double> vector;  // positive, sums to 1
  double residual = 0.0;       // |A v - lambda v|_inf / |v|_inf
  std::size_t iterations = 0;
};

/// Dominant eigenpair of a nonnegative matrix. Stops once the log-eigenvalue moves by at most
/// `tol` and the sum-normalised vector by at most 10 tol (relative sup norm).
inline PowerResult power_iterate(const SparseMatrix& a, std::vector<double> v, double tol,
                                 std::size_t max_iter) {
  require(a.rows == a.cols && v.size() == a.rows, "power_iterate: shape mismatch");
  const auto normalise = [](std::vector<double>& u) {
    const double s = std::accumulate(u.begin(), u.end(), 0.0);
    if (!(s > 0.0) || !std::isfinite(s)) {
      fail(ErrorKind::nonpositive_function, "power_iterate: iterate lost positivity");
    }
    for (double& e : u) e /= s;
    return s;
  };
  normalise(v);
  std::vector<double> w(v.size());
  PowerResult out;
  double prev_log = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    a.multiply(v, w);
    const double log_lambda = std::log(normalise(w));
    double change = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      change = std::max(change, std::fabs(w[i] - v[i]));
      vmax = std::max(vmax, w[i]);
    }
    std::swap(v, w);
    if (std::fabs(log_lambda - prev_log) <= tol && change <= 10.0 * tol * vmax) {
      out.log_eigenvalue = log_lambda;
      out.iterations = it;
      a.multiply(v, w);
      const double lambda = std::exp(log_lambda);
      double res = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        res = std::max(res, std::fabs(w[i] - lambda * v[i]));
        vmax = std::max(vmax, v[i]);
      }
      out.residual = res / vmax;
      out.vector = std::move(v);
      return out;
    }
    prev_log = log_lambda;
  }
  fail(ErrorKind::no_convergence,
       "power_iterate: no convergence after " + std::to_string(max_iter) + " iterations");
}

/// Eigendata of a discretised transfer operator: L h = lambda h, L* nu = lambda nu, with nu a
/// probability vector of node weights and sum h_i nu_i = 1.
struct RpfSolution {
  double log_eigenvalue = 0.0;
  std::vector<double> eigenfunction;
  std::vector<double> weights;
  std::size_t nx = 0;
  std::size_t ny = 1;  // 1 for base solutions
  double residual = 0.0;
  double adjoint_residual = 0.0;
  std::size_t iterations = 0;
  std::size_t adjoint_iterations = 0;

  GridFn base_function() const {
    require(ny == 1, "RpfSolution: not a base solution");
    GridFn g(nx, 0.0);
    std::copy(eigenfunction.begin(), eigenfunction.end(), g.values().begin());
    return g;
  }

  GridFn2D full_function() const {
    require(ny > 1, "RpfSolution: not a full solution");
    GridFn2D g(nx, ny, 0.0);
    std::copy(eigenfunction.begin(), eigenfunction.end(), g.values().begin());
    return g;
  }

  /// Equilibrium-state node weights h_i nu_i (sum to 1 after joint normalisation).
  std::vector<double> equilibrium_weights() const {
    std::vector<double> mu(weights.size());
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = eigenfunction[i] * weights[i];
    return mu;
  }
};

inline RpfSolution solve_rpf(const SparseMatrix& forward, const SparseMatrix& adjoint,
                             std::size_t nx, std::size_t ny, double tol, std::size_t max_iter) {
  const std::size_t size = forward.rows;
  PowerResult right = power_iterate(forward, std::vector<double>(size, 1.0), tol, max_iter);
  PowerResult left = power_iterate(adjoint, std::vector<double>(size, 1.0), tol, max_iter);
  RpfSolution sol;
  sol.log_eigenvalue = right.log_eigenvalue;
  sol.nx = nx;
  sol.ny = ny;
  sol.residual = right.residual;
  sol.adjoint_residual = left.residual;
  sol.iterations = right.iterations;
  sol.adjoint_iterations = left.iterations;
  sol.weights = std::move(left.vector);
  double pairing = 0.0;
  for (std::size_t i = 0; i < size; ++i) pairing += right.vector[i] * sol.weights[i];
  sol.eigenfunction = std::move(right.vector);
  for (double& h : sol.eigenfunction) h /= pairing;
  return sol;
}

inline RpfSolution rpf_base_solve(const BaseTransferOperator& op, double tol = 1e-10,
                                  std::size_t max_iter = 10000) {
  return solve_rpf(op.matrix(), op.adjoint_matrix(), op.size(), 1, tol, max_iter);
}

/// Builds L_Phi on n_x nodes from Phi at the 2 n_x preimage nodes, then solves.
inline RpfSolution rpf_base_solve(const PhiEvaluator& phi_eval, std::size_t n_x,
                                  double tol = 1e-10, std::size_t max_iter = 10000) {
  return rpf_base_solve(BaseTransferOperator::from_function(n_x, phi_eval), tol, max_iter);
}

inline RpfSolution rpf_full_solve(const FullTransferOperator& op, double tol = 1e-10,
                                  std::size_t max_iter = 10000) {
  return solve_rpf(op.matrix(), op.adjoint_matrix(), op.nx(), op.ny(), tol, max_iter);
}

inline RpfSolution rpf_full_solve(const TrigPotential& phi, const MpFamily& family,
                                  std::size_t n_x, std::size_t n_y, double tol = 1e-10,
                                  std::size_t max_iter = 10000) {
  return rpf_full_solve(FullTransferOperator(phi, family, n_x, n_y), tol, max_iter);
}

// ---------------------------------------------------------------------------
// Intertwining, conditional measures, continuity
// ---------------------------------------------------------------------------

struct IntertwineSample {
  double x = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/// Compares int (L_phi Psi)(x, .) d nu_{x,n} with sum_{xb in f^{-1}x} e^{Phi(xb)} int Psi(xb, .)
/// d nu_{xb,n}. L_phi Psi is formed fiber by fiber from the exact base preimages.
inline std::vector<IntertwineSample> intertwine_samples(const TrigPotential& phi,
                                                        const MpFamily& family,
                                                        const GridFn2D& psi,
                                                        std::span<const BasePoint> xs,
                                                        std::size_t n,
                                                        const PhiEvaluator& phi_eval,
                                                        Anchor anchor = {}) {
  std::vector<IntertwineSample> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t s) {
    const BasePoint& x = xs[s];
    GridFn pushed(psi.ny(), 0.0);
    double rhs = 0.0;
    for (const BasePoint& xb : x.preimages()) {
      const GridFn slice = psi.fiber(xb.value());
      GridFn part(psi.ny(), 0.0);
      FiberKernel(phi, family, xb.value(), psi.ny()).apply(slice.values(), part.values());
      for (std::size_t j = 0; j < psi.ny(); ++j) pushed[j] += part[j];
      rhs += std::exp(phi_eval(xb)) * fiber_integrate(phi, family, xb, slice, n, anchor);
    }
    pushed.log_offset = psi.log_offset;
    const double lhs = fiber_integrate(phi, family, x, pushed, n, anchor);
    out[s] = {x.value(), lhs, rhs, std::fabs(lhs - rhs)};
  });
  return out;
}

inline double intertwine_residual(const TrigPotential& phi, const MpFamily& family,
                                  const GridFn2D& psi, std::span<const BasePoint> xs,
                                  std::size_t n, const PhiEvaluator& phi_eval,
                                  Anchor anchor = {}) {
  double worst = 0.0;
  for (const auto& s : intertwine_samples(phi, family, psi, xs, n, phi_eval, anchor)) {
    worst = std::max(worst, s.residual);
  }
  return worst;
}

/// int psi h(x, .) d nu_{x,n} / h_base(x) for each psi: integrals against mu_x.
inline std::vector<double> conditional_integrate_many(const TrigPotential& phi,
                                                      const MpFamily& family, const BasePoint& x,
                                                      std::span<const GridFn> psis,
                                                      const RpfSolution& full,
                                                      const RpfSolution& base, std::size_t n,
                                                      Anchor anchor = {}) {
  const GridFn h = full.full_function().fiber(x.value());
  const double h_base = base.base_function().value_at(x.value());
  if (!(h_base > 0.0)) fail(ErrorKind::nonpositive_function, "conditional: base eigenfunction");
  std::vector<GridFn> weighted;
  weighted.reserve(psis.size());
  for (const GridFn& psi : psis) {
    require(psi.size() == h.size(), "conditional_integrate: fiber grid must match the full grid");
    GridFn g(psi.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = psi[j] * h[j];
    g.log_offset = psi.log_offset;
    weighted.push_back(std::move(g));
  }
  auto vals = FiberMeasure(phi, family, x, n, anchor).integrate_many(weighted);
  for (double& v : vals) v /= h_base;
  return vals;
}

inline double conditional_integrate(const TrigPotential& phi, const MpFamily& family,
                                    const BasePoint& x, const GridFn& psi,
                                    const RpfSolution& full, const RpfSolution& base,
                                    std::size_t n, Anchor anchor = {}) {
  return conditional_integrate_many(phi, family, x, {&psi, 1}, full, base, n, anchor).front();
}

struct DisintegrationRoutes {
  double direct = 0.0;       // sum of Psi against the full equilibrium weights
  double conditional = 0.0;  // sum over base nodes of mu_hat_i * int Psi d mu_{x_i}
};

/// int Psi d mu computed directly and as int (int Psi d mu_x) d mu_hat(x) over the base nodes.
inline std::vector<DisintegrationRoutes> disintegration_routes(const TrigPotential& phi,
                                                               const MpFamily& family,
                                                               std::span<const GridFn2D> psis,
                                                               const RpfSolution& full,
                                                               const RpfSolution& base,
                                                               std::size_t n, Anchor anchor = {}) {
  require(!psis.empty(), "disintegration_routes: no test functions");
  std::vector<DisintegrationRoutes> out(psis.size());
  const auto mu = full.equilibrium_weights();
  for (std::size_t t = 0; t < psis.size(); ++t) {
    require(psis[t].nx() == full.nx && psis[t].ny() == full.ny, "disintegration: grid mismatch");
    const double scale = std::exp(psis[t].log_offset);
    for (std::size_t i = 0; i < mu.size(); ++i) out[t].direct += mu[i] * psis[t].values()[i] * scale;
  }
  const auto mu_hat = base.equilibrium_weights();
  const unsigned bits = static_cast<unsigned>(std::countr_zero(base.nx));
  std::vector<std::vector<double>> per_node(base.nx);
  parallel_for(base.nx, [&](std::size_t i) {
    const BasePoint x = BasePoint::dyadic(i, bits);
    std::vector<GridFn> slices;
    for (const auto& psi : psis) slices.push_back(psi.fiber(x.value()));
    per_node[i] = conditional_integrate_many(phi, family, x, slices, full, base, n, anchor);
  });
  for (std::size_t i = 0; i < base.nx; ++i) {
    for (std::size_t t = 0; t < psis.size(); ++t) out[t].conditional += mu_hat[i] * per_node[i][t];
  }
  return out;
}

struct ContinuityRow {
  std::size_t k = 0;
  double delta = 0.0;
  double difference = 0.0;  // |nu_x(psi) - nu_{x + delta}(psi)|
};

inline std::vector<ContinuityRow> measure_continuity_probe(const TrigPotential& phi,
                                                           const MpFamily& family,
                                                           const GridFn& psi, const BasePoint& x,
                                                           const std::vector<std::size_t>& ks,
                                                           std::size_t n, Anchor anchor = {}) {
  const double at_x = fiber_integrate(phi, family, x, psi, n, anchor);
  std::vector<ContinuityRow> rows(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    const double other = fiber_integrate(phi, family, x.shifted(ks[i]), psi, n, anchor);
    rows[i] = {ks[i], std::ldexp(1.0, -int(ks[i])), std::fabs(other - at_x)};
  });
  return rows;
}

}  // namespace skewprod
