#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/transfer_operator.hpp"

namespace skewprod {

/// Holder cone Lambda_K = { psi > 0 : |psi|_alpha <= K inf psi } on the fiber circle.
struct ConeParams {
  double K = 50.0;
  double alpha = 1.0;

  static constexpr double kFiberDiameter = 0.5;

  void validate() const {
    require(alpha > 0.0 && alpha <= 1.0, "ConeParams: alpha must lie in (0,1]");
    // 1 + K diam^alpha <= 2 K diam^alpha
    require(K >= std::pow(kFiberDiameter, -alpha), "ConeParams: K below diam(Y)^-alpha");
  }
};

struct ContractionReport {
  double M_emp = 0.0;
  double tau = 0.0;
  double zeta_emp = 0.0;
  double zeta_bound = std::numeric_limits<double>::quiet_NaN();  // analytic zeta when known
  std::size_t samples = 0;
};

namespace detail {
/// 1 / d(y_0, y_k)^alpha for node offsets k on an N-grid (entry 0 unused).
inline std::vector<double> inverse_distance_powers(std::size_t n, double alpha) {
  std::vector<double> table(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    table[k] = std::pow(circle_distance(0.0, double(k) / double(n)), -alpha);
  }
  return table;
}
}  // namespace detail

/// Largest node-pair quotient |psi_i - psi_j| / d(y_i, y_j)^alpha: a lower bound for the true
/// seminorm. Includes log_offset.
inline double holder_seminorm(const GridFn& psi, double alpha) {
  const std::size_t n = psi.size();
  require(n <= 4096, "holder_seminorm: grid too large for the pair scan");
  const auto inv = detail::inverse_distance_powers(n, alpha);
  const auto v = psi.values();
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      best = std::max(best, std::fabs(v[i] - v[j]) * inv[j - i]);
    }
  }
  return best * std::exp(psi.log_offset);
}

inline bool in_cone(const GridFn& psi, const ConeParams& cone) {
  const double lo = psi.min();
  if (!(lo > 0.0)) return false;
  return holder_seminorm(psi, cone.alpha) <= cone.K * lo * std::exp(psi.log_offset);
}

/// Hilbert projective distance log(B/A) in Lambda_K, with A and B the extreme values over node
/// triples (z1 != z2, z3) of
///   (K d(z1,z2)^alpha psi(z3) - (psi(z1) - psi(z2))) / (K d(z1,z2)^alpha phi(z3) - (phi(z1) - phi(z2)))
/// together with the pointwise ratios psi(z3)/phi(z3). Inputs are downsampled to n_theta nodes.
inline double hilbert_distance(const GridFn& phi, const GridFn& psi, const ConeParams& cone,
                               std::size_t n_theta = 64) {
  require(phi.size() == psi.size(), "hilbert_distance: grid mismatch");
  const std::size_t m = std::min(n_theta, phi.size());
  const GridFn a = phi.downsample(m), b = psi.downsample(m);
  if (!in_cone(a, cone) || !in_cone(b, cone)) {
    fail(ErrorKind::cone_violation, "hilbert_distance: argument outside the cone");
  }
  const auto inv = detail::inverse_distance_powers(m, cone.alpha);
  const auto va = a.values(), vb = b.values();

  // Per-pair coefficients, z1 != z2 ordered.
  struct Pair {
    double D, dphi, dpsi;
  };
  std::vector<Pair> pairs;
  pairs.reserve(m * (m - 1));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const std::size_t off = i > j ? i - j : j - i;
      pairs.push_back({cone.K / inv[off], va[i] - va[j], vb[i] - vb[j]});
    }
  }
  std::vector<double> lo(m), hi(m);
  std::vector<char> bad(m, 0);
  parallel_for(m, [&](std::size_t z3) {
    double mn = vb[z3] / va[z3], mx = mn;
    for (const Pair& p : pairs) {
      const double den = p.D * va[z3] - p.dphi;
      if (!(den > 0.0)) {
        bad[z3] = 1;
        return;
      }
      const double r = (p.D * vb[z3] - p.dpsi) / den;
      mn = std::min(mn, r);
      mx = std::max(mx, r);
    }
    lo[z3] = mn;
    hi[z3] = mx;
  });
  for (char f : bad) {
    if (f) fail(ErrorKind::nonpositive_denominator, "hilbert_distance: phi on the cone boundary");
  }
  double A = lo[0], B = hi[0];
  for (std::size_t z = 1; z < m; ++z) {
    A = std::min(A, lo[z]);
    B = std::max(B, hi[z]);
  }
  if (!(A > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(0.0, std::log(B / A));
}

/// Distance in the cone of positive functions, log(max(psi/phi) / min(psi/phi)). It is the
/// supremum over pairs of point-mass functionals and bounds the Lambda_K distance from below.
inline double positive_cone_distance(const GridFn& phi, const GridFn& psi) {
  require(phi.size() == psi.size(), "positive_cone_distance: grid mismatch");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const double r = psi[j] / phi[j];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return std::log(hi / lo);
}

/// psi = 1 + sum a_k cos(2 pi k y + theta_k) with sum |a_k| 2 pi k <= K/4 and sum |a_k| <= 1/2,
/// which places psi inside Lambda_K with margin.
template <class Rng>
GridFn random_cone_element(Rng& rng, const ConeParams& cone, std::size_t n) {
  std::uniform_int_distribution<int> modes(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int count = modes(rng);
  const int k_max = std::max(1, static_cast<int>(cone.K / (8.0 * std::numbers::pi * 0.05)));
  std::uniform_int_distribution<int> freq(1, std::min(k_max, 16));
  std::vector<int> ks(count);
  std::vector<double> amp(count), phase(count);
  double lip = 0.0, total = 0.0;
  for (int i = 0; i < count; ++i) {
    ks[i] = freq(rng);
    amp[i] = unit(rng);
    phase[i] = 2.0 * std::numbers::pi * unit(rng);
    lip += 2.0 * std::numbers::pi * ks[i] * amp[i];
    total += amp[i];
  }
  const double fill = 0.2 + 0.8 * unit(rng);
  const double scale = fill * std::min(0.25 * cone.K / lip, 0.5 / total);
  return GridFn::sample(n, [&](double y) {
    double v = 1.0;
    for (int i = 0; i < count; ++i) {
      v += scale * amp[i] * std::cos(2.0 * std::numbers::pi * ks[i] * y + phase[i]);
    }
    return v;
  });
}

/// Pushes cone samples through L_x and measures the image: zeta_emp is the largest
/// |L psi|_alpha / (K inf L psi); M_emp the largest pairwise Hilbert distance among images.
/// Throws cone_violation when an image leaves Lambda_{zeta' K}, zeta' = min(1, 1.05 zeta).
inline ContractionReport image_diameter(const TrigPotential& phi, const MpFamily& family,
                                        const BasePoint& x, const ConeParams& cone,
                                        std::span<const GridFn> samples,
                                        const HypothesisConstants* constants = nullptr,
                                        std::size_t n_theta = 64,
                                        std::vector<GridFn>* images_out = nullptr) {
  cone.validate();
  require(!samples.empty(), "image_diameter: no samples");
  ContractionReport report;
  report.samples = samples.size();
  if (constants) report.zeta_bound = constants->zeta;
  const double zeta_cap = constants ? std::min(1.0, 1.05 * constants->zeta) : 1.0;

  const FiberKernel kernel(phi, family, x.value(), samples.front().size());
  std::vector<GridFn> images;
  images.reserve(samples.size());
  for (const GridFn& s : samples) {
    if (!in_cone(s, cone)) fail(ErrorKind::cone_violation, "image_diameter: sample outside cone");
    GridFn img(s.size(), 0.0);
    kernel.apply(s.values(), img.values(), true);
    img.log_offset = s.log_offset;
    img.normalize();
    const double ratio = holder_seminorm(img, cone.alpha) / (img.min() * std::exp(img.log_offset));
    report.zeta_emp = std::max(report.zeta_emp, ratio / cone.K);
    if (ratio > zeta_cap * cone.K) {
      fail(ErrorKind::cone_violation, "image_diameter: image escaped the contracted cone");
    }
    images.push_back(std::move(img));
  }
  std::vector<double> row_max(images.size(), 0.0);
  parallel_for(images.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      row_max[i] = std::max(row_max[i], hilbert_distance(images[i], images[j], cone, n_theta));
    }
  });
  for (double v : row_max) report.M_emp = std::max(report.M_emp, v);
  report.tau = std::tanh(report.M_emp / 4.0);
  if (images_out) *images_out = std::move(images);
  return report;
}

/// Near-extremal element: a tent 1 + s max(0, r - d(y, y0)) whose alpha-seminorm is 0.98 K.
/// Smooth perturbations stay deep inside the cone; tents probe its boundary rays, which is where
/// the image diameter is attained.
template <class Rng>
GridFn extremal_cone_element(Rng& rng, const ConeParams& cone, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double y0 = unit(rng);
  const double r = 0.5 * (0.02 + 0.98 * unit(rng));
  const double slope = 0.98 * cone.K / std::pow(r, 1.0 - cone.alpha);
  return GridFn::sample(n, [&](double y) {
    return 1.0 + slope * std::max(0.0, r - circle_distance(y, y0));
  });
}

/// Alternates smooth and extremal elements.
template <class Rng>
std::vector<GridFn> sample_cone_elements(Rng& rng, const ConeParams& cone, std::size_t n,
                                         std::size_t count) {
  std::vector<GridFn> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    pool.push_back(i % 2 == 0 ? extremal_cone_element(rng, cone, n)
                              : random_cone_element(rng, cone, n));
  }
  return pool;
}

template <class Rng>
ContractionReport image_diameter(const TrigPotential& phi, const MpFamily& family,
                                 const BasePoint& x, const ConeParams& cone, Rng& rng,
                                 std::size_t samples, std::size_t n = 512,
                                 const HypothesisConstants* constants = nullptr,
                                 std::size_t n_theta = 64) {
  require(samples >= 20, "image_diameter: at least 20 samples");
  const auto pool = sample_cone_elements(rng, cone, n, samples);
  return image_diameter(phi, family, x, cone, pool, constants, n_theta);
}

}  // namespace skewprod
