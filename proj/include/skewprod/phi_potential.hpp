#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/potential.hpp"
#include "skewprod/stats.hpp"
#include "skewprod/transfer_operator.hpp"

namespace skewprod {

/// Probability measure sigma on the fiber used to pair cascades: a point mass at y or the
/// uniform node weights.
struct Anchor {
  enum class Kind { delta, uniform };
  Kind kind = Kind::delta;
  double y = 0.5;

  static Anchor delta(double y) { return {Kind::delta, y}; }
  static Anchor uniform() { return {Kind::uniform, 0.0}; }

  /// <g, sigma> without the log_offset factor.
  double shape_pairing(const GridFn& g) const {
    return kind == Kind::delta ? g.interp(y) : g.mean();
  }

  /// log <g, sigma>, log_offset included.
  double log_pairing(const GridFn& g) const {
    if (kind == Kind::delta) {
      const double v = g.interp(y);
      if (!(v > 0.0)) fail(ErrorKind::nonpositive_function, "Anchor: nonpositive at anchor");
      return g.log_offset + std::log(v);
    }
    return g.log_offset + std::log(g.mean());
  }
};

struct PhiOptions {
  std::size_t ny = 256;
  Anchor anchor{};
  double tau = 0.9;  // rate used to turn increments into error bounds
  std::size_t max_n = 200;
};

/// Produces Phi_0, Phi_1, ... at one base point. Phi_n pairs L_x^{n+1} 1 and L_{fx}^n 1 against
/// the anchor; both are carried by one cascade along the orbit of fx.
class PhiStepper {
 public:
  PhiStepper(const TrigPotential& phi, const MpFamily& family, const BasePoint& x,
             const PhiOptions& opts)
      : anchor_(opts.anchor),
        lifted_(opts.ny, 1.0),
        plain_(opts.ny, 1.0),
        cascade_(phi, family, x.forward(1), opts.ny) {
    FiberKernel(phi, family, x.value(), opts.ny).apply(plain_.values(), lifted_.values());
    lifted_.normalize();
    capacity_ = x.capacity() - 1;
  }

  std::size_t n() const noexcept { return n_; }
  double value() const { return anchor_.log_pairing(lifted_) - anchor_.log_pairing(plain_); }

  void step() {
    if (n_ >= capacity_) fail(ErrorKind::capacity_exhausted, "Phi: base point capacity exhausted");
    GridFn* fns[] = {&lifted_, &plain_};
    cascade_.advance(std::span<GridFn* const>(fns));
    ++n_;
  }

  /// The cascades after n steps: L_x^{n+1} 1 and L_{fx}^n 1 on the fiber over f^{n+1} x.
  const GridFn& lifted() const noexcept { return lifted_; }
  const GridFn& plain() const noexcept { return plain_; }

 private:
  Anchor anchor_;
  GridFn lifted_;
  GridFn plain_;
  FiberCascade cascade_;
  std::size_t n_ = 0;
  std::size_t capacity_ = 0;
};

/// Phi_0(x), ..., Phi_{n_max}(x).
inline std::vector<double> phi_sequence(const TrigPotential& phi, const MpFamily& family,
                                        const BasePoint& x, std::size_t n_max,
                                        const PhiOptions& opts = {}) {
  if (x.capacity() < n_max + 1) {
    fail(ErrorKind::capacity_exhausted, "phi_sequence: capacity below n_max + 1");
  }
  PhiStepper stepper(phi, family, x, opts);
  std::vector<double> out{stepper.value()};
  out.reserve(n_max + 1);
  while (stepper.n() < n_max) {
    stepper.step();
    out.push_back(stepper.value());
  }
  return out;
}

inline double phi_n(const TrigPotential& phi, const MpFamily& family, const BasePoint& x,
                    std::size_t n, const PhiOptions& opts = {}) {
  return phi_sequence(phi, family, x, n, opts).back();
}

struct PhiValue {
  double value = 0.0;
  std::size_t n_used = 0;
  double bound = 0.0;  // last increment / (1 - tau), kept strictly positive
};

/// Runs the sequence until |Phi_n - Phi_{n-1}| <= tol (1 - tau).
inline PhiValue compute_phi(const TrigPotential& phi, const MpFamily& family,
                            const BasePoint& x, double tol, const PhiOptions& opts = {}) {
  require(tol > 0.0, "compute_phi: tol must be positive");
  require(opts.tau > 0.0 && opts.tau < 1.0, "compute_phi: tau must lie in (0,1)");
  const std::size_t limit = std::min(opts.max_n, x.capacity() - 1);
  PhiStepper stepper(phi, family, x, opts);
  double prev = stepper.value();
  while (stepper.n() < limit) {
    stepper.step();
    const double cur = stepper.value();
    const double inc = std::fabs(cur - prev);
    if (inc <= tol * (1.0 - opts.tau)) {
      const double floor = std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(cur));
      return {cur, stepper.n(), std::max(inc, floor) / (1.0 - opts.tau)};
    }
    prev = cur;
  }
  fail(ErrorKind::no_convergence, "compute_phi: no convergence within " + std::to_string(limit) +
                                      " steps at x = " + std::to_string(x.value()));
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

struct PhiEntry {
  double value = 0.0;
  std::size_t n_used = 0;
  double bound = 0.0;
};

/// Phi values keyed by base-point digits. Concurrent lookups; inserts take an exclusive lock.
class PhiTable {
 public:
  explicit PhiTable(std::string config_hash = {}) : config_hash_(std::move(config_hash)) {}

  PhiTable(const PhiTable& other)
      : tau_emp(other.tau_emp),
        C1_emp(other.C1_emp),
        config_hash_(other.config_hash_),
        entries_(other.snapshot()) {}

  const std::string& config_hash() const noexcept { return config_hash_; }
  double tau_emp = std::numeric_limits<double>::quiet_NaN();
  double C1_emp = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  std::optional<PhiEntry> find(const BasePoint& x) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(x.key());
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const BasePoint& x, const PhiEntry& e) {
    std::unique_lock lock(mutex_);
    entries_[x.key()] = e;
  }

  template <class Compute>
  PhiEntry get_or_compute(const BasePoint& x, Compute&& compute) {
    if (auto hit = find(x)) return *hit;
    const PhiEntry e = compute(x);
    insert(x, e);
    return e;
  }

  std::map<std::string, PhiEntry> snapshot() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash_;
    j["tau_emp"] = std::isfinite(tau_emp) ? nlohmann::json(tau_emp) : nlohmann::json();
    j["C1_emp"] = std::isfinite(C1_emp) ? nlohmann::json(C1_emp) : nlohmann::json();
    auto& arr = j["entries"] = nlohmann::json::array();
    for (const auto& [key, e] : snapshot()) {
      arr.push_back({{"digits", key}, {"value", e.value}, {"n_used", e.n_used}, {"bound", e.bound}});
    }
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::config, "cannot write Phi cache " + path);
    out << to_json().dump(1) << '\n';
  }

  /// Loads a cache; returns an empty table when the file is missing or the hash differs.
  static PhiTable load(const std::string& path, const std::string& expected_hash) {
    PhiTable table(expected_hash);
    std::ifstream in(path);
    if (!in) return table;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return table;
    }
    if (j.value("config_hash", std::string()) != expected_hash) return table;
    if (j.contains("tau_emp") && j["tau_emp"].is_number()) table.tau_emp = j["tau_emp"];
    if (j.contains("C1_emp") && j["C1_emp"].is_number()) table.C1_emp = j["C1_emp"];
    for (const auto& e : j.value("entries", nlohmann::json::array())) {
      table.entries_[e.at("digits").get<std::string>()] = {
          e.at("value").get<double>(), e.at("n_used").get<std::size_t>(),
          e.at("bound").get<double>()};
    }
    return table;
  }

 private:
  std::string config_hash_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, PhiEntry> entries_;
};

/// Phi through a table: cached values are reused, misses run compute_phi.
class PhiEvaluator {
 public:
  PhiEvaluator(const TrigPotential& phi, const MpFamily& family, double tol, PhiOptions opts = {},
               PhiTable* table = nullptr)
      : phi_(phi), family_(family), tol_(tol), opts_(opts), table_(table) {}

  double operator()(const BasePoint& x) const { return entry(x).value; }

  PhiEntry entry(const BasePoint& x) const {
    auto compute = [&](const BasePoint& p) {
      const PhiValue v = compute_phi(phi_, family_, p, tol_, opts_);
      return PhiEntry{v.value, v.n_used, v.bound};
    };
    return table_ ? table_->get_or_compute(x, compute) : compute(x);
  }

  const PhiOptions& options() const noexcept { return opts_; }

 private:
  TrigPotential phi_;
  MpFamily family_;
  double tol_;
  PhiOptions opts_;
  PhiTable* table_;
};

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct ConvergenceFit {
  double tau_emp = 0.0;
  double C1_emp = 0.0;     // envelope: max |Phi_n - Phi_ref| / tau_emp^n over the fitted range
  double intercept = 0.0;  // regression intercept (log scale)
  double r2 = 0.0;
  std::size_t n_lo = 0, n_hi = 0, n_ref = 0;
  std::size_t points = 0;
  std::vector<double> errors;  // |Phi_n - Phi_ref| for n = 0..n_hi
};

/// Regresses log |Phi_n - Phi_{n_ref}| on n for n in [n_lo, n_hi], skipping points below 1e-13.
/// Throws degenerate_fit when fewer than two points survive (constant potentials).
inline ConvergenceFit fit_convergence_rate(const TrigPotential& phi, const MpFamily& family,
                                           const BasePoint& x, std::size_t n_lo,
                                           std::size_t n_hi, std::size_t n_ref,
                                           const PhiOptions& opts = {}) {
  require(n_hi >= 15 && n_lo < n_hi && n_ref > n_hi, "fit_convergence_rate: bad range");
  const auto seq = phi_sequence(phi, family, x, n_ref, opts);
  ConvergenceFit fit;
  fit.n_lo = n_lo;
  fit.n_hi = n_hi;
  fit.n_ref = n_ref;
  fit.errors.resize(n_hi + 1);
  std::vector<double> xs, ys;
  for (std::size_t n = 0; n <= n_hi; ++n) {
    fit.errors[n] = std::fabs(seq[n] - seq[n_ref]);
    if (n >= n_lo && fit.errors[n] > 1e-13) {
      xs.push_back(double(n));
      ys.push_back(std::log(fit.errors[n]));
    }
  }
  const LineFit line = fit_line(xs, ys);
  fit.tau_emp = std::exp(line.slope);
  fit.intercept = line.intercept;
  fit.r2 = line.r2;
  fit.points = line.points;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    fit.C1_emp = std::max(fit.C1_emp, std::exp(ys[k] - line.slope * xs[k]));
  }
  return fit;
}

struct HolderEstimate {
  bool degenerate = false;
  double exponent_emp = std::numeric_limits<double>::quiet_NaN();
  double seminorm_emp = std::numeric_limits<double>::quiet_NaN();
  double r2 = 0.0;
  std::vector<std::size_t> scales;  // k, separation 2^{-k}
  std::vector<double> medians;      // median |Phi(x) - Phi(x + 2^{-k})|
  std::vector<double> ratios;       // medians / delta^exponent
};

/// Samples pairs (x, x + 2^{-k}) for each k, takes the median difference of Phi per scale and
/// regresses log median on log delta. The same x sample is used at every scale.
template <class Rng>
HolderEstimate estimate_holder(const PhiEvaluator& phi_eval, const std::vector<std::size_t>& ks,
                               std::size_t pairs_per_scale, Rng& rng,
                               std::size_t capacity = BasePoint::kDefaultCapacity) {
  require(!ks.empty() && pairs_per_scale >= 1, "estimate_holder: empty sample");
  for (auto k : ks) require(k >= 4 && k <= 12, "estimate_holder: scales must lie in 2^-4..2^-12");
  std::vector<BasePoint> xs;
  for (std::size_t i = 0; i < pairs_per_scale; ++i) xs.push_back(BasePoint::random(rng, capacity));

  std::vector<double> base_values(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { base_values[i] = phi_eval(xs[i]); });

  HolderEstimate est;
  est.scales = ks;
  std::vector<double> lx, ly;
  for (auto k : ks) {
    std::vector<double> diffs(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) {
      diffs[i] = std::fabs(phi_eval(xs[i].shifted(k)) - base_values[i]);
    });
    const double med = median(diffs);
    est.medians.push_back(med);
    if (med > 1e-14) {
      lx.push_back(-double(k) * std::log(2.0));
      ly.push_back(std::log(med));
    }
  }
  if (lx.size() < 2) {
    est.degenerate = true;
    return est;
  }
  const LineFit line = fit_line(lx, ly);
  est.exponent_emp = line.slope;
  est.seminorm_emp = std::exp(line.intercept);
  est.r2 = line.r2;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    est.ratios.push_back(est.medians[i] / std::pow(std::ldexp(1.0, -int(ks[i])), line.slope));
  }
  return est;
}

struct SandwichRow {
  std::size_t n = 0;
  double log_min = 0.0;  // min_y log L_x^n 1(y) - S_n Phi(x)
  double log_max = 0.0;
};

/// log L_x^n 1 measured against the Birkhoff sum S_n Phi(x) = sum_{k<n} Phi(f^k x).
inline std::vector<SandwichRow> sandwich_profile(const TrigPotential& phi, const MpFamily& family,
                                                 const BasePoint& x, std::size_t n_max,
                                                 const PhiEvaluator& phi_eval) {
  if (x.capacity() < n_max) fail(ErrorKind::capacity_exhausted, "sandwich_profile: capacity");
  std::vector<double> phis(n_max);
  parallel_for(n_max, [&](std::size_t k) { phis[k] = phi_eval(x.forward(k)); });
  const std::size_t ny = phi_eval.options().ny;
  GridFn g(ny, 1.0);
  FiberCascade cascade(phi, family, x, ny);
  std::vector<SandwichRow> rows;
  double birkhoff = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    cascade.advance(g);
    birkhoff += phis[n - 1];
    rows.push_back({n, g.log_offset + std::log(g.min()) - birkhoff,
                    g.log_offset + std::log(g.max()) - birkhoff});
  }
  return rows;
}

}  // namespace skewprod
