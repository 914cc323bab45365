#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/potential.hpp"

namespace skewprod {

struct GridConfig {
  std::size_t n_x = 256;
  std::size_t n_y = 256;
  std::size_t n_theta = 64;
  std::size_t n_base = 512;  // base operator nodes
  std::size_t n_fiber = 256; // fiber grid for Phi and fiber measures
};

struct ToleranceConfig {
  double phi_tol = 1e-12;
  double phi_tau = 0.9;
  std::size_t phi_max_n = 200;
  double power_tol = 1e-10;
  std::size_t max_iter = 10000;
};

struct SamplingConfig {
  std::size_t hypothesis_samples = 2000;
  std::size_t base_points = 10;
  std::size_t test_functions = 10;
  std::size_t fiber_depth = 30;
  std::size_t cone_pairs = 50;
  std::size_t cone_points = 5;
  std::size_t words_n = 16;
  std::vector<std::size_t> words_m{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::size_t> holder_scales{4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::size_t holder_pairs = 16;
};

struct ExperimentConfig {
  MpFamily family{};
  TrigPotential potential{};
  HypothesisInputs constants{};
  bool strict = false;  // strict: hypothesis failures abort; exploratory: reported only
  double cone_K = 50.0;
  double anchor_y = 0.5;
  GridConfig grid{};
  ToleranceConfig tol{};
  SamplingConfig sampling{};
  std::uint64_t seed = 1;
  std::string phi_cache;
  std::string output_dir = "out";

  /// Canonical JSON of everything that affects numerical results (seed and paths excluded).
  nlohmann::json numerical_json() const;
  nlohmann::json to_json() const;
  /// 16 hex digits of FNV-1a over numerical_json().dump().
  std::string hash() const;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::config, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) fail(ErrorKind::config, "unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("bad value for '") + key + "' in " + where);
  }
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::config, msg);
}

inline bool power_of_two_at_least_16(std::size_t n) { return n >= 16 && (n & (n - 1)) == 0; }

}  // namespace detail

inline nlohmann::json ExperimentConfig::numerical_json() const {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : potential.terms()) terms.push_back({t.kx, t.ky, t.amplitude});
  return {
      {"fiber_family",
       {{"p0", family.p0}, {"p1", family.p1}, {"delta_a", family.delta_a},
        {"root_tol", family.root_tol}}},
      {"potential", {{"constant", potential.constant()}, {"terms", terms}}},
      {"constants",
       {{"alpha", constants.alpha}, {"eps_phi", constants.eps_phi}, {"iota", constants.iota},
        {"eps", constants.eps}}},
      {"mode", strict ? "strict" : "exploratory"},
      {"cone", {{"K", cone_K}}},
      {"anchor_y", anchor_y},
      {"grid",
       {{"n_x", grid.n_x}, {"n_y", grid.n_y}, {"n_theta", grid.n_theta}, {"n_base", grid.n_base},
        {"n_fiber", grid.n_fiber}}},
      {"tolerances",
       {{"phi_tol", tol.phi_tol}, {"phi_tau", tol.phi_tau}, {"phi_max_n", tol.phi_max_n},
        {"power_tol", tol.power_tol}, {"max_iter", tol.max_iter}}},
      {"sampling",
       {{"hypothesis_samples", sampling.hypothesis_samples},
        {"base_points", sampling.base_points},
        {"test_functions", sampling.test_functions},
        {"fiber_depth", sampling.fiber_depth},
        {"cone_pairs", sampling.cone_pairs},
        {"cone_points", sampling.cone_points},
        {"words_n", sampling.words_n},
        {"words_m", sampling.words_m},
        {"holder_scales", sampling.holder_scales},
        {"holder_pairs", sampling.holder_pairs}}},
  };
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = numerical_json();
  j["seed"] = seed;
  j["phi_cache"] = phi_cache;
  j["output_dir"] = output_dir;
  return j;
}

inline std::string ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : numerical_json().dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  using detail::check;
  using detail::read;
  ExperimentConfig c;
  detail::reject_unknown(j,
                         {"fiber_family", "potential", "constants", "mode", "cone", "anchor_y",
                          "grid", "tolerances", "sampling", "seed", "phi_cache", "output_dir"},
                         "config");
  if (j.contains("fiber_family")) {
    const auto& f = j["fiber_family"];
    detail::reject_unknown(f, {"p0", "p1", "delta_a", "root_tol"}, "fiber_family");
    read(f, "p0", c.family.p0, "fiber_family");
    read(f, "p1", c.family.p1, "fiber_family");
    read(f, "delta_a", c.family.delta_a, "fiber_family");
    read(f, "root_tol", c.family.root_tol, "fiber_family");
  }
  if (j.contains("potential")) {
    const auto& p = j["potential"];
    detail::reject_unknown(p, {"constant", "terms"}, "potential");
    double constant = 0.0;
    read(p, "constant", constant, "potential");
    std::vector<TrigTerm> terms;
    if (p.contains("terms")) {
      check(p["terms"].is_array(), "potential.terms must be an array of [kx, ky, amplitude]");
      for (const auto& t : p["terms"]) {
        check(t.is_array() && t.size() == 3 && t[0].is_number_integer() &&
                  t[1].is_number_integer() && t[2].is_number(),
              "potential.terms entries must be [kx, ky, amplitude]");
        terms.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<double>()});
      }
    }
    c.potential = TrigPotential(constant, std::move(terms));
  }
  if (j.contains("constants")) {
    const auto& k = j["constants"];
    detail::reject_unknown(k, {"alpha", "eps_phi", "iota", "eps"}, "constants");
    read(k, "alpha", c.constants.alpha, "constants");
    read(k, "eps_phi", c.constants.eps_phi, "constants");
    read(k, "iota", c.constants.iota, "constants");
    read(k, "eps", c.constants.eps, "constants");
  }
  if (j.contains("mode")) {
    const std::string mode = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    check(mode == "strict" || mode == "exploratory", "mode must be 'strict' or 'exploratory'");
    c.strict = mode == "strict";
  }
  if (j.contains("cone")) {
    detail::reject_unknown(j["cone"], {"K"}, "cone");
    read(j["cone"], "K", c.cone_K, "cone");
  }
  read(j, "anchor_y", c.anchor_y, "config");
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    detail::reject_unknown(g, {"n_x", "n_y", "n_theta", "n_base", "n_fiber"}, "grid");
    read(g, "n_x", c.grid.n_x, "grid");
    read(g, "n_y", c.grid.n_y, "grid");
    read(g, "n_theta", c.grid.n_theta, "grid");
    read(g, "n_base", c.grid.n_base, "grid");
    read(g, "n_fiber", c.grid.n_fiber, "grid");
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    detail::reject_unknown(t, {"phi_tol", "phi_tau", "phi_max_n", "power_tol", "max_iter"},
                           "tolerances");
    read(t, "phi_tol", c.tol.phi_tol, "tolerances");
    read(t, "phi_tau", c.tol.phi_tau, "tolerances");
    read(t, "phi_max_n", c.tol.phi_max_n, "tolerances");
    read(t, "power_tol", c.tol.power_tol, "tolerances");
    read(t, "max_iter", c.tol.max_iter, "tolerances");
  }
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    detail::reject_unknown(s,
                           {"hypothesis_samples", "base_points", "test_functions", "fiber_depth",
                            "cone_pairs", "cone_points", "words_n", "words_m", "holder_scales",
                            "holder_pairs"},
                           "sampling");
    read(s, "hypothesis_samples", c.sampling.hypothesis_samples, "sampling");
    read(s, "base_points", c.sampling.base_points, "sampling");
    read(s, "test_functions", c.sampling.test_functions, "sampling");
    read(s, "fiber_depth", c.sampling.fiber_depth, "sampling");
    read(s, "cone_pairs", c.sampling.cone_pairs, "sampling");
    read(s, "cone_points", c.sampling.cone_points, "sampling");
    read(s, "words_n", c.sampling.words_n, "sampling");
    read(s, "words_m", c.sampling.words_m, "sampling");
    read(s, "holder_scales", c.sampling.holder_scales, "sampling");
    read(s, "holder_pairs", c.sampling.holder_pairs, "sampling");
  }
  read(j, "seed", c.seed, "config");
  read(j, "phi_cache", c.phi_cache, "config");
  read(j, "output_dir", c.output_dir, "config");

  // Ranges.
  check(c.family.p0 > 0.0 && c.family.p1 >= 0.0, "fiber_family: need p0 > 0 and p1 >= 0");
  check(c.family.delta_a > 0.0 && c.family.delta_a < 0.5, "fiber_family.delta_a must lie in (0, 0.5)");
  check(c.family.root_tol > 0.0 && c.family.root_tol < 1e-6, "fiber_family.root_tol must lie in (0, 1e-6)");
  check(c.constants.alpha > 0.0 && c.constants.alpha <= 1.0, "constants.alpha must lie in (0, 1]");
  check(c.constants.eps_phi > 0.0, "constants.eps_phi must be positive");
  check(c.constants.iota > 0.0 && c.constants.iota < 1.0, "constants.iota must lie in (0, 1)");
  check(c.constants.eps > 0.0, "constants.eps must be positive");
  check(c.cone_K > 0.0, "cone.K must be positive");
  check(c.anchor_y >= 0.0 && c.anchor_y < 1.0, "anchor_y must lie in [0, 1)");
  for (std::size_t n : {c.grid.n_x, c.grid.n_y, c.grid.n_base, c.grid.n_fiber}) {
    check(detail::power_of_two_at_least_16(n), "grid sizes must be powers of two >= 16");
  }
  check(c.grid.n_x * c.grid.n_y <= (std::size_t{1} << 20), "grid: n_x * n_y must not exceed 2^20");
  check(detail::power_of_two_at_least_16(c.grid.n_theta) && c.grid.n_theta <= 128,
        "grid.n_theta must be a power of two in [16, 128]");
  check(c.tol.phi_tol > 0.0 && c.tol.power_tol > 0.0, "tolerances must be positive");
  check(c.tol.phi_tau > 0.0 && c.tol.phi_tau < 1.0, "tolerances.phi_tau must lie in (0, 1)");
  check(c.tol.phi_max_n >= 1 && c.tol.phi_max_n <= 200, "tolerances.phi_max_n must lie in [1, 200]");
  check(c.tol.max_iter >= 1, "tolerances.max_iter must be positive");
  check(c.sampling.hypothesis_samples >= 1000, "sampling.hypothesis_samples must be >= 1000");
  check(c.sampling.base_points >= 1 && c.sampling.test_functions >= 1, "sampling counts must be positive");
  check(c.sampling.fiber_depth >= 1 && c.sampling.fiber_depth <= 100, "sampling.fiber_depth must lie in [1, 100]");
  check(c.sampling.cone_pairs >= 10 && c.sampling.cone_points >= 1, "sampling: cone_pairs >= 10");
  check(c.sampling.words_n >= 1 && c.sampling.words_n <= 20, "sampling.words_n must lie in [1, 20]");
  check(!c.sampling.words_m.empty(), "sampling.words_m must not be empty");
  for (auto m : c.sampling.words_m) check(m >= 1, "sampling.words_m entries must be positive");
  check(!c.sampling.holder_scales.empty() && c.sampling.holder_pairs >= 1, "sampling: holder sample empty");
  for (auto k : c.sampling.holder_scales) check(k >= 4 && k <= 12, "sampling.holder_scales must lie in [4, 12]");
  try {
    c.family.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return c;
}

inline ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace skewprod
