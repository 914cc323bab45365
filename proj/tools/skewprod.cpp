// Command-line driver: runs one experiment per invocation and writes JSON/CSV artifacts.
//
// Exit codes: 0 ok, 1 a check failed, 2 usage or config error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "skewprod/experiment.hpp"
#include "skewprod/skewprod.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skewprod;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3;

std::string fmt15(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

// Rounds every float in place to 15 significant digits so dumps are stable.
void round15(json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    j = std::isfinite(v) ? json(std::strtod(fmt15(v).c_str(), nullptr)) : json(fmt15(v));
  } else if (j.is_structured()) {
    for (auto& e : j) round15(e);
  }
}

using Cell = std::variant<double, long long, std::string>;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& hash, std::uint64_t seed,
            const std::vector<std::string>& columns)
      : out_(path), prefix_(hash + "," + std::to_string(seed)) {
    if (!out_) fail(ErrorKind::config, "cannot write " + path.string());
    out_ << "config_hash,seed";
    for (const auto& c : columns) out_ << ',' << c;
    out_ << '\n';
  }

  void row(const std::vector<Cell>& cells) {
    out_ << prefix_;
    for (const auto& c : cells) {
      out_ << ',';
      if (const double* d = std::get_if<double>(&c)) {
        out_ << fmt15(*d);
      } else if (const long long* i = std::get_if<long long>(&c)) {
        out_ << *i;
      } else {
        out_ << std::get<std::string>(c);
      }
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::string prefix_;
};

struct Session {
  ExperimentConfig cfg;
  std::string hash;
  std::uint64_t seed = 1;
  fs::path out;
  std::string phi_cache;
  std::mt19937_64 rng;

  void write_json(const std::string& name, const std::string& command, json body) const {
    body["config_hash"] = hash;
    body["seed"] = seed;
    body["command"] = command;
    round15(body);
    std::ofstream f(out / name);
    if (!f) fail(ErrorKind::config, "cannot write " + (out / name).string());
    f << body.dump(2) << '\n';
  }

  CsvWriter csv(const std::string& name, const std::vector<std::string>& columns) const {
    return CsvWriter(out / name, hash, seed, columns);
  }

  PhiTable load_table() const {
    return phi_cache.empty() ? PhiTable(hash) : PhiTable::load(phi_cache, hash);
  }

  void save_table(const PhiTable& table) const {
    if (!phi_cache.empty()) table.save(phi_cache);
  }
};

json constants_json(const HypothesisConstants& k) {
  json checks = json::array();
  for (const auto& c : k.checks) {
    checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"passed", c.passed}});
  }
  return {{"d", k.d},          {"q", k.q},           {"gamma", k.gamma},
          {"L", k.L},          {"alpha", k.alpha},   {"eps_phi", k.eps_phi},
          {"s", k.s},          {"zeta", k.zeta},     {"theta", k.theta},
          {"iota", k.iota},    {"c", std::isfinite(k.c) ? json(k.c) : json(nullptr)},
          {"eps", k.eps},      {"gamma_sampled", k.gamma_sampled},
          {"L_sampled", k.L_sampled}, {"samples", k.samples},
          {"inequalities", checks}, {"all_passed", k.all_passed()}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_check_hypotheses(Session& s) {
  const auto k = estimate_constants(s.cfg.family, s.cfg.constants, s.cfg.sampling.hypothesis_samples,
                                    s.seed, 1e-4, true);
  const auto p = check_condition_P(s.cfg.potential, k);
  const bool ok = k.all_passed() && p.passed();
  s.write_json("hypotheses.json", "check-hypotheses",
               {{"mode", s.cfg.strict ? "strict" : "exploratory"},
                {"constants", constants_json(k)},
                {"condition_P",
                 {{"sup_phi", p.sup_phi}, {"inf_phi", p.inf_phi},
                  {"exp_phi_seminorm", p.exp_phi_seminorm}, {"eps_phi", p.eps_phi},
                  {"oscillation_ok", p.oscillation_ok}, {"regularity_ok", p.regularity_ok},
                  {"eps_range_ok", p.eps_range_ok}, {"passed", p.passed()}}},
                {"passed", ok}});
  std::cout << "hypotheses " << (ok ? "hold" : "fail") << "\n";
  return ok ? kOk : kCheckFailed;
}

int cmd_compute_phi(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, &table);
  const auto xs = random_base_points(s.rng, s.cfg.sampling.base_points);

  auto phi_csv = s.csv("phi.csv", {"x", "digits", "phi", "n_used", "bound"});
  auto conv_csv = s.csv("phi_convergence.csv", {"point", "n", "error"});
  json fits = json::array();
  double tau_max = 0.0, c1_max = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const PhiEntry e = eval.entry(xs[i]);
    phi_csv.row({xs[i].value(), xs[i].to_string(), e.value, (long long)e.n_used, e.bound});
    try {
      const auto fit = fit_convergence_rate(ctx.phi, ctx.family, xs[i], 5, 35, 80, ctx.phi_opts);
      for (std::size_t n = 0; n < fit.errors.size(); ++n) conv_csv.row({(long long)i, (long long)n, fit.errors[n]});
      fits.push_back({{"point", i}, {"tau_emp", fit.tau_emp}, {"C1_emp", fit.C1_emp}, {"r2", fit.r2}});
      tau_max = std::max(tau_max, fit.tau_emp);
      c1_max = std::max(c1_max, fit.C1_emp);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::degenerate_fit) throw;
      fits.push_back({{"point", i}, {"degenerate", true}});
    }
  }
  if (tau_max > 0.0) {
    table.tau_emp = tau_max;
    table.C1_emp = c1_max;
  }
  s.save_table(table);
  s.write_json("phi.json", "compute-phi",
               {{"points", xs.size()}, {"fits", fits}, {"cache_entries", table.size()},
                {"tau_emp_max", tau_max}, {"C1_emp_max", c1_max}});
  return kOk;
}

int cmd_holder(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, &table);
  const auto est = estimate_holder(eval, s.cfg.sampling.holder_scales, s.cfg.sampling.holder_pairs, s.rng);
  auto csv = s.csv("holder.csv", {"k", "delta", "median_difference", "ratio"});
  for (std::size_t i = 0; i < est.scales.size(); ++i) {
    csv.row({(long long)est.scales[i], std::ldexp(1.0, -int(est.scales[i])), est.medians[i],
             est.ratios.empty() ? 0.0 : est.ratios[i]});
  }
  s.save_table(table);
  s.write_json("holder.json", "holder",
               {{"degenerate", est.degenerate}, {"exponent_emp", est.exponent_emp},
                {"seminorm_emp", est.seminorm_emp}, {"r2", est.r2}});
  return kOk;
}

int cmd_cones(Session& s, const CheckContext& ctx) {
  const auto xs = random_base_points(s.rng, s.cfg.sampling.cone_points);
  const auto out = check_cone_contraction(ctx, xs, s.cfg.sampling.cone_pairs, s.cfg.sampling.cone_pairs,
                                          s.rng, s.cfg.grid.n_fiber);
  auto csv = s.csv("cones.csv", {"x", "M_emp_local", "zeta_emp", "contraction_ratio_max", "excess"});
  for (const auto& p : out.result.detail["points"]) {
    csv.row({p["x"].get<double>(), p["M_emp_local"].get<double>(), p["zeta_emp"].get<double>(),
             p["contraction_ratio_max"].get<double>(), p["excess"].get<double>()});
  }
  json body = out.result.detail;
  body["passed"] = out.result.passed;
  s.write_json("cones.json", "cones", body);
  return out.result.passed ? kOk : kCheckFailed;
}

int cmd_fiber_measures(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, &table);
  const auto xs = random_base_points(s.rng, s.cfg.sampling.base_points);
  std::vector<GridFn> psis;
  for (std::size_t t = 0; t < s.cfg.sampling.test_functions; ++t) {
    psis.push_back(random_fiber_test_function(s.rng, ctx.phi_opts.ny));
  }
  const std::size_t depth = s.cfg.sampling.fiber_depth;
  std::vector<std::size_t> ns;
  for (std::size_t n = 5; n < depth; n += 5) ns.push_back(n);
  ns.push_back(depth);

  auto csv = s.csv("fiber_measures.csv", {"point", "x", "phi", "function", "n", "integral", "residual"});
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double phi_x = eval(xs[i]);
    for (std::size_t t = 0; t < psis.size(); ++t) {
      for (std::size_t n : ns) {
        const double integral = fiber_integrate(ctx.phi, ctx.family, xs[i], psis[t], n, ctx.phi_opts.anchor);
        const double res = eigen_equation_residual(ctx.phi, ctx.family, xs[i], psis[t], n, phi_x,
                                                   ctx.phi_opts.anchor);
        if (n == depth) worst = std::max(worst, res);
        csv.row({(long long)i, xs[i].value(), phi_x, (long long)t, (long long)n, integral, res});
      }
    }
  }
  s.save_table(table);
  s.write_json("fiber_measures.json", "fiber-measures",
               {{"points", xs.size()}, {"functions", psis.size()}, {"depth", depth},
                {"residual_max_at_depth", worst}});
  return kOk;
}

json solution_json(const RpfSolution& sol) {
  return {{"log_eigenvalue", sol.log_eigenvalue}, {"residual", sol.residual},
          {"adjoint_residual", sol.adjoint_residual}, {"iterations", sol.iterations},
          {"adjoint_iterations", sol.adjoint_iterations}, {"nx", sol.nx}, {"ny", sol.ny}};
}

int cmd_rpf_base(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, &table);
  const RpfSolution sol = rpf_base_solve(eval, s.cfg.grid.n_base, ctx.power_tol, ctx.max_iter);
  const auto mu = sol.equilibrium_weights();
  auto csv = s.csv("rpf_base.csv", {"x", "h", "nu", "mu"});
  for (std::size_t i = 0; i < sol.nx; ++i) {
    csv.row({double(i) / double(sol.nx), sol.eigenfunction[i], sol.weights[i], mu[i]});
  }
  s.save_table(table);
  s.write_json("rpf_base.json", "rpf-base", solution_json(sol));
  return kOk;
}

int cmd_rpf_full(Session& s, const CheckContext& ctx) {
  const RpfSolution sol = rpf_full_solve(ctx.phi, ctx.family, s.cfg.grid.n_x, s.cfg.grid.n_y,
                                         ctx.power_tol, ctx.max_iter);
  const auto mu = sol.equilibrium_weights();
  auto csv = s.csv("rpf_full.csv", {"x", "y", "h", "nu", "mu"});
  for (std::size_t i = 0; i < sol.nx; ++i) {
    for (std::size_t j = 0; j < sol.ny; ++j) {
      const std::size_t k = i * sol.ny + j;
      csv.row({double(i) / double(sol.nx), double(j) / double(sol.ny), sol.eigenfunction[k],
               sol.weights[k], mu[k]});
    }
  }
  s.write_json("rpf_full.json", "rpf-full", solution_json(sol));
  return kOk;
}

int cmd_pressure(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PressureRun run = pressure_run(ctx, s.cfg.grid.n_x, s.cfg.grid.n_y, s.cfg.grid.n_base, &table);
  s.save_table(table);
  s.write_json("pressure.json", "pressure",
               {{"P_phi", run.P_phi}, {"P_Phi", run.P_Phi}, {"gap", run.gap},
                {"grids", {run.nx, run.ny, run.n_base}}});
  std::cout << "P_phi " << fmt15(run.P_phi) << " P_Phi " << fmt15(run.P_Phi) << " gap " << fmt15(run.gap) << "\n";
  return kOk;
}

int cmd_intertwine(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const PhiEvaluator eval(ctx.phi, ctx.family, ctx.phi_tol, ctx.phi_opts, &table);
  const auto xs = random_base_points(s.rng, s.cfg.sampling.base_points);
  const std::size_t functions = std::max<std::size_t>(1, s.cfg.sampling.test_functions / 2);
  auto csv = s.csv("intertwine.csv", {"function", "x", "lhs", "rhs", "residual"});
  double worst = 0.0;
  for (std::size_t t = 0; t < functions; ++t) {
    const GridFn2D psi = random_torus_test_function(s.rng, s.cfg.grid.n_x, ctx.phi_opts.ny);
    for (const auto& r : intertwine_samples(ctx.phi, ctx.family, psi, xs, s.cfg.sampling.fiber_depth,
                                            eval, ctx.phi_opts.anchor)) {
      worst = std::max(worst, r.residual);
      csv.row({(long long)t, r.x, r.lhs, r.rhs, r.residual});
    }
  }
  s.save_table(table);
  s.write_json("intertwine.json", "intertwine",
               {{"functions", functions}, {"points", xs.size()}, {"depth", s.cfg.sampling.fiber_depth},
                {"residual_max", worst}});
  return kOk;
}

int cmd_words(Session& s, const CheckContext& ctx) {
  const std::size_t n_max = s.cfg.sampling.words_n;
  auto counts = s.csv("word_counts.csv", {"iota", "n", "count_exhaustive", "count_binomial"});
  bool match = true;
  for (double iota : {0.5, 0.75, 0.9, ctx.constants.iota}) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      const auto a = count_I_exhaustive(iota, n, MpFamily::neutral_branches, MpFamily::degree);
      const auto b = count_I_binomial(iota, n, MpFamily::neutral_branches, MpFamily::degree);
      match = match && a == b;
      counts.row({iota, (long long)n, (long long)a, (long long)b});
    }
  }
  const auto xs = random_base_points(s.rng, std::min<std::size_t>(3, s.cfg.sampling.base_points));
  auto mass = s.csv("bad_mass.csv", {"point", "x", "m", "good_count", "bad_count", "good_mass", "bad_mass", "ratio"});
  json fits = json::array();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto rows = bad_mass_ratio(ctx.phi, ctx.family, xs[i], ctx.phi_opts.anchor.y, n_max,
                                     s.cfg.sampling.words_m, ctx.constants.iota);
    for (const auto& r : rows) {
      mass.row({(long long)i, xs[i].value(), (long long)r.m, (long long)r.good_count,
                (long long)r.bad_count, r.good_mass, r.bad_mass, r.ratio});
    }
    const LineFit fit = fit_bad_mass_decay(rows);
    fits.push_back({{"point", i}, {"base", std::exp(fit.slope)}, {"r2", fit.r2}});
  }
  s.write_json("words.json", "words",
               {{"counts_match", match}, {"bad_mass_fits", fits}, {"theta", ctx.constants.theta}});
  return match ? kOk : kCheckFailed;
}

int cmd_verify(Session& s, const CheckContext& ctx) {
  PhiTable table = s.load_table();
  const VerifyPlan plan = VerifyPlan::from_config(s.cfg);
  const auto results = run_verify(ctx, plan, s.seed, &table);
  s.save_table(table);
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.result.passed;
    checks.push_back({{"name", r.result.name}, {"passed", r.result.passed}, {"detail", r.result.detail}});
    std::cout << (r.result.passed ? "PASS " : "FAIL ") << r.result.name << "\n";
  }
  s.write_json("verify.json", "verify", {{"checks", checks}, {"passed", all}});
  return all ? kOk : kCheckFailed;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
      return kUsage;
    case ErrorKind::hypothesis_violated:
    case ErrorKind::cone_violation:
      return kCheckFailed;
    default:
      return kNumerical;
  }
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments for skew products with intermittent fibers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, phi_cache;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  app.add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--phi-cache", phi_cache, "Phi table cache file (overrides phi_cache)");
  app.add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::Range(0u, 1024u));

  const std::vector<std::pair<std::string, std::string>> commands{
      {"check-hypotheses", "sample constants and test the standing inequalities"},
      {"compute-phi", "build the Phi table and convergence data"},
      {"holder", "estimate the Holder exponent of Phi"},
      {"cones", "image diameters and cone contraction"},
      {"fiber-measures", "fiber integrals and eigen-equation residuals"},
      {"rpf-base", "leading eigendata of the base operator"},
      {"rpf-full", "leading eigendata of the full operator"},
      {"pressure", "compare the two pressures"},
      {"intertwine", "intertwining residuals"},
      {"words", "word counts and bad-mass ratios"},
      {"verify", "run the full invariant suite"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    set_num_threads(threads);
    Session s;
    s.cfg = ExperimentConfig::load(config_path);
    if (seed) s.cfg.seed = *seed;
    if (!out_dir.empty()) s.cfg.output_dir = out_dir;
    if (!phi_cache.empty()) s.cfg.phi_cache = phi_cache;
    s.hash = s.cfg.hash();
    s.seed = s.cfg.seed;
    s.out = s.cfg.output_dir;
    s.phi_cache = s.cfg.phi_cache;
    s.rng.seed(s.seed);
    std::error_code ec;
    fs::create_directories(s.out, ec);
    if (ec) fail(ErrorKind::config, "cannot create output directory " + s.out.string());

    if (command == "check-hypotheses") return cmd_check_hypotheses(s);

    const HypothesisConstants constants = config_constants(s.cfg);
    const CheckContext ctx = make_context(s.cfg, constants);
    if (command == "compute-phi") return cmd_compute_phi(s, ctx);
    if (command == "holder") return cmd_holder(s, ctx);
    if (command == "cones") return cmd_cones(s, ctx);
    if (command == "fiber-measures") return cmd_fiber_measures(s, ctx);
    if (command == "rpf-base") return cmd_rpf_base(s, ctx);
    if (command == "rpf-full") return cmd_rpf_full(s, ctx);
    if (command == "pressure") return cmd_pressure(s, ctx);
    if (command == "intertwine") return cmd_intertwine(s, ctx);
    if (command == "words") return cmd_words(s, ctx);
    return cmd_verify(s, ctx);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  } catch (const json::exception& e) {
    return report_error("config", e.what(), kUsage);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kNumerical);
  }
}
