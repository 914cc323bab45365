// Acceptance run: the nine invariant checks at full size on the shipped default configuration,
// one PASS/FAIL line per criterion. Exit status 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>

#include "oracles.hpp"
#include "skewprod/experiment.hpp"

using namespace skewprod;

namespace {

// Largest gap between the library Hilbert distance and brute-force triples at 32 nodes.
double hilbert_oracle_gap(const ConeParams& cone, std::uint64_t seed, std::size_t pairs) {
  std::mt19937_64 rng(seed);
  const auto pool = sample_cone_elements(rng, cone, 32, 2 * pairs);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const GridFn& f = pool[2 * i];
    const GridFn& g = pool[2 * i + 1];
    const double lib = hilbert_distance(f, g, cone, 32);
    const std::vector<double> fv(f.values().begin(), f.values().end());
    const std::vector<double> gv(g.values().begin(), g.values().end());
    const double ref = oracle::hilbert_distance(fv, gv, cone.K, cone.alpha);
    const double gap = std::fabs(lib - ref);
    worst = std::isfinite(lib) && std::isfinite(ref) && gap <= worst ? worst : gap;
    if (!std::isfinite(gap)) return std::numeric_limits<double>::infinity();
  }
  return worst;
}

}  // namespace

int main() {
  try {
    const ExperimentConfig cfg = ExperimentConfig::load(SKEWPROD_CONFIG_DIR "/default.json");
    const HypothesisConstants constants = config_constants(cfg);
    const CheckContext ctx = make_context(cfg, constants);
    const VerifyPlan plan;  // full-size samples and tolerances

    std::cout << "config " << cfg.hash() << " seed " << cfg.seed << "\n";
    std::cout << "constants: gamma=" << constants.gamma << " zeta=" << constants.zeta
              << " theta=" << constants.theta
              << (constants.all_passed() ? " (all inequalities hold)" : " (some inequalities fail)")
              << "\n";

    PhiTable table(cfg.hash());
    auto results = run_verify(ctx, plan, cfg.seed, &table);

    // Runtime budgets on top of the numerical checks.
    results[0].result.passed = results[0].result.passed && results[0].seconds < 60.0 * plan.constants.size();
    results[4].result.passed = results[4].result.passed && results[4].seconds < 600.0;

    const double oracle_gap = hilbert_oracle_gap(ctx.cone, cfg.seed + 1, 20);
    results[2].result.detail["oracle_gap_n32"] = oracle_gap;
    results[2].result.passed = results[2].result.passed && oracle_gap <= 1e-9;

    bool all = true;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& r = results[k].result;
      all = all && r.passed;
      std::cout << (r.passed ? "PASS" : "FAIL") << " criterion " << (k + 1) << ": " << r.name
                << " " << r.detail.dump() << "\n";
    }
    return all ? 0 : 1;
  } catch (const Error& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << "\n";
    return 1;
  }
}
