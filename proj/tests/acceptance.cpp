// Acceptance suite: runs every verification criterion at its stated
// tolerance and prints one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mh2n/birth_death.hpp"
#include "mh2n/ctmc.hpp"
#include "mh2n/diffusion.hpp"
#include "mh2n/gauss.hpp"
#include "mh2n/model.hpp"
#include "mh2n/parallel.hpp"
#include "mh2n/skorokhod.hpp"
#include "mh2n/stats.hpp"

using namespace mh2n;

namespace {

struct Harness {
  int failures = 0;

  void run(int id, const std::string& name, double budget_seconds,
           const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = body();
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && budget_seconds > 0.0 && secs > budget_seconds) {
      ok = false;
      detail += " [over budget]";
    }
    if (!ok) ++failures;
    std::printf("[%s] criterion %2d (%.3fs, budget %gs): %s -- %s\n", ok ? "PASS" : "FAIL", id,
                secs, budget_seconds, name.c_str(), detail.c_str());
    std::fflush(stdout);
  }
};

struct Check {
  bool ok = true;
  std::ostringstream msg;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      msg << "VIOLATION: " << what << "; ";
    }
  }
  std::string done(const std::string& summary) {
    if (!ok) throw std::runtime_error(msg.str());
    return summary;
  }
};

SystemParams sb_system(long n = 100, double B = 0.0, double theta = 0.2) {
  SystemParams sp;
  sp.n = n;
  sp.B = B;
  sp.service = counterexample_b();
  sp.theta = theta;
  return sp;
}

SystemParams mix_system(long n, double B, double theta) {
  SystemParams sp;
  sp.n = n;
  sp.B = B;
  sp.service = HyperExp2{1.0 / 3.0, 0.5, 2.0};
  sp.theta = theta;
  return sp;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

int main() {
  Harness h;

  // 1. Markovian consistency: both exponents equal -theta/2 exactly.
  h.run(1, "Markovian exponents equal -theta/2 exactly", 0.001, [] {
    Check c;
    for (double theta : {0.05, 0.2, 0.5, 0.9}) {
      const ExponentReport r = exponents(theta, 1.0, 1.0);
      c.require(r.true_exponent == -theta / 2.0, "true exponent not exactly -theta/2");
      c.require(r.dai_he_exponent == -theta / 2.0, "conjectured exponent not exactly -theta/2");
    }
    return c.done("true = conjectured = -theta/2 at mu1 = mu2 = 1");
  });

  // 2. Counterexample reproduction.
  h.run(2, "moment-matched pair with distinct true exponents", 0.001, [] {
    Check c;
    const HyperExp2 sa = counterexample_a();
    const HyperExp2 sb = counterexample_b();
    c.require(std::fabs(sa.mean() - 1.0) <= 1e-12, "S_a mean != 1");
    c.require(std::fabs(sb.mean() - 1.0) <= 1e-12, "S_b mean != 1");
    c.require(std::fabs(sa.second_moment() - 4.0) <= 1e-12, "S_a second moment != 4");
    c.require(std::fabs(sb.second_moment() - 4.0) <= 1e-12, "S_b second moment != 4");
    const ExponentReport ra = exponents(0.2, sa.mu1, sa.mu2);
    const ExponentReport rb = exponents(0.2, sb.mu1, sb.mu2);
    c.require(std::fabs(ra.true_exponent - rb.true_exponent) >= 1e-3,
              "true exponents do not separate");
    c.require(std::fabs(ra.dai_he_exponent - rb.dai_he_exponent) <= 1e-12,
              "conjectured exponents should coincide on matched moments");
    return c.done("moments (1, 4) match to 1e-12; true exponents differ by " +
                  fmt(ra.true_exponent - rb.true_exponent));
  });

  // 3. Strict-gap property over random valid parameters.
  h.run(3, "true exponent strictly below the conjecture", 1.0, [] {
    Check c;
    RngStream rng(1000003);
    for (int k = 0; k < 1000; ++k) {
      const double mu1 = rng.uniform(0.1, 0.95);
      const double mu2 = rng.uniform(1.05, 6.0);
      const double theta = rng.uniform(0.01, 0.99 * mu1);
      const ExponentReport r = exponents(theta, mu1, mu2);
      c.require(r.true_exponent < r.dai_he_exponent, "gap not strict");
    }
    return c.done("1000 random unit-mean parameter sets, strict gap everywhere");
  });

  // 4. Matrix exponential closed form vs scaling-and-squaring.
  h.run(4, "matrix exponential closed form", 1.0, [] {
    Check c;
    RngStream rng(17);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double mu1 = rng.uniform(0.1, 0.95);
      const double mu2 = rng.uniform(1.05, 5.0);
      const double theta = rng.uniform(0.01, 0.99 * mu1);
      const double z = rng.uniform(0.0, 10.0);
      const auto closed = matexp_negzJ(z, theta, mu1, mu2);
      const auto oracle = expm2({-z * mu1 * mu2, 0.0, -z * (mu1 - mu2), -z * theta});
      for (int e = 0; e < 4; ++e) worst = std::max(worst, std::fabs(closed[e] - oracle[e]));
    }
    c.require(worst <= 1e-10, "entrywise gap above 1e-10");
    return c.done("1000 draws, worst entry gap " + fmt(worst));
  });

  // 5. Covariance formulas vs quadrature and limits.
  h.run(5, "covariance formulas", 30.0, [] {
    Check c;
    const SystemParams sp = sb_system();
    const Kernel gk = Kernel::make(KernelKind::kGbar, sp);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i)
      for (int j = i; j < 20; ++j) {
        const double s = 12.0 * i / 19.0;
        const double t = 12.0 * j / 19.0;
        worst = std::max(worst,
                         std::fabs(gbar_increment_var(gk, s, t) -
                                   gbar_increment_var_quadrature(gk, s, t)));
      }
    c.require(worst <= 1e-8, "increment variance vs quadrature above 1e-8");

    const ExponentReport er = exponents(sp.theta, sp.service.mu1, sp.service.mu2);
    const double t_far = 50.0 / sp.theta;
    c.require(std::fabs(gbar_increment_var(gk, 0.0, t_far) - er.sup_variance) <= 1e-6,
              "variance limit misses the closed form");

    const Kernel pk = Kernel::make(KernelKind::kPi, sp);
    double pi_min = 0.0;
    for (int i = 0; i < 100; ++i)
      for (int j = i; j < 100; ++j)
        pi_min = std::min(pi_min, kernel_eval(pk, 0.25 * i, 0.25 * j));
    c.require(pi_min >= -1e-12, "lower-bound kernel goes negative");
    c.require(std::fabs(kernel_eval(pk, t_far, t_far) - er.sup_variance) <= 1e-6,
              "lower-bound variance limit mismatch");
    return c.done("quadrature gap " + fmt(worst) + ", kernel minimum " + fmt(pi_min));
  });

  // 6. Skorokhod solver vs supremum representation on a fuzz corpus.
  h.run(6, "reflection solver equals the supremum representation", 60.0, [] {
    Check c;
    const double theta = 0.2, T = 10.0;
    double worst_gap = 0.0, worst_comp = 0.0;
    for (int s = 0; s < 1000; ++s) {
      RngStream rng(660001, s);
      const PathPL x = random_fuzz_path(T, rng);
      const SkorSolution sol = solve_phi_psi(x, theta);
      for (int k = 0; k <= 100; ++k) {
        const double t = T * k / 100.0;
        worst_gap = std::max(worst_gap, std::fabs(sol.phi.value(t) - reed_sup(x, theta, t)));
      }
      worst_comp = std::max(worst_comp, sol.complementarity_residual(1e-8));
    }
    c.require(worst_gap <= 1e-8, "solver vs supremum above 1e-8");
    c.require(worst_comp <= 1e-8, "complementarity residual above 1e-8");
    return c.done("1000 paths; worst solver gap " + fmt(worst_gap) + ", complementarity " +
                  fmt(worst_comp));
  });

  // 7. Pathwise reflection identity on simulated counter-chain logs.
  h.run(7, "pathwise identity for the rescaled queue", 120.0, [] {
    Check c;
    double worst = 0.0;
    for (long n : {25L, 100L}) {
      SystemParams sp = mix_system(n, -1.0, 0.2);
      const ChainParams cp = ChainParams::from(sp);
      for (int s = 0; s < 50; ++s) {
        RngStream rng(7000 + n, s);
        const TrackState init = init_halfin_whitt_track(sp, rng);
        const auto log = simulate_qtilde(init, cp, 20.0, rng);
        worst = std::max(worst, verify_skoro1(log, n, sp.theta));
      }
    }
    c.require(worst <= 1e-9, "identity discrepancy above 1e-9");
    return c.done("100 logs at n in {25, 100}; worst discrepancy " + fmt(worst));
  });

  // 8. Stochastic dominance along coupled paths.
  h.run(8, "coupled-chain dominance", 300.0, [] {
    Check c;
    std::size_t paths = 0;
    for (long n : {2L, 5L, 20L}) {
      SystemParams sp = mix_system(n, 0.0, 0.1);
      const ChainParams cp = ChainParams::from(sp);
      std::vector<int> fail(1000, 0);
      parallel_for(1000, 0, [&](std::size_t s) {
        RngStream rng(800000 + n, s);
        const ExpTriplet init = init_halfin_whitt_expanded(sp, rng);
        const auto log = simulate_qprime(CoupledState{init, init}, cp, 50.0, rng);
        const AuditReport rep = dominance_audit(log, n);
        fail[s] = rep.pass ? 0 : 1;
      });
      for (int f : fail) c.require(f == 0, "dominance violation at n=" + std::to_string(n));
      paths += 1000;
    }
    return c.done(std::to_string(paths) + " coupled paths, horizon 50, zero violations");
  });

  // 9. Marginal fidelity of the coupling.
  h.run(9, "coupled marginals match the direct chains", 300.0, [] {
    Check c;
    SystemParams sp = mix_system(5, 0.0, 0.1);
    const FidelityReport rep = marginal_fidelity(10000, 5.0, sp, 901, 0);
    c.require(rep.p_value_lower > 0.01, "lower marginal p-value " + fmt(rep.p_value_lower));
    c.require(rep.p_value_upper > 0.01, "upper marginal p-value " + fmt(rep.p_value_upper));
    return c.done("N = 10000, T = 5: p-values " + fmt(rep.p_value_lower) + " / " +
                  fmt(rep.p_value_upper));
  });

  // 10. Gaussian sup tail vs the closed-form exponent.
  h.run(10, "supremum tail exponent (finite-x proxy)", 600.0, [] {
    Check c;
    const SystemParams sp = sb_system();
    const Kernel k = Kernel::make(KernelKind::kGbar, sp);
    const ExponentReport er = exponents(sp.theta, sp.service.mu1, sp.service.mu2);
    const double sigma = std::sqrt(er.sup_variance);
    const SupSamples ss = sample_sup(k, sigma / 50.0, HorizonPolicy{}, 100000, 424242, 0, false);
    const TailFit fit = tail_fit(ss.sups, 2.0 * sigma, 3.5 * sigma);
    const double rel = std::fabs(fit.slope - er.true_exponent) / std::fabs(er.true_exponent);
    c.require(rel <= 0.15, "fitted slope off by " + fmt(100.0 * rel) + "%");
    return c.done("fitted " + fmt(fit.slope) + " vs theory " + fmt(er.true_exponent) +
                  " (rel err " + fmt(100.0 * rel) +
                  "%; finite-x polynomial prefactor bias included)");
  });

  // 11. Limit-process refutation of the conjectured exponent.
  h.run(11, "stationary tail of the limit system refutes the conjecture", 1800.0, [] {
    Check c;
    const SystemParams sp = sb_system();
    const ExponentReport er = exponents(sp.theta, sp.service.mu1, sp.service.mu2);
    const TailCampaign tc = limit_tail_campaign(sp, 1e-3, 60000.0, 8, 1101, -1.0, -1.0, 0);
    // Conjecture refuted when even the least-negative end of the slope band
    // lies strictly below the conjectured exponent.
    c.require(tc.ci_hi < er.dai_he_exponent,
              "bootstrap band [" + fmt(tc.ci_lo) + ", " + fmt(tc.ci_hi) +
                  "] does not exclude the conjectured " + fmt(er.dai_he_exponent));

    // Common-noise agreement to machine precision before the sign change.
    RngStream rng(1102);
    const CommonNoisePair pair = euler_common_noise(LimitState{0.2, 1.5}, 1e-3, 20.0, sp, rng);
    bool equal = true;
    for (std::size_t k = 0; k < pair.ybar.t.size(); ++k) {
      if (pair.first_nonpositive > 0.0 && pair.ybar.t[k] > pair.first_nonpositive) break;
      if (pair.ybar.y1[k] != pair.yhat.y1[k] || pair.ybar.y2[k] != pair.yhat.y2[k]) equal = false;
    }
    c.require(equal, "linearized and piecewise paths diverge before the sign change");
    return c.done("fitted " + fmt(tc.slope) + " (95% band [" + fmt(tc.ci_lo) + ", " +
                  fmt(tc.ci_hi) + "]) vs conjectured " + fmt(er.dai_he_exponent) + ", true " +
                  fmt(er.true_exponent) + "; dt drift " + fmt(tc.refinement_drift));
  });

  // 12. Decoupling inequality and positivity.
  h.run(12, "decoupling inequality and positivity", 300.0, [] {
    Check c;
    SystemParams sp = mix_system(100, 0.0, 0.2);
    LowerBoundConfig cfg;
    cfg.C1 = 1.0;
    cfg.C2 = 2.0;
    cfg.C3 = 0.0;
    cfg.C4 = 1e-9;  // the box may be arbitrarily thin but not empty
    const GordonCheck gc = gordon_check(cfg, sp, 5.0, 2.0, 100000, 1201, 200, 0);
    c.require(gc.holds_within_3se, "inequality violated beyond 3 SE: lhs " + fmt(gc.lhs) +
                                       " rhs " + fmt(gc.rhs));
    const PositivityEstimate pe = positivity_prob(cfg, sp, 5.0, 100000, 1202, 200, 0);
    c.require(pe.wilson_lo_99 > 0.0, "positivity not bounded away from zero");
    return c.done("lhs " + fmt(gc.lhs) + " >= rhs " + fmt(gc.rhs) + " - 3SE; positivity " +
                  fmt(pe.estimate) + " (99% lower bound " + fmt(pe.wilson_lo_99) + ")");
  });

  // 13. Compensated-abandonment error shrinks with n.
  h.run(13, "error process vanishes along the scaling", 600.0, [] {
    Check c;
    std::vector<double> medians;
    for (long n : {100L, 1000L, 10000L}) {
      SystemParams sp = mix_system(n, 0.0, 0.2);
      const ChainParams cp = ChainParams::from(sp);
      std::vector<double> sups(50);
      parallel_for(50, 0, [&](std::size_t s) {
        RngStream rng(1300 + n, s);
        const TrackState init = init_halfin_whitt_track(sp, rng);
        const auto log = simulate_qtilde(init, cp, 10.0, rng);
        sups[s] = err_process_supnorm(log, n, sp.theta);
      });
      std::sort(sups.begin(), sups.end());
      medians.push_back(0.5 * (sups[24] + sups[25]));
    }
    c.require(medians[1] <= medians[0], "median did not decrease from n=100 to n=1000");
    c.require(medians[2] <= medians[1], "median did not decrease from n=1000 to n=10000");
    return c.done("median sup-norms " + fmt(medians[0]) + " -> " + fmt(medians[1]) + " -> " +
                  fmt(medians[2]));
  });

  // 14. Markovian cross-validation against the birth-death oracle.
  h.run(14, "simulated tail matches the birth-death oracle", 300.0, [] {
    Check c;
    SystemParams sp;
    sp.n = 400;
    sp.B = 0.0;
    sp.service = HyperExp2{0.5, 1.0, 1.0};
    sp.theta = 0.2;
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.5};
    const SurvivalCurve curve =
        steady_tail_estimate(Gen::kQ, sp, default_burn_in(sp), 2000.0, 8, grid, 1400, 0);
    BirthDeathOracle oracle(sp.n, sp.lambda(), 1.0, sp.theta);
    std::ostringstream detail;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double exact = oracle.scaled_queue_survival(grid[i]);
      c.require(std::fabs(curve.survival[i] - exact) <= 3.0 * curve.se[i],
                "x = " + fmt(grid[i]) + ": " + fmt(curve.survival[i]) + " vs " + fmt(exact) +
                    " (se " + fmt(curve.se[i]) + ")");
      detail << fmt(curve.survival[i]) << "/" << fmt(exact) << " ";
    }
    return c.done("survival sim/oracle: " + detail.str());
  });

  if (h.failures == 0) std::printf("acceptance: all criteria pass\n");
  else std::printf("acceptance: %d criterion(s) FAILED\n", h.failures);
  return h.failures == 0 ? 0 : 1;
}
