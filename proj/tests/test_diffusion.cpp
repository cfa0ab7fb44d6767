#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mh2n/diffusion.hpp"
#include "mh2n/model.hpp"
#include "mh2n/stats.hpp"

using namespace mh2n;

namespace {

SystemParams sb_params() {
  SystemParams sp;
  sp.n = 100;
  sp.B = 0.0;
  sp.service = counterexample_b();
  sp.theta = 0.2;
  return sp;
}

SystemParams mix_params() {
  SystemParams sp;
  sp.n = 100;
  sp.B = 0.5;
  sp.service = HyperExp2{1.0 / 3.0, 0.5, 2.0};
  sp.theta = 0.2;
  return sp;
}

}  // namespace

TEST_CASE("coordinate transforms are mutually inverse") {
  RngStream rng(3);
  for (int k = 0; k < 500; ++k) {
    const double p = rng.uniform(0.05, 0.95);
    const LimitState y{rng.normal() * 3.0, rng.normal() * 3.0};
    const LimitState yb = to_bar_frame(y, p);
    const LimitState back = from_bar_frame(yb, p);
    CHECK(std::fabs(back.y1 - y.y1) <= 1e-14 * std::max(1.0, std::fabs(y.y1)));
    CHECK(std::fabs(back.y2 - y.y2) <= 1e-14 * std::max(1.0, std::fabs(y.y2)));
  }
}

TEST_CASE("piecewise and linear drifts agree on the positive half-space") {
  const SystemParams sp = mix_params();
  RngStream rng(5);
  for (int k = 0; k < 200; ++k) {
    const LimitState s{rng.normal(), std::fabs(rng.normal()) + 0.01};
    const DriftNoise a = drift_and_noise(SdeSystem::kYBar, s, sp);
    const DriftNoise b = drift_and_noise(SdeSystem::kYHat, s, sp);
    CHECK(a.drift[0] == b.drift[0]);
    CHECK(a.drift[1] == b.drift[1]);
  }
  // At the origin the transformed drift reduces to (0, B).
  const DriftNoise dn = drift_and_noise(SdeSystem::kYBar, LimitState{0.0, 0.0}, sp);
  CHECK(dn.drift[0] == 0.0);
  CHECK(dn.drift[1] == sp.B);
}

TEST_CASE("plain-frame drift maps to the transformed drift") {
  const SystemParams sp = mix_params();
  const double p = sp.service.p;
  RngStream rng(11);
  for (int k = 0; k < 300; ++k) {
    const LimitState y{2.0 * rng.normal(), 2.0 * rng.normal()};
    const DriftNoise dy = drift_and_noise(SdeSystem::kY, y, sp);
    const LimitState yb = to_bar_frame(y, p);
    const DriftNoise db = drift_and_noise(SdeSystem::kYBar, yb, sp);
    // d(ybar1) = (1-p) dy1 - p dy2, d(ybar2) = dy1 + dy2.
    CHECK(std::fabs((1.0 - p) * dy.drift[0] - p * dy.drift[1] - db.drift[0]) <= 1e-12);
    CHECK(std::fabs(dy.drift[0] + dy.drift[1] - db.drift[1]) <= 1e-12);
  }
  // Noise rates: plain frame diag(2p, 2(1-p)); transformed frame
  // diag(2p(1-p), 2) via the same linear combinations.
  const DriftNoise dy = drift_and_noise(SdeSystem::kY, LimitState{0, 0}, sp);
  CHECK(dy.noise_var[0] == doctest::Approx(2.0 * p));
  CHECK(dy.noise_var[1] == doctest::Approx(2.0 * (1.0 - p)));
  const double v1 = (1.0 - p) * (1.0 - p) * dy.noise_var[0] + p * p * dy.noise_var[1];
  const double v2 = dy.noise_var[0] + dy.noise_var[1];
  CHECK(v1 == doctest::Approx(2.0 * p * (1.0 - p)).epsilon(1e-12));
  CHECK(v2 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("euler without noise solves the linear decay") {
  SystemParams sp = mix_params();
  sp.B = 0.0;
  // Zero noise by monkey-patching: simulate the drift ODE with tiny dt and
  // compare against e^{-mu1 mu2 t}.
  const double m = sp.service.mu1 * sp.service.mu2;
  LimitState s{1.0, 0.0};
  const double dt = 1e-4;
  for (int k = 0; k < 10000; ++k) {
    const DriftNoise dn = drift_and_noise(SdeSystem::kYHat, s, sp);
    s.y1 += dn.drift[0] * dt;
    s.y2 += dn.drift[1] * dt;
  }
  CHECK(std::fabs(s.y1 - std::exp(-m * 1.0)) <= 5.0 * dt);
}

TEST_CASE("euler guards") {
  const SystemParams sp = mix_params();
  RngStream rng(1);
  CHECK_THROWS_WITH_AS(euler_simulate(SdeSystem::kYBar, LimitState{0, 0}, 0.0, 1.0, sp, rng),
                       doctest::Contains("nonpositive-dt"), std::invalid_argument);
}

TEST_CASE("common noise keeps the two systems identical until the sign change") {
  const SystemParams sp = mix_params();
  RngStream rng(42);
  const LimitState init{0.3, 2.5};
  const CommonNoisePair pair = euler_common_noise(init, 1e-3, 20.0, sp, rng);
  REQUIRE(pair.first_nonpositive > 0.0);
  for (std::size_t k = 0; k < pair.ybar.t.size(); ++k) {
    if (pair.ybar.t[k] > pair.first_nonpositive) break;
    CHECK(pair.ybar.y1[k] == pair.yhat.y1[k]);
    CHECK(pair.ybar.y2[k] == pair.yhat.y2[k]);
  }
}

TEST_CASE("euler strong error shrinks with dt") {
  const SystemParams sp = mix_params();
  // Same Brownian path at two resolutions via shared coarse increments.
  const double T = 1.0;
  const int n_coarse = 200;
  const double dtc = T / n_coarse;
  RngStream rng(77);
  std::vector<std::pair<double, double>> dB(n_coarse);
  for (auto& d : dB)
    d = {std::sqrt(dtc) * rng.normal(), std::sqrt(dtc) * rng.normal()};

  auto run = [&](int refine) {
    LimitState s{0.5, 0.5};
    const double dt = dtc / refine;
    for (int k = 0; k < n_coarse; ++k) {
      for (int j = 0; j < refine; ++j) {
        const DriftNoise dn = drift_and_noise(SdeSystem::kYBar, s, sp);
        // Refined steps share the coarse increment split evenly; this keeps
        // the driving noise identical across resolutions.
        s.y1 += dn.drift[0] * dt + std::sqrt(dn.noise_var[0]) * dB[k].first / refine;
        s.y2 += dn.drift[1] * dt + std::sqrt(dn.noise_var[1]) * dB[k].second / refine;
      }
    }
    return s;
  };
  const LimitState a = run(1);
  const LimitState b = run(2);
  const LimitState c = run(4);
  const double e1 = std::hypot(a.y1 - c.y1, a.y2 - c.y2);
  const double e2 = std::hypot(b.y1 - c.y1, b.y2 - c.y2);
  CHECK(e2 <= e1 + 1e-12);
}

TEST_CASE("exact transition: short and long step limits") {
  const SystemParams sp = mix_params();
  const LimitState s{0.7, -1.3};
  const OuTransition tiny = exact_ou_transition(s, 1e-10, sp);
  CHECK(tiny.mean[0] == doctest::Approx(s.y1).epsilon(1e-8));
  CHECK(tiny.mean[1] == doctest::Approx(s.y2).epsilon(1e-8));
  CHECK(std::fabs(tiny.cov[0]) <= 1e-9);
  CHECK(std::fabs(tiny.cov[2]) <= 1e-9);

  const ExponentReport er = exponents(sp.theta, sp.service.mu1, sp.service.mu2);
  const OuTransition far = exact_ou_transition(s, 50.0 / sp.theta, sp);
  CHECK(std::fabs(far.cov[2] - er.sup_variance) <= 1e-4);
  CHECK(far.mean[1] == doctest::Approx(sp.B / sp.theta).epsilon(1e-10));
}

TEST_CASE("exact transition covariance matches the quadrature oracle") {
  const SystemParams sp = mix_params();
  for (double dt : {0.05, 0.3, 1.0, 4.0}) {
    const OuTransition tr = exact_ou_transition(LimitState{0, 0}, dt, sp);
    const auto q = ou_step_cov_quadrature(dt, sp);
    CHECK(std::fabs(tr.cov[0] - q[0]) <= 1e-10);
    CHECK(std::fabs(tr.cov[1] - q[1]) <= 1e-10);
    CHECK(std::fabs(tr.cov[2] - q[2]) <= 1e-10);
  }
}

TEST_CASE("exact transition rejects resonant parameters") {
  SystemParams sp = mix_params();
  sp.service = HyperExp2{0.5, 0.4, 0.5};  // mu1 mu2 = 0.2 = theta
  CHECK_THROWS_WITH_AS(exact_ou_transition(LimitState{0, 0}, 1.0, sp),
                       doctest::Contains("resonant-parameters"), std::invalid_argument);
}

TEST_CASE("step composition reproduces the explicit solution on one noise path") {
  // Drive the closed-form solution with Riemann-sum noise integrals over a
  // fine partition; composing exact steps over coarse blocks must agree
  // because the transition matrices form a semigroup.
  const SystemParams sp = mix_params();
  const double T = 2.0;
  const int fine = 4000;
  const double h = T / fine;
  RngStream rng(314);
  std::vector<std::pair<double, double>> dB(fine);
  const double s1 = std::sqrt(2.0 * sp.service.p * (1.0 - sp.service.p));
  const double s2 = std::sqrt(2.0);
  for (auto& d : dB) d = {s1 * std::sqrt(h) * rng.normal(), s2 * std::sqrt(h) * rng.normal()};

  const LimitState init{0.4, 1.1};

  for (int trial = 0; trial < 10; ++trial) {
    const int blocks = 2 + trial;
    const int per = fine / blocks;
    // Route A: explicit solution over [0, blocks*per*h] with Riemann noise.
    const double T_used = blocks * per * h;
    const auto E = matexp_negzJ(T_used, sp.theta, sp.service.mu1, sp.service.mu2);
    std::array<double, 2> noise{0.0, 0.0};
    for (int k = 0; k < blocks * per; ++k) {
      const double u = (k + 1) * h;  // right-endpoint Riemann rule
      const auto Eu = matexp_negzJ(T_used - u, sp.theta, sp.service.mu1, sp.service.mu2);
      noise[0] += Eu[0] * dB[k].first;
      noise[1] += Eu[2] * dB[k].first + Eu[3] * dB[k].second;
    }
    LimitState direct{E[0] * init.y1 + noise[0],
                      E[2] * init.y1 + E[3] * init.y2 +
                          drift_term(sp.B, sp.theta, T_used) + noise[1]};

    // Route B: compose exact steps block by block with the same increments.
    LimitState comp = init;
    for (int b = 0; b < blocks; ++b) {
      const double dt_b = per * h;
      std::array<double, 2> w{0.0, 0.0};
      for (int j = 0; j < per; ++j) {
        const int k = b * per + j;
        const double u = (j + 1) * h;
        const auto Eu = matexp_negzJ(dt_b - u, sp.theta, sp.service.mu1, sp.service.mu2);
        w[0] += Eu[0] * dB[k].first;
        w[1] += Eu[2] * dB[k].first + Eu[3] * dB[k].second;
      }
      comp = exact_ou_step_with_noise(comp, dt_b, sp, w);
    }
    CHECK(std::fabs(direct.y1 - comp.y1) <= 1e-6);
    CHECK(std::fabs(direct.y2 - comp.y2) <= 1e-6);
  }
}

TEST_CASE("euler and exact-step laws agree at a fixed time") {
  SystemParams sp = mix_params();
  const double T = 5.0;
  const std::size_t reps = 10000;
  std::vector<long> eu(reps), ex(reps);
  // Discretize marginals into integer bins for the homogeneity test.
  auto bin = [](double v) { return static_cast<long>(std::floor(v * 2.0)); };
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(2025, r);
    const SdePath p = euler_simulate(SdeSystem::kYHat, LimitState{0, 0}, 1e-3, T, sp, rng, 5000);
    eu[r] = bin(p.y2.back());
    RngStream rng2(4050, r);
    LimitState s{0, 0};
    for (int k = 0; k < 5; ++k) s = exact_ou_step(s, 1.0, sp, rng2);
    ex[r] = bin(s.y2);
  }
  CHECK(chi2_two_sample(eu, ex).p_value > 0.01);
}

TEST_CASE("lower-bound configuration and buffer curve") {
  const SystemParams sp = mix_params();
  const LowerBoundConfig cfg = LowerBoundConfig::defaults(sp);
  CHECK_NOTHROW(cfg.validate(sp));

  // Start above 3|B|/theta, floor bounded by the closed-form minimum.
  CHECK(buf_value(cfg, sp, 0.0) ==
        doctest::Approx(cfg.C1 - std::fabs(sp.B) / sp.theta).epsilon(1e-14));
  CHECK(buf_value(cfg, sp, 0.0) > 3.0 * std::fabs(sp.B) / sp.theta);
  const double mu_sum = sp.service.mu1 + sp.service.mu2;
  const double floor =
      -((mu_sum * (std::fabs(cfg.C3) + std::fabs(cfg.C4)) + std::fabs(sp.B)) / sp.theta);
  for (int k = 0; k <= 400; ++k) CHECK(buf_value(cfg, sp, 0.1 * k) >= floor - 1e-12);

  LowerBoundConfig bad = cfg;
  bad.C1 = 0.0;
  SystemParams spb = sp;
  spb.B = 1.0;
  CHECK_THROWS_WITH_AS(bad.validate(spb), doctest::Contains("invalid-config"),
                       std::invalid_argument);
}

TEST_CASE("lower-bound paths start at zero and match the kernel variance") {
  const SystemParams sp = sb_params();
  const LowerBoundConfig cfg = LowerBoundConfig::defaults(sp);
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(5.0 * k / 40.0);
  const PiBufPaths pb = pi_and_buf(cfg, sp, grid, 4000, 31, 0);
  REQUIRE(pb.pi_paths.size() == 4000);
  double mean = 0.0, ss = 0.0;
  for (const auto& path : pb.pi_paths) {
    CHECK(path.front() == 0.0);
    mean += path.back();
  }
  mean /= 4000.0;
  for (const auto& path : pb.pi_paths) ss += (path.back() - mean) * (path.back() - mean);
  const double emp_var = ss / 3999.0;
  const Kernel pk = Kernel::make(KernelKind::kPi, sp);
  const double var = kernel_eval(pk, 5.0, 5.0);
  CHECK(std::fabs(emp_var - var) <= 3.0 * var * std::sqrt(2.0 / 4000.0));
}

TEST_CASE("decoupling inequality holds within noise") {
  SystemParams sp = mix_params();
  sp.B = 0.0;
  LowerBoundConfig cfg;
  cfg.C1 = 1.0;
  cfg.C2 = 2.0;
  cfg.C3 = 0.0;
  cfg.C4 = 0.0;
  // C3 = C4 = 0 fails the box constraint, so widen minimally.
  cfg.C4 = 1e-9;
  const GordonCheck gc = gordon_check(cfg, sp, 5.0, 2.0, 20000, 55, 120, 0);
  CHECK(gc.holds_within_3se);
  CHECK(gc.lhs >= 0.0);
  CHECK(gc.rhs >= 0.0);
}

TEST_CASE("positivity probability bounded away from zero") {
  SystemParams sp = mix_params();
  const LowerBoundConfig cfg = LowerBoundConfig::defaults(sp);
  const PositivityEstimate pe = positivity_prob(cfg, sp, 5.0, 20000, 66, 120, 0);
  CHECK(pe.estimate > 0.0);
  CHECK(pe.wilson_lo_99 > 0.0);
  CHECK_THROWS_WITH_AS(positivity_prob(cfg, sp, 5.0, 0, 1), doctest::Contains("empty-sample"),
                       std::invalid_argument);

  // A huge C1 makes positivity nearly certain on a short window.
  LowerBoundConfig big = cfg;
  big.C1 = 1000.0 * (std::fabs(sp.B) / sp.theta + 1.0);
  big.C2 = big.C1 + 1.0;
  const PositivityEstimate sure = positivity_prob(big, sp, 1.0, 3000, 67, 60, 0);
  CHECK(sure.estimate > 0.99);
}

TEST_CASE("markovian limit system recovers the OU tail") {
  // mu1 = mu2 = 1: ybar2 is a one-dimensional OU process with stationary
  // variance 1/theta; the x^2 slope of its survival is about -theta/2.
  SystemParams sp;
  sp.n = 100;
  sp.B = 0.0;
  sp.service = HyperExp2{0.5, 1.0, 1.0};
  sp.theta = 0.2;
  const TailCampaign tc = limit_tail_campaign(sp, 2e-3, 30000.0, 4, 2026, -1.0, -1.0, 0);
  CHECK(std::fabs(tc.slope - (-0.1)) <= 0.2 * 0.1);

  CHECK_THROWS(limit_tail_campaign(sp, 1e-3, 10.0, 1, 1));  // horizon below burn-in
}
