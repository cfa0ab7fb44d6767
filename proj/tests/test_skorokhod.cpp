#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mh2n/ctmc.hpp"
#include "mh2n/skorokhod.hpp"

using namespace mh2n;

TEST_CASE("piecewise path evaluation and integral") {
  // x(t) = t on [0,1), jump +2 at 1, then slope -1.
  PathPL x({{0.0, 0.0, 1.0}, {1.0, 2.0, -1.0}}, 3.0);
  CHECK(x.value(0.0) == 0.0);
  CHECK(x.value(0.5) == doctest::Approx(0.5));
  CHECK(x.left_value(1.0) == doctest::Approx(1.0));
  CHECK(x.value(1.0) == doctest::Approx(3.0));
  CHECK(x.value(2.0) == doctest::Approx(2.0));
  CHECK(x.integral(1.0) == doctest::Approx(0.5));
  CHECK(x.integral(2.0) == doctest::Approx(0.5 + 3.0 - 0.5));
  CHECK(x.to_csv().find("t_break") == 0);

  CHECK_THROWS(PathPL({{1.0, 0.0, 0.0}}, 2.0));          // must start at 0
  CHECK_THROWS(PathPL({{0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, 2.0));  // strictly increasing
}

TEST_CASE("solver: pure negative drift is fully pushed") {
  const double theta = 0.3;
  PathPL x = PathPL::constant_slope(-1.0, 5.0);
  const SkorSolution sol = solve_phi_psi(x, theta);
  for (double t : {0.0, 0.7, 2.0, 5.0}) {
    CHECK(sol.phi.value(t) == doctest::Approx(0.0));
    CHECK(sol.psi.value(t) == doctest::Approx(t).epsilon(1e-12));
  }
  CHECK(sol.identity_residual(x) <= 1e-12);
  CHECK(sol.complementarity_residual() <= 1e-12);
}

TEST_CASE("solver: positive drift solves the linear decay problem") {
  const double theta = 0.4, c = 2.0;
  PathPL x = PathPL::constant_slope(c, 8.0);
  const SkorSolution sol = solve_phi_psi(x, theta);
  for (double t : {0.0, 0.3, 1.0, 4.0, 8.0}) {
    CHECK(sol.phi.value(t) ==
          doctest::Approx(c / theta * (1.0 - std::exp(-theta * t))).epsilon(1e-13));
    CHECK(sol.psi.value(t) == doctest::Approx(0.0));
  }
  CHECK(sol.identity_residual(x) <= 1e-12);
}

TEST_CASE("solver: zero input gives zero output") {
  PathPL x = PathPL::zero(2.0);
  const SkorSolution sol = solve_phi_psi(x, 1.0);
  CHECK(sol.phi.value(2.0) == 0.0);
  CHECK(sol.psi.value(2.0) == 0.0);
}

TEST_CASE("solver guards") {
  PathPL x({{0.0, 1.0, 0.0}}, 1.0);  // value at 0 is 1
  CHECK_THROWS_WITH_AS(solve_phi_psi(x, 1.0), doctest::Contains("nonzero-origin"),
                       std::invalid_argument);
  PathPL y = PathPL::zero(1.0);
  CHECK_THROWS_WITH_AS(solve_phi_psi(y, 0.0), doctest::Contains("nonpositive-theta"),
                       std::invalid_argument);
}

TEST_CASE("zeta closed forms") {
  const double theta = 0.5;
  PathPL lin = PathPL::constant_slope(1.0, 10.0);
  for (double s : {0.0, 1.0, 3.0})
    for (double t : {0.0, 0.5, 2.0, 5.0})
      CHECK(zeta(lin, s, t, theta) ==
            doctest::Approx((1.0 - std::exp(-theta * t)) / theta).epsilon(1e-13));

  // Unit jump at u = 2: impulse response decays from the jump onward.
  PathPL imp({{0.0, 0.0, 0.0}, {2.0, 1.0, 0.0}}, 10.0);
  const double s = 1.0;
  CHECK(zeta(imp, s, 0.5, theta) == doctest::Approx(0.0));
  for (double t : {1.0, 1.5, 4.0})
    CHECK(zeta(imp, s, t, theta) ==
          doctest::Approx(std::exp(-theta * (t - (2.0 - s)))).epsilon(1e-13));

  CHECK(zeta(imp, 0.0, 0.0, theta) == 0.0);
  CHECK_THROWS_WITH_AS(zeta(imp, -1.0, 1.0, theta), doctest::Contains("s-out-of-range"),
                       std::invalid_argument);
}

TEST_CASE("sup representation on closed-form cases") {
  const double theta = 0.5;
  PathPL down = PathPL::constant_slope(-1.0, 6.0);
  for (double t : {0.0, 1.0, 3.0, 6.0}) CHECK(reed_sup(down, theta, t) == doctest::Approx(0.0));

  const double c = 1.7;
  PathPL up = PathPL::constant_slope(c, 6.0);
  for (double t : {0.5, 2.0, 6.0})
    CHECK(reed_sup(up, theta, t) ==
          doctest::Approx(c / theta * (1.0 - std::exp(-theta * t))).epsilon(1e-13));
}

TEST_CASE("solver and sup representation agree on a fuzz corpus") {
  const double theta = 0.2, T = 10.0;
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    RngStream rng(5150, s);
    const PathPL x = random_fuzz_path(T, rng);
    const SkorSolution sol = solve_phi_psi(x, theta);
    for (int k = 0; k <= 100; ++k) {
      const double t = T * k / 100.0;
      worst = std::max(worst, std::fabs(sol.phi.value(t) - reed_sup(x, theta, t)));
    }
    CHECK(sol.identity_residual(x) <= 1e-8);
    CHECK(sol.complementarity_residual() <= 1e-8);
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("adding a positive jump never decreases the reflected path") {
  const double theta = 0.35, T = 8.0;
  for (int s = 0; s < 30; ++s) {
    RngStream rng(808, s);
    const PathPL x = random_fuzz_path(T, rng);
    const double u = rng.uniform(0.1, T - 0.1);
    const PathPL y = x.with_jump(u, 0.5 + rng.uniform());
    const SkorSolution sx = solve_phi_psi(x, theta);
    const SkorSolution sy = solve_phi_psi(y, theta);
    for (int k = 0; k <= 64; ++k) {
      const double t = u + (T - u) * k / 64.0;
      CHECK(sy.phi.value(t) >= sx.phi.value(t) - 1e-10);
    }
  }
}

TEST_CASE("lipschitz ratio is finite and stable over corpora") {
  const double theta = 0.2, T = 10.0;
  auto corpus_max = [&](std::uint64_t seed) {
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      RngStream rng(seed, s);
      const PathPL x = random_fuzz_path(T, rng);
      const PathPL y = random_fuzz_path(T, rng);
      worst = std::max(worst, lipschitz_ratio(x, y, theta));
    }
    return worst;
  };
  const double m1 = corpus_max(1);
  const double m2 = corpus_max(2);
  CHECK(std::isfinite(m1));
  CHECK(std::isfinite(m2));
  CHECK(m1 > 0.0);
  // Stability across corpus redraws: same order of magnitude.
  CHECK(std::fabs(std::log(m1 / m2)) < std::log(5.0));

  PathPL x = PathPL::constant_slope(1.0, 2.0);
  CHECK_THROWS_WITH_AS(lipschitz_ratio(x, x, theta), doctest::Contains("identical-paths"),
                       std::invalid_argument);
}

TEST_CASE("net-input path of a hand-written log") {
  // n = 4, one arrival at t = 1 into a full system: W becomes 1, so the path
  // jumps by +1/2 and then climbs at rate theta * 1 / 2.
  const long n = 4;
  const double theta = 0.3;
  EventLog<TrackState> log;
  log.init = TrackState{2, 2, 0, 0, 0, 0, 0};
  log.horizon = 3.0;
  Event<TrackState> ev;
  ev.t = 1.0;
  ev.action.tag = "t_arrival";
  ev.post = TrackState{2, 2, 1, 1, 0, 0, 0};
  log.events.push_back(ev);
  const PathPL x = build_skor_path(log, n, theta);
  CHECK(x.value(0.5) == 0.0);
  CHECK(x.value(1.0) == doctest::Approx(0.5));
  CHECK(x.value(2.0) == doctest::Approx(0.5 + theta * 0.5 * 1.0));

  // Empty log: zero path.
  EventLog<TrackState> empty;
  empty.init = TrackState{2, 2, 0, 0, 0, 0, 0};
  empty.horizon = 3.0;
  const PathPL z = build_skor_path(empty, n, theta);
  CHECK(z.value(3.0) == 0.0);
}

TEST_CASE("pathwise reflection identity on simulated logs") {
  SystemParams sp;
  sp.n = 25;
  sp.B = -1.0;
  sp.service = HyperExp2{1.0 / 3.0, 0.5, 2.0};
  sp.theta = 0.2;
  const ChainParams cp = ChainParams::from(sp);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    RngStream rng(9001, s);
    const TrackState init = init_halfin_whitt_track(sp, rng);
    const auto log = simulate_qtilde(init, cp, 20.0, rng);
    worst = std::max(worst, verify_skoro1(log, sp.n, sp.theta));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("error process: trivial and simulated") {
  EventLog<TrackState> empty;
  empty.init = TrackState{2, 2, 0, 0, 0, 0, 0};
  empty.horizon = 5.0;
  CHECK(err_process_supnorm(empty, 4, 0.3) == 0.0);

  SystemParams sp;
  sp.n = 100;
  sp.B = 0.0;
  sp.service = HyperExp2{1.0 / 3.0, 0.5, 2.0};
  sp.theta = 0.2;
  const ChainParams cp = ChainParams::from(sp);
  RngStream rng(17, 0);
  const TrackState init = init_halfin_whitt_track(sp, rng);
  const auto log = simulate_qtilde(init, cp, 10.0, rng);
  CHECK(err_process_supnorm(log, sp.n, sp.theta) >= 0.0);
}
