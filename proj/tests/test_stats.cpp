#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mh2n/rng.hpp"
#include "mh2n/stats.hpp"

using namespace mh2n;

TEST_CASE("mean, se and batch means") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const MeanSe m = mean_and_se(xs);
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));

  std::vector<double> ys(300);
  RngStream rng(3);
  for (auto& y : ys) y = rng.normal();
  const MeanSe b = batch_means(ys, 30);
  CHECK(std::fabs(b.mean) < 5.0 * b.se + 0.2);
}

TEST_CASE("chi-square survival against known values") {
  // Q(x; df) reference values (R: pchisq(x, df, lower.tail=FALSE)).
  CHECK(chi2_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(18.307038053275146, 10.0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(2.0, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("two-sample chi-square: same law accepts, different laws reject") {
  RngStream rng(11);
  std::vector<long> a, b, c;
  for (int k = 0; k < 4000; ++k) {
    a.push_back(static_cast<long>(rng.uniform_index(6)));
    b.push_back(static_cast<long>(rng.uniform_index(6)));
    c.push_back(static_cast<long>(rng.uniform_index(3)));  // different support
  }
  CHECK(chi2_two_sample(a, b).p_value > 0.01);
  CHECK(chi2_two_sample(a, c).p_value < 1e-6);
  CHECK_THROWS(chi2_two_sample({}, a));
}

TEST_CASE("wilson interval") {
  const Wilson w = wilson_interval(50, 100, 1.959963984540054);
  CHECK(w.estimate == doctest::Approx(0.5));
  CHECK(w.lo == doctest::Approx(0.404).epsilon(0.01));
  CHECK(w.hi == doctest::Approx(0.596).epsilon(0.01));
  CHECK(wilson_interval(0, 100, 2.5758).lo == doctest::Approx(0.0));
  CHECK_THROWS(wilson_interval(0, 0, 1.96));
}

TEST_CASE("ols slope") {
  std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  std::vector<double> y{1.0, 3.0, 5.0, 7.0};
  const auto [a, b] = ols(x, y);
  CHECK(a == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("normal survival") {
  CHECK(normal_sf(0.0) == doctest::Approx(0.5));
  CHECK(normal_sf(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-8));
}

TEST_CASE("rng streams: determinism and independence of index") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool same = true, diff = false;
  for (int k = 0; k < 64; ++k) {
    const auto xa = a.raw();
    if (xa != b.raw()) same = false;
    if (xa != c.raw()) diff = true;
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("rng moments sanity") {
  RngStream rng(5);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(ss / n - 1.0) < 0.02);

  double es = 0.0;
  for (int k = 0; k < n; ++k) es += rng.expo(2.0);
  CHECK(es / n == doctest::Approx(0.5).epsilon(0.02));
}
