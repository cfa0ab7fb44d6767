#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mh2n {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSe mean_and_se(std::span<const double> xs);

// Splits xs into n_batches contiguous batches and returns (mean, SE of the
// mean estimated from the between-batch variance).
MeanSe batch_means(std::span<const double> xs, std::size_t n_batches);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

// Two-sample chi-square homogeneity test on integer-valued samples.
// Adjacent value bins are merged until every pooled bin has at least
// min_expected counts. Returns {statistic, p_value, df}.
struct Chi2Result {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
};
Chi2Result chi2_two_sample(std::span<const long> xs, std::span<const long> ys,
                           double min_expected = 5.0);

// Wilson score interval for a binomial proportion at confidence z (e.g.
// z = 2.5758 for 99%).
struct Wilson {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};
Wilson wilson_interval(std::size_t successes, std::size_t trials, double z);

// Ordinary least squares y = a + b x; returns (intercept a, slope b).
std::pair<double, double> ols(std::span<const double> x, std::span<const double> y);

// Standard normal survival function.
double normal_sf(double x);

}  // namespace mh2n
