#include "mh2n/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace mh2n {

MeanSe mean_and_se(std::span<const double> xs) {
  MeanSe r;
  r.count = xs.size();
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  r.se = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

MeanSe batch_means(std::span<const double> xs, std::size_t n_batches) {
  if (n_batches < 2 || xs.size() < n_batches)
    throw std::invalid_argument("batch_means: insufficient-data");
  std::vector<double> bm(n_batches, 0.0);
  const std::size_t per = xs.size() / n_batches;
  for (std::size_t b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += xs[i];
    bm[b] = s / static_cast<double>(per);
  }
  return mean_and_se(bm);
}

namespace {

// Lower incomplete gamma P(a,x) by series, upper Q(a,x) by continued
// fraction (Lentz); the usual split at x < a+1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi2_sf(double x, double df) { return gamma_q(0.5 * df, 0.5 * x); }

Chi2Result chi2_two_sample(std::span<const long> xs, std::span<const long> ys,
                           double min_expected) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument("chi2_two_sample: empty-sample");
  std::map<long, std::pair<double, double>> counts;
  for (long v : xs) counts[v].first += 1.0;
  for (long v : ys) counts[v].second += 1.0;

  // Merge adjacent value bins until each pooled bin is large enough.
  std::vector<std::pair<double, double>> bins;
  double accx = 0.0, accy = 0.0;
  for (const auto& [v, c] : counts) {
    accx += c.first;
    accy += c.second;
    if (accx + accy >= 2.0 * min_expected) {
      bins.emplace_back(accx, accy);
      accx = accy = 0.0;
    }
  }
  if (accx + accy > 0.0) {
    if (!bins.empty()) {
      bins.back().first += accx;
      bins.back().second += accy;
    } else {
      bins.emplace_back(accx, accy);
    }
  }

  Chi2Result r;
  if (bins.size() < 2) {
    r.df = 0;
    r.p_value = 1.0;
    return r;
  }
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  double stat = 0.0;
  for (const auto& [cx, cy] : bins) {
    const double tot = cx + cy;
    const double ex = tot * nx / (nx + ny);
    const double ey = tot * ny / (nx + ny);
    stat += (cx - ex) * (cx - ex) / ex + (cy - ey) * (cy - ey) / ey;
  }
  r.statistic = stat;
  r.df = static_cast<int>(bins.size()) - 1;
  r.p_value = chi2_sf(stat, static_cast<double>(r.df));
  return r;
}

Wilson wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: empty-sample");
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (ph + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  Wilson w;
  w.estimate = ph;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

std::pair<double, double> ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("ols: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {intercept, slope};
}

double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace mh2n
