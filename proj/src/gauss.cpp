#include "mh2n/gauss.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "mh2n/parallel.hpp"
#include "mh2n/stats.hpp"

namespace mh2n {

std::string kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::kOuStationary: return "ou_stationary";
    case KernelKind::kOuZeroA: return "ou_zero_a";
    case KernelKind::kOuZeroB: return "ou_zero_b";
    case KernelKind::kIou: return "iou";
    case KernelKind::kRenLimit: return "ren_limit";
    case KernelKind::kGbar: return "gbar";
    case KernelKind::kPi: return "pi";
    case KernelKind::kSkorLimit: return "skor_limit";
  }
  return "?";
}

namespace {

void require_domain(const Kernel& k) {
  if (k.mu1 * k.mu2 <= k.theta)
    throw std::invalid_argument("kernel_eval: parameter-domain (needs mu1 mu2 > theta)");
}

double q_of(const Kernel& k) { return k.p * (1.0 - k.p) * (k.mu1 - k.mu2) * (k.mu1 - k.mu2); }

// E[REN_limit(s) REN_limit(t)] for s <= t.
double ren_cov(const Kernel& k, double s, double t) {
  const double m = k.mu1 * k.mu2;
  const double k2 = q_of(k) / (m * m);
  const double k3 = q_of(k) / (m * m * m);
  return (2.0 * k2 + 1.0) * s -
         k3 * (1.0 - std::exp(-m * s) - std::exp(-m * t) + std::exp(-m * (t - s)));
}

double iou_cov(const Kernel& k, double s, double t) {
  const double m = k.mu1 * k.mu2;
  return k.p * (1.0 - k.p) / (m * m * m) *
         (2.0 * m * s + std::exp(-m * s) + std::exp(-m * t) - std::exp(-m * (t - s)) - 1.0);
}

// The six-term PI covariance for s <= t.
double pi_cov(const Kernel& k, double s, double t) {
  require_domain(k);
  const double m = k.mu1 * k.mu2;
  const double th = k.theta;
  const double q = q_of(k);
  const double a1 = q / ((m + th) * (m - th) * th);
  const double a2 = 2.0 * q / ((m + th) * (m - th) * (m - th));
  const double a3 = q / (th * (m - th) * (m - th));
  const double a4 = q / (m * (m + th) * (m - th));
  const double a5 = q / (m * (m - th) * (m - th));
  return (a1 + 1.0 / th) * std::exp(-th * (t - s)) + a2 * std::exp(-m * s - th * t) -
         (a3 + 1.0 / th) * std::exp(-th * (s + t)) - a4 * std::exp(-m * (t - s)) +
         a2 * std::exp(-th * s - m * t) - a5 * std::exp(-m * (s + t));
}

}  // namespace

double gbar_increment_var(const Kernel& k, double s, double t) {
  require_domain(k);
  if (s > t) std::swap(s, t);
  const double m = k.mu1 * k.mu2;
  const double th = k.theta;
  const double q = q_of(k);
  const double a_plus = q / (th * m * (m + th));
  const double a_minus = q / (th * m * (m - th));
  const double d = 2.0 * q / (m * (m - th) * (m + th));
  return (a_plus + 1.0 / th) * std::exp(-2.0 * th * s) -
         (a_minus + 1.0 / th) * std::exp(-2.0 * th * t) +
         d * std::exp((m - th) * s) * std::exp(-(m + th) * t);
}

double kernel_eval(const Kernel& k, double s, double t) {
  if (s > t) std::swap(s, t);
  if (s < 0.0) throw std::invalid_argument("kernel_eval: negative time");
  const double m = k.mu1 * k.mu2;
  switch (k.kind) {
    case KernelKind::kOuStationary:
      return k.p * (1.0 - k.p) / m * std::exp(-m * (t - s));
    case KernelKind::kOuZeroA:
      return k.p * (1.0 - k.p) / m * (std::exp(-m * (t - s)) - std::exp(-m * (t + s)));
    case KernelKind::kOuZeroB:
      return (std::exp(-k.theta * (t - s)) - std::exp(-k.theta * (t + s))) / k.theta;
    case KernelKind::kIou:
      return iou_cov(k, s, t);
    case KernelKind::kRenLimit:
      return ren_cov(k, s, t);
    case KernelKind::kGbar:
      // Covariance from increment variances, using GBAR(0) = 0.
      return 0.5 * (gbar_increment_var(k, 0.0, s) + gbar_increment_var(k, 0.0, t) -
                    gbar_increment_var(k, s, t));
    case KernelKind::kPi:
      return pi_cov(k, s, t);
    case KernelKind::kSkorLimit:
      // Centered part of B^0(t) - REN(t) + B t: independent sum.
      return s + ren_cov(k, s, t);
  }
  throw std::logic_error("kernel_eval: unknown kind");
}

double canonical_metric(const Kernel& k, double s, double t) {
  if (k.kind == KernelKind::kGbar) return std::sqrt(std::max(0.0, gbar_increment_var(k, s, t)));
  const double v = kernel_eval(k, s, s) + kernel_eval(k, t, t) - 2.0 * kernel_eval(k, s, t);
  return std::sqrt(std::max(0.0, v));
}

double renewal_M(double t, const HyperExp2& d) {
  const double m = d.mu1 * d.mu2;
  const double k2 = d.p * (1.0 - d.p) * (d.mu1 - d.mu2) * (d.mu1 - d.mu2) / (m * m);
  return t + k2 * (1.0 - std::exp(-m * t));
}

double renewal_M_numeric(double t, const HyperExp2& d, double h) {
  // M(t) = F(t) + int_0^t M(t-s) f(s) ds, trapezoidal discretization.
  const auto F = [&](double u) {
    return 1.0 - d.p * std::exp(-d.mu1 * u) - (1.0 - d.p) * std::exp(-d.mu2 * u);
  };
  const auto f = [&](double u) {
    return d.p * d.mu1 * std::exp(-d.mu1 * u) + (1.0 - d.p) * d.mu2 * std::exp(-d.mu2 * u);
  };
  const std::size_t n = static_cast<std::size_t>(std::ceil(t / h));
  const double dt = t / static_cast<double>(n);
  std::vector<double> M(n + 1, 0.0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(static_cast<double>(i) * dt);
  for (std::size_t i = 1; i <= n; ++i) {
    const double ti = static_cast<double>(i) * dt;
    // Trapezoid: int ~ dt (0.5 f_0 M_i + sum_{j=1}^{i-1} f_j M_{i-j} + 0.5 f_i M_0)
    // with M_0 = 0; the M_i term moves to the left side.
    double sum = 0.0;
    for (std::size_t j = 1; j < i; ++j) sum += fv[j] * M[i - j];
    M[i] = (F(ti) + dt * sum) / (1.0 - 0.5 * dt * fv[0]);
  }
  return M[n];
}

double drift_term(double B, double theta, double t) {
  return B / theta * (1.0 - std::exp(-theta * t));
}

MetricBounds metric_and_bounds(double theta, double mu1, double mu2, double p) {
  Kernel k{KernelKind::kGbar, p, mu1, mu2, theta, 0.0};
  require_domain(k);
  const double m = mu1 * mu2;
  const double q = q_of(k);
  const double a_minus_tot = q / (m * (m - theta) * theta) + 1.0 / theta;
  const double sup_var = q / (theta * m * (m + theta)) + 1.0 / theta;
  MetricBounds b;
  b.diameter = std::sqrt(sup_var);
  b.C0 = 4.0 * std::sqrt(a_minus_tot) * std::sqrt(1.0 + m + theta);
  b.d = [k](double s, double t) { return canonical_metric(k, s, t); };
  b.metric_bound = [a_minus_tot, m, theta](double s, double t) {
    if (s > t) std::swap(s, t);
    return 4.0 * std::sqrt(a_minus_tot) *
           std::sqrt(1.0 - std::exp(-(m + theta) * (t - s))) * std::exp(-theta * s);
  };
  return b;
}

CoveringBounds covering_and_entropy(double theta, double mu1, double mu2, double p) {
  const MetricBounds mb = metric_and_bounds(theta, mu1, mu2, p);
  const double C0 = mb.C0;
  const double diam = mb.diameter;
  CoveringBounds cb;
  cb.N_bound = [C0, diam, theta](double eps) {
    if (eps >= diam) return 1.0;
    return C0 * C0 * C0 / (theta * eps * eps * eps) + 2.0;
  };
  // Adaptive refinement of int_0^diam sqrt(log N(eps)) d eps; the integrand
  // is integrable (log^{1/2} growth near 0).
  const auto integrand = [&](double eps) { return std::sqrt(std::log(cb.N_bound(eps))); };
  double prev = 0.0;
  for (int panels = 16;; panels *= 2) {
    const double lo = diam * 1e-12;
    double val = quad_gl(integrand, lo, diam, panels, 16);
    val += lo * integrand(lo);  // crude cap on the unintegrated sliver
    if (panels > 16 && std::fabs(val - prev) < 1e-8 * std::max(1.0, std::fabs(val))) {
      cb.entropy_integral_upper = val;
      break;
    }
    prev = val;
    if (panels > 4096) {
      cb.entropy_integral_upper = val;
      break;
    }
  }
  return cb;
}

std::array<double, 4> matexp_negzJ(double z, double theta, double mu1, double mu2,
                                   bool allow_limit_form) {
  const double m = mu1 * mu2;
  if (z < 0.0) throw std::invalid_argument("matexp_negzJ: z must be nonnegative");
  double offdiag;
  if (m == theta) {
    if (!allow_limit_form)
      throw std::invalid_argument("matexp_negzJ: resonant-parameters (mu1 mu2 == theta)");
    offdiag = -(mu1 - mu2) * z * std::exp(-theta * z);
  } else {
    offdiag = (mu1 - mu2) / (m - theta) * (std::exp(-m * z) - std::exp(-theta * z));
  }
  return {std::exp(-m * z), 0.0, offdiag, std::exp(-theta * z)};
}

std::array<double, 4> J_power(int n, double theta, double mu1, double mu2) {
  if (n < 0) throw std::invalid_argument("J_power: n must be nonnegative");
  const double m = mu1 * mu2;
  if (n == 0) return {1.0, 0.0, 0.0, 1.0};
  if (m == theta) throw std::invalid_argument("J_power: resonant-parameters");
  const double mn = std::pow(m, n);
  const double tn = std::pow(theta, n);
  return {mn, 0.0, (mu1 - mu2) / (m - theta) * (mn - tn), tn};
}

std::array<double, 4> expm2(const std::array<double, 4>& a) {
  // Scaling and squaring with a Taylor series on the scaled matrix.
  const double norm = std::max(std::fabs(a[0]) + std::fabs(a[1]), std::fabs(a[2]) + std::fabs(a[3]));
  int s = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    ++s;
    scale *= 0.5;
  }
  const std::array<double, 4> b{a[0] * scale, a[1] * scale, a[2] * scale, a[3] * scale};
  auto mul = [](const std::array<double, 4>& x, const std::array<double, 4>& y) {
    return std::array<double, 4>{x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
                                 x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]};
  };
  std::array<double, 4> result{1.0, 0.0, 0.0, 1.0};
  std::array<double, 4> term{1.0, 0.0, 0.0, 1.0};
  for (int k = 1; k <= 30; ++k) {
    term = mul(term, b);
    const double inv = 1.0 / static_cast<double>(k);
    for (auto& x : term) x *= inv;
    for (int i = 0; i < 4; ++i) result[i] += term[i];
    if (std::fabs(term[0]) + std::fabs(term[1]) + std::fabs(term[2]) + std::fabs(term[3]) < 1e-18)
      break;
  }
  for (int k = 0; k < s; ++k) result = mul(result, result);
  return result;
}

// ---------------------------------------------------------------------------
// GaussGrid
// ---------------------------------------------------------------------------

GaussGrid GaussGrid::adaptive(const Kernel& k, double eps_d, double horizon) {
  if (!(eps_d > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("GaussGrid: need positive resolution and horizon");
  GaussGrid g;
  double t = 0.0;
  // Skip t = 0 itself for kernels pinned at 0 (singular covariance row).
  while (t < horizon) {
    // Find the largest step with canonical distance <= eps_d by doubling and
    // bisection; the increment variance is monotone in the step.
    double lo = 0.0, hi = std::max(1e-8, eps_d * eps_d * 0.5);
    while (canonical_metric(k, t, std::min(horizon, t + hi)) < eps_d && t + hi < horizon) hi *= 2.0;
    if (t + hi >= horizon && canonical_metric(k, t, horizon) <= eps_d) {
      g.times_.push_back(horizon);
      break;
    }
    for (int it = 0; it < 60 && hi - lo > 1e-9 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (canonical_metric(k, t, t + mid) <= eps_d) lo = mid; else hi = mid;
    }
    t += std::max(lo, 1e-10);
    g.times_.push_back(std::min(t, horizon));
  }
  if (g.times_.empty()) g.times_.push_back(horizon);
  g.factor(k);
  return g;
}

GaussGrid GaussGrid::from_times(const Kernel& k, std::vector<double> times) {
  if (times.empty()) throw std::invalid_argument("GaussGrid: empty grid");
  GaussGrid g;
  g.times_ = std::move(times);
  g.factor(k);
  return g;
}

void GaussGrid::factor(const Kernel& k) {
  const std::size_t n = times_.size();
  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = kernel_eval(k, times_[j], times_[i]);
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  const double kn = K.norm();
  for (double jit : {0.0, 1e-12, 1e-10, 1e-8}) {
    Eigen::MatrixXd Kj = K;
    if (jit > 0.0) Kj.diagonal().array() += jit;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd L = llt.matrixL();
    const double err = (L * L.transpose() - K).norm() / std::max(kn, 1e-300);
    if (err > 1e-8) continue;
    jitter_ = jit;
    factor_error_ = err;
    chol_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        chol_[i * n + j] =
            j <= i ? L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) : 0.0;
    return;
  }
  throw std::runtime_error("GaussGrid: not-psd (factorization failed at max jitter)");
}

void GaussGrid::sample(RngStream& rng, std::vector<double>& out) const {
  const std::size_t n = times_.size();
  std::vector<double> z(n);
  for (double& x : z) x = rng.normal();
  out.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = &chol_[i * n];
    for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
    out[i] = acc;
  }
}

std::vector<double> GaussGrid::sample_reduce(
    std::size_t n_paths, std::uint64_t seed, int n_threads,
    const std::function<double(const std::vector<double>&)>& fn) const {
  std::vector<double> out(n_paths);
  const std::size_t block = 256;
  const std::size_t n_blocks = (n_paths + block - 1) / block;
  parallel_for(n_blocks, n_threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    std::vector<double> path;
    const std::size_t lo = b * block, hi = std::min(n_paths, lo + block);
    for (std::size_t i = lo; i < hi; ++i) {
      sample(rng, path);
      out[i] = fn(path);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Supremum sampling and tail fitting
// ---------------------------------------------------------------------------

std::string SupSamples::to_csv() const {
  std::ostringstream os;
  os << "sup\n";
  char buf[64];
  for (double s : sups) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", s);
    os << buf;
  }
  return os.str();
}

SupSamples sample_sup(const Kernel& k, double eps_d, HorizonPolicy policy, std::size_t n_paths,
                      std::uint64_t seed, int n_threads, bool add_drift) {
  double horizon = policy.explicit_T;
  if (horizon <= 0.0) {
    // Decay rule: beyond T* the whole tail fits in one eps_d-ball.
    const MetricBounds mb = metric_and_bounds(k.theta, k.mu1, k.mu2, k.p);
    horizon = std::max(1.0, std::log(std::max(mb.C0 / eps_d, 1.0)) / k.theta);
  }
  const GaussGrid grid = GaussGrid::adaptive(k, eps_d, horizon);

  SupSamples out;
  out.grid_points = grid.times().size();
  out.horizon = horizon;
  if (k.kind == KernelKind::kGbar || k.kind == KernelKind::kPi) {
    const double m = k.mu1 * k.mu2;
    out.sup_variance = q_of(k) / (k.theta * m * (m + k.theta)) + 1.0 / k.theta;
  } else {
    for (double t : grid.times())
      out.sup_variance = std::max(out.sup_variance, kernel_eval(k, t, t));
  }

  std::vector<double> drift;
  if (add_drift) {
    drift.reserve(grid.times().size());
    for (double t : grid.times()) drift.push_back(drift_term(k.B, k.theta, t));
  }
  const bool clamp_zero = k.vanishes_at_zero();
  out.sups = grid.sample_reduce(n_paths, seed, n_threads, [&](const std::vector<double>& path) {
    double m = clamp_zero ? 0.0 : -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.size(); ++i) {
      const double v = add_drift ? path[i] + drift[i] : path[i];
      if (v > m) m = v;
    }
    return m;
  });
  return out;
}

TailFit tail_fit(const std::vector<double>& samples, double x_lo, double x_hi, std::size_t n_grid,
                 std::size_t n_boot, std::uint64_t seed, std::size_t min_exceed) {
  if (samples.empty()) throw std::invalid_argument("tail_fit: empty-sample");
  if (!(x_hi > x_lo)) throw std::invalid_argument("tail_fit: bad window");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  if (x_lo >= sorted.back()) throw std::invalid_argument("tail_fit: insufficient-exceedances");

  // Grid evenly spaced in x^2.
  TailFit fit;
  std::vector<double> x2grid(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i)
    x2grid[i] = x_lo * x_lo + (x_hi * x_hi - x_lo * x_lo) * static_cast<double>(i) /
                                  static_cast<double>(n_grid - 1);

  const double n = static_cast<double>(sorted.size());
  std::vector<std::size_t> exceed(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double x = std::sqrt(x2grid[i]);
    exceed[i] = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
  }
  fit.exceed_hi = exceed.back();
  if (fit.exceed_hi < min_exceed) throw std::invalid_argument("tail_fit: insufficient-exceedances");

  std::vector<double> logs(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) logs[i] = std::log(static_cast<double>(exceed[i]) / n);
  fit.grid_x = x2grid;
  fit.log_survival = logs;
  fit.slope = ols(x2grid, logs).second;

  // Bootstrap by multinomial resampling of the bin occupancy between
  // thresholds (equivalent to resampling the sample).
  RngStream rng(seed);
  std::vector<double> cell_p(n_grid + 1);
  cell_p[0] = (n - static_cast<double>(exceed[0])) / n;
  for (std::size_t i = 1; i < n_grid; ++i)
    cell_p[i] = static_cast<double>(exceed[i - 1] - exceed[i]) / n;
  cell_p[n_grid] = static_cast<double>(exceed.back()) / n;

  std::vector<double> slopes;
  slopes.reserve(n_boot);
  std::vector<double> blogs(n_grid);
  for (std::size_t b = 0; b < n_boot; ++b) {
    // Sequential binomial construction of a multinomial draw.
    std::size_t remaining = sorted.size();
    double p_rest = 1.0;
    std::vector<std::size_t> cells(n_grid + 1, 0);
    for (std::size_t c = 0; c <= n_grid && remaining > 0; ++c) {
      double pc = c == n_grid ? 1.0 : std::min(1.0, cell_p[c] / std::max(p_rest, 1e-300));
      std::size_t cnt = 0;
      if (pc >= 1.0) {
        cnt = remaining;
      } else {
        // Normal approximation for large counts, exact Bernoulli for small.
        const double mean = static_cast<double>(remaining) * pc;
        if (remaining > 1000 && mean > 30.0 && mean < static_cast<double>(remaining) - 30.0) {
          const double sd = std::sqrt(static_cast<double>(remaining) * pc * (1.0 - pc));
          const double draw = std::round(mean + sd * rng.normal());
          cnt = static_cast<std::size_t>(std::clamp(draw, 0.0, static_cast<double>(remaining)));
        } else {
          for (std::size_t i = 0; i < remaining; ++i)
            if (rng.uniform() < pc) ++cnt;
        }
      }
      cells[c] = cnt;
      remaining -= cnt;
      p_rest -= cell_p[c];
    }
    // Rebuild exceedance counts from the right.
    std::size_t acc = 0;
    std::vector<std::size_t> bex(n_grid);
    for (std::size_t i = n_grid; i-- > 0;) {
      if (i == n_grid - 1) acc = cells[n_grid];
      else acc += cells[i + 1];
      bex[i] = acc;
    }
    bool ok = true;
    for (std::size_t i = 0; i < n_grid; ++i) {
      if (bex[i] == 0) {
        ok = false;
        break;
      }
      blogs[i] = std::log(static_cast<double>(bex[i]) / n);
    }
    if (!ok) continue;
    slopes.push_back(ols(x2grid, blogs).second);
  }
  std::sort(slopes.begin(), slopes.end());
  if (!slopes.empty()) {
    fit.ci_lo = slopes[static_cast<std::size_t>(0.025 * static_cast<double>(slopes.size() - 1))];
    fit.ci_hi = slopes[static_cast<std::size_t>(0.975 * static_cast<double>(slopes.size() - 1))];
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Quadrature oracles
// ---------------------------------------------------------------------------

namespace {

// 32-point Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton
// iteration on the Legendre polynomial.
struct GlTable {
  std::vector<double> x, w;
  explicit GlTable(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double xi = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = p2;
        }
        const double dp = static_cast<double>(n) * (xi * p1 - p0) / (xi * xi - 1.0);
        const double dx = p1 / dp;
        xi -= dx;
        if (std::fabs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      const double dp = static_cast<double>(n) * (xi * p1 - p0) / (xi * xi - 1.0);
      x[i] = xi;
      w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
  }
};

const GlTable& gl32() {
  static const GlTable t(32);
  return t;
}

const GlTable& gl16() {
  static const GlTable t(16);
  return t;
}

}  // namespace

double quad_gl(const std::function<double(double)>& f, double a, double b, int panels, int nodes) {
  const GlTable& tab = nodes <= 16 ? gl16() : gl32();
  double total = 0.0;
  const double h = (b - a) / static_cast<double>(panels);
  for (int p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    const double half = 0.5 * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < tab.x.size(); ++i) acc += tab.w[i] * f(mid + half * tab.x[i]);
    total += acc * half;
  }
  return total;
}

double gbar_increment_var_quadrature(const Kernel& k, double s, double t) {
  if (s > t) std::swap(s, t);
  const Kernel ou{KernelKind::kOuStationary, k.p, k.mu1, k.mu2, k.theta, 0.0};
  const double c = (k.mu1 - k.mu2) * (k.mu1 - k.mu2);
  const int panels = std::max(4, static_cast<int>(std::ceil((t - s) * std::max(1.0, k.mu1 * k.mu2))));
  // Double integral over the triangle s <= y1 <= y2 <= t, doubled.
  const auto inner = [&](double y2) {
    return quad_gl(
        [&](double y1) { return std::exp(-k.theta * (y1 + y2)) * kernel_eval(ou, y1, y2); }, s, y2,
        panels, 32);
  };
  const double dbl = 2.0 * c * quad_gl(inner, s, t, panels, 32);
  const double ito = (std::exp(-2.0 * k.theta * s) - std::exp(-2.0 * k.theta * t)) / k.theta;
  return dbl + ito;
}

double pi_cov_quadrature(const Kernel& k, double s, double t) {
  if (s > t) std::swap(s, t);
  const Kernel oub{KernelKind::kOuZeroB, k.p, k.mu1, k.mu2, k.theta, 0.0};
  const double m = k.mu1 * k.mu2;
  const double c = (k.mu1 - k.mu2) * (k.mu1 - k.mu2);
  const double pq = k.p * (1.0 - k.p);
  // Smooth branch of the started-at-zero kernel for y1 <= y2.
  const auto f_lo = [&](double y1, double y2) {
    return std::exp(k.theta * (y1 + y2)) * pq / m *
           (std::exp(-m * (y2 - y1)) - std::exp(-m * (y2 + y1)));
  };
  const int panels = std::max(4, static_cast<int>(std::ceil(t * std::max(1.0, m))));
  // Rectangle [0,s] x [0,t] split along the diagonal: the square part is
  // twice the lower triangle by symmetry, the strip has y1 <= y2 throughout.
  const auto tri_inner = [&](double y2) {
    return quad_gl([&](double y1) { return f_lo(y1, y2); }, 0.0, y2, panels, 32);
  };
  const double tri = s > 0.0 ? 2.0 * quad_gl(tri_inner, 0.0, s, panels, 32) : 0.0;
  const auto strip_inner = [&](double y2) {
    return quad_gl([&](double y1) { return f_lo(y1, y2); }, 0.0, s, panels, 32);
  };
  const double strip = t > s ? quad_gl(strip_inner, s, t, panels, 32) : 0.0;
  return c * std::exp(-k.theta * (s + t)) * (tri + strip) + kernel_eval(oub, s, t);
}

}  // namespace mh2n
