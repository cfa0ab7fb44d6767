#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mh2n/model.hpp"
#include "mh2n/rng.hpp"

namespace mh2n {

// Closed-form covariance families of the limit analysis. All are symmetric
// in (s,t); GBAR and PI vanish when either argument is 0 and are defined only
// for mu1 mu2 > theta.
enum class KernelKind {
  kOuStationary,  // p(1-p)/(mu1 mu2) e^{-mu1 mu2 |t-s|}
  kOuZeroA,       // OU started at 0, reversion mu1 mu2, stationary var p(1-p)/(mu1 mu2)
  kOuZeroB,       // OU started at 0, reversion theta, stationary var 1/theta
  kIou,           // time-integrated stationary OU
  kRenLimit,      // pooled equilibrium-renewal Gaussian limit
  kGbar,          // centered reflected-limit driver
  kPi,            // lower-bound process
  kSkorLimit      // Brownian-minus-renewal net input (centered part)
};

struct Kernel {
  KernelKind kind = KernelKind::kOuStationary;
  double p = 0.5;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double theta = 1.0;
  double B = 0.0;

  static Kernel make(KernelKind kind, const SystemParams& sp) {
    return Kernel{kind, sp.service.p, sp.service.mu1, sp.service.mu2, sp.theta, sp.B};
  }
  bool vanishes_at_zero() const { return kind != KernelKind::kOuStationary; }
};

std::string kernel_name(KernelKind k);

// Covariance value E[Z(s) Z(t)]. Throws "parameter-domain" when
// mu1 mu2 <= theta for the GBAR / PI families.
double kernel_eval(const Kernel& k, double s, double t);

// Increment variance E[(GBAR(t) - GBAR(s))^2] in closed form.
double gbar_increment_var(const Kernel& k, double s, double t);

// Canonical metric d(s,t) = sqrt(E[(Z(t)-Z(s))^2]) derived from the kernel.
double canonical_metric(const Kernel& k, double s, double t);

// Renewal function of the ordinary hyper-exponential renewal process.
double renewal_M(double t, const HyperExp2& d);
// Discretized renewal-equation solver, used as the independent oracle.
double renewal_M_numeric(double t, const HyperExp2& d, double h = 5e-4);

// Deterministic drift added to the centered driver for the non-centered
// process: (B/theta)(1 - e^{-theta t}); bounded by |B|/theta uniformly.
double drift_term(double B, double theta, double t);

struct MetricBounds {
  double diameter = 0.0;  // sqrt of the supremum variance
  double C0 = 0.0;        // Hoelder constant: d(s,t) <= C0 sqrt(t-s)
  std::function<double(double, double)> d;             // canonical metric
  std::function<double(double, double)> metric_bound;  // decaying envelope
};

// Requires Assumption 1 and unit mean.
MetricBounds metric_and_bounds(double theta, double mu1, double mu2, double p);

struct CoveringBounds {
  std::function<double(double)> N_bound;  // covering-number bound in eps
  double entropy_integral_upper = 0.0;    // int_0^inf sqrt(log N(eps)) d eps
};

CoveringBounds covering_and_entropy(double theta, double mu1, double mu2, double p);

// Closed form of exp(-z J) for J = [[mu1 mu2, 0], [mu1 - mu2, theta]].
// Throws "resonant-parameters" when mu1 mu2 == theta unless allow_limit_form,
// in which case the off-diagonal limit (mu1-mu2) z e^{-theta z} is used.
std::array<double, 4> matexp_negzJ(double z, double theta, double mu1, double mu2,
                                   bool allow_limit_form = false);

// J^n in closed form (the induction behind the matrix exponential).
std::array<double, 4> J_power(int n, double theta, double mu1, double mu2);

// Scaling-and-squaring numerical matrix exponential of a 2x2 matrix.
std::array<double, 4> expm2(const std::array<double, 4>& a);

// Time grid with factored covariance for exact Gaussian sampling.
class GaussGrid {
 public:
  // Adaptive grid: steps sized so the canonical distance between adjacent
  // points is <= eps_d, from t0 up to horizon.
  static GaussGrid adaptive(const Kernel& k, double eps_d, double horizon);
  // Explicit times.
  static GaussGrid from_times(const Kernel& k, std::vector<double> times);

  const std::vector<double>& times() const { return times_; }
  double jitter() const { return jitter_; }
  // Relative Frobenius reconstruction error of the factor.
  double factor_error() const { return factor_error_; }

  // One exact Gaussian draw into out (size = times().size()).
  void sample(RngStream& rng, std::vector<double>& out) const;
  // Draws n_paths paths and reduces each with fn(path values).
  std::vector<double> sample_reduce(std::size_t n_paths, std::uint64_t seed, int n_threads,
                                    const std::function<double(const std::vector<double>&)>& fn) const;

 private:
  GaussGrid() = default;
  void factor(const Kernel& k);

  std::vector<double> times_;
  std::vector<double> chol_;  // lower-triangular factor, row-major
  double jitter_ = 0.0;
  double factor_error_ = 0.0;
};

// Horizon policy for supremum estimation: decay-based truncation at
// T* = (1/theta) log(C0 / eps_d), optionally overridden.
struct HorizonPolicy {
  double explicit_T = -1.0;  // < 0 means use the decay rule
};

struct SupSamples {
  std::vector<double> sups;
  double sup_variance = 0.0;  // closed-form supremum variance of the kernel
  std::size_t grid_points = 0;
  double horizon = 0.0;

  std::string to_csv() const;
};

// Grid-based supremum sampling: grid to resolution eps_d, tail truncated by
// the decay envelope, covariance factored once, n_paths exact draws; for the
// non-centered process the deterministic drift is added before the sup.
SupSamples sample_sup(const Kernel& k, double eps_d, HorizonPolicy policy, std::size_t n_paths,
                      std::uint64_t seed, int n_threads = 0, bool add_drift = false);

struct TailFit {
  double slope = 0.0;          // fitted d log P(X > x) / d x^2
  double ci_lo = 0.0;          // bootstrap 2.5% quantile
  double ci_hi = 0.0;          // bootstrap 97.5% quantile
  std::size_t exceed_hi = 0;   // exceedances at the upper edge
  std::vector<double> grid_x;
  std::vector<double> log_survival;
};

// Least-squares slope of log empirical survival against x^2 over
// [x_lo, x_hi], with a bootstrap confidence band. Requires at least
// min_exceed exceedances at x_hi ("insufficient-exceedances").
TailFit tail_fit(const std::vector<double>& samples, double x_lo, double x_hi,
                 std::size_t n_grid = 25, std::size_t n_boot = 200, std::uint64_t seed = 7,
                 std::size_t min_exceed = 100);

// Composite Gauss-Legendre quadrature of f over [a, b].
double quad_gl(const std::function<double(double)>& f, double a, double b, int panels = 16,
               int nodes = 32);

// Deterministic double-quadrature oracle for the GBAR increment variance:
//   (mu1-mu2)^2 int_s^t int_s^t e^{-theta(y1+y2)} Cov_OU(y1,y2) dy1 dy2
//   + 2 int_s^t e^{-2 theta y} dy.
double gbar_increment_var_quadrature(const Kernel& k, double s, double t);

// Same idea for the PI covariance, integrating the started-at-zero OU kernel.
double pi_cov_quadrature(const Kernel& k, double s, double t);

}  // namespace mh2n
