#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mh2n/gauss.hpp"
#include "mh2n/model.hpp"
#include "mh2n/rng.hpp"

namespace mh2n {

enum class SdeSystem { kY, kYBar, kYHat };

// Two-dimensional diffusion state, tagged by coordinate frame.
struct LimitState {
  double y1 = 0.0;
  double y2 = 0.0;
};

// Frame transforms: ybar1 = (1-p) y1 - p y2, ybar2 = y1 + y2 and back.
LimitState to_bar_frame(const LimitState& y, double p);
LimitState from_bar_frame(const LimitState& ybar, double p);

struct DriftNoise {
  std::array<double, 2> drift{0.0, 0.0};
  std::array<double, 2> noise_var{0.0, 0.0};  // diagonal covariance rates
};

// Drift vector and (diagonal) noise covariance of the chosen system at a
// state. The Y system uses plain coordinates, YBAR/YHAT the transformed ones;
// YHAT is YBAR with the positive-part switching term dropped.
DriftNoise drift_and_noise(SdeSystem sys, const LimitState& state, const SystemParams& sp);

struct SdePath {
  std::vector<double> t;
  std::vector<double> y1;
  std::vector<double> y2;
  std::vector<double> y2_plus;  // queue-length proxy (y1 + y2)^+ resp. ybar2^+
};

// Euler-Maruyama with Gaussian increments. Throws "nonpositive-dt".
SdePath euler_simulate(SdeSystem sys, const LimitState& init, double dt, double horizon,
                       const SystemParams& sp, RngStream& rng, std::size_t record_stride = 1);

// Simulates YBAR and YHAT with the same Gaussian increments; returns the two
// paths plus the first grid time at which ybar2 <= 0 (infinity if none).
struct CommonNoisePair {
  SdePath ybar;
  SdePath yhat;
  double first_nonpositive = -1.0;  // < 0 when ybar2 stayed positive
};
CommonNoisePair euler_common_noise(const LimitState& init, double dt, double horizon,
                                   const SystemParams& sp, RngStream& rng);

// Exact transition of the linear (YHAT) system over a step:
//   mean  = expm(-dt J) state + (0, (B/theta)(1 - e^{-theta dt}))
//   cov   = int_0^dt e^{-uJ} diag(2p(1-p), 2) e^{-uJ^T} du.
// Throws "resonant-parameters" when mu1 mu2 == theta.
struct OuTransition {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 3> cov{0.0, 0.0, 0.0};  // c11, c12, c22
};
OuTransition exact_ou_transition(const LimitState& state, double delta_t, const SystemParams& sp);
LimitState exact_ou_step(const LimitState& state, double delta_t, const SystemParams& sp,
                         RngStream& rng);

// Adaptive-quadrature covariance entries, the oracle for the closed form.
std::array<double, 3> ou_step_cov_quadrature(double delta_t, const SystemParams& sp);

// Exact-step composition driven by externally supplied per-step noise
// integral vectors (int e^{-(dt-u)J} dB(u) terms); lets tests replay one
// noise realization through both the explicit solution formula and the
// step composition.
LimitState exact_ou_step_with_noise(const LimitState& state, double delta_t,
                                    const SystemParams& sp, const std::array<double, 2>& noise);

// Lower-bound configuration; the inequality constraints follow the
// non-degeneracy lemma.
struct LowerBoundConfig {
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = -1.0;
  double C4 = 1.0;
  double delta = 0.5;  // spare probability mass; not used numerically

  static LowerBoundConfig defaults(const SystemParams& sp);
  void validate(const SystemParams& sp) const;  // throws "invalid-config"
};

// Deterministic buffer curve e^{-theta t} C1 - (mu1+mu2)(|C3|+|C4|) t e^{-theta t} - |B|/theta.
double buf_value(const LowerBoundConfig& cfg, const SystemParams& sp, double t);

struct PiBufPaths {
  std::vector<double> grid;
  std::vector<std::vector<double>> pi_paths;  // exact Gaussian draws on the grid
  std::vector<double> buf;                    // deterministic curve on the grid
};

// Samples the lower-bound Gaussian process exactly on the grid and evaluates
// the buffer curve. Throws "invalid-config" when C1 <= 4|B|/theta.
PiBufPaths pi_and_buf(const LowerBoundConfig& cfg, const SystemParams& sp,
                      const std::vector<double>& grid, std::size_t n_paths, std::uint64_t seed,
                      int n_threads = 0);

struct GordonCheck {
  double lhs = 0.0;  // P(inf > 0 and terminal > x)
  double rhs = 0.0;  // P(inf > 0) P(terminal-only exceedance)
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  bool holds_within_3se = false;
};

// Monte Carlo check of the decoupling inequality
//   P(inf_{[0,T]}(Pi+BUF) > 0, Pi(T)+BUF(T) > x)
//     >= P(inf_{[0,T]}(Pi+BUF) > 0) P(Pi(T) > x - BUF(T)).
GordonCheck gordon_check(const LowerBoundConfig& cfg, const SystemParams& sp, double T, double x,
                         std::size_t n_mc, std::uint64_t seed, std::size_t grid_points = 200,
                         int n_threads = 0);

struct PositivityEstimate {
  double estimate = 0.0;
  double wilson_lo_99 = 0.0;
  std::size_t n_mc = 0;
};

// P(inf_{[0,T]}(Pi + BUF) > 0) with a 99% Wilson lower bound. Throws
// "empty-sample" when n_mc == 0.
PositivityEstimate positivity_prob(const LowerBoundConfig& cfg, const SystemParams& sp, double T,
                                   std::size_t n_mc, std::uint64_t seed,
                                   std::size_t grid_points = 200, int n_threads = 0);

struct TailCampaign {
  double slope = 0.0;  // fitted d log P / d x^2 for the stationary ybar2^+
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double dt_used = 0.0;
  double refinement_drift = 0.0;  // relative slope change in the dt study
  std::size_t exceed_hi = 0;
};

// Long-run Euler campaign on the piecewise-linear system: time-averaged
// stationary survival of ybar2^+ on an x^2 window, slope fitted and
// bootstrapped over time batches. Window defaults to
// [1.5, 2.5] sqrt(sup variance). Throws "insufficient-exceedances".
TailCampaign limit_tail_campaign(const SystemParams& sp, double dt, double horizon,
                                 std::size_t n_reps, std::uint64_t seed, double x_lo = -1.0,
                                 double x_hi = -1.0, int n_threads = 0);

}  // namespace mh2n
