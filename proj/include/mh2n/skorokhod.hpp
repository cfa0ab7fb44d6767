#pragma once

#include <string>
#include <vector>

#include "mh2n/ctmc.hpp"
#include "mh2n/path.hpp"

namespace mh2n {

// Reflected path produced by the drift Skorokhod solver. Between breakpoints
// the path follows phi(t) = e^{-theta dt} phi_k + (c_k/theta)(1 - e^{-theta dt})
// where c_k is the input slope; pieces stuck at zero are stored explicitly.
class ReflectedPath {
 public:
  struct Piece {
    double t = 0.0;      // piece start
    double phi = 0.0;    // value at the start (after any jump)
    double slope = 0.0;  // input slope c over the piece
    bool stuck = false;  // phi identically zero over the piece
  };

  ReflectedPath(std::vector<Piece> pieces, double theta, double horizon);

  double value(double t) const;
  double integral(double t) const;  // closed-form integral of phi over [0,t]
  double horizon() const { return horizon_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  // Sampled piecewise-linear snapshot (for CSV export).
  PathPL sample(const std::vector<double>& times) const;

 private:
  std::size_t piece_index(double t) const;

  std::vector<Piece> pieces_;
  std::vector<double> prefix_integral_;
  double theta_ = 1.0;
  double horizon_ = 0.0;
};

struct SkorSolution {
  ReflectedPath phi;
  PathPL psi;
  double theta = 1.0;

  // max over breakpoints of |phi(t) - (X(t) - theta int_0^t phi + psi(t))|.
  double identity_residual(const PathPL& x) const;
  // Lebesgue-Stieltjes integral of I(phi > tol) d psi.
  double complementarity_residual(double tol = 1e-9) const;
};

// Event-exact solver for the generalized drift Skorokhod problem
//   phi(t) = X(t) - theta int_0^t phi(s) ds + psi(t),
//   phi >= 0, psi nondecreasing with psi(0) = 0, psi flat wherever phi > 0.
// Zero hitting times inside a segment are found by safeguarded bisection with
// a Newton polish on the monotone per-segment map. Throws "nonzero-origin"
// if X(0) != 0 and "nonpositive-theta" if theta <= 0.
SkorSolution solve_phi_psi(const PathPL& x, double theta);

// zeta(X, s, t): unique solution of
//   zeta(t) = X(s+t) - X(s) - theta int_0^t zeta(y) dy,
// evaluated in closed form per linear segment and jump of X.
// Throws "s-out-of-range" when s is outside [0, horizon].
double zeta(const PathPL& x, double s, double t, double theta);

// Supremum representation: Phi(X, t) = sup_{0 <= s <= t} zeta(X, s, t-s).
// The supremum over each inter-breakpoint interval is attained at an endpoint
// or a pre-jump left limit, so those are the candidate evaluation points.
double reed_sup(const PathPL& x, double theta, double t);

// sup_t |Phi(X1,t) - Phi(X2,t)| / sup_t |X1 - X2| over [0, min horizon].
// Throws "identical-paths" when the denominator vanishes.
double lipschitz_ratio(const PathPL& x1, const PathPL& x2, double theta);

// Diffusion-scaled net-input path of a counter-chain log: a jump of
// +-n^{-1/2} at each arrival / renewal / abandonment event and slope
// n^{-1/2} theta W(t) between events.
PathPL build_skor_path(const EventLog<TrackState>& log, long n, double theta);

// Max over event times of |n^{-1/2} W(t) - Phi(SKOR, t)|.
double verify_skoro1(const EventLog<TrackState>& log, long n, double theta);

// Sup-norm over [0, horizon] of the compensated-abandonment error process
// n^{-1/2} (ABA(t) - theta int_0^t W ds).
double err_process_supnorm(const EventLog<TrackState>& log, long n, double theta);

// Random piecewise-linear-with-jumps test path with X(0) = 0.
PathPL random_fuzz_path(double horizon, RngStream& rng, int max_segments = 20);

}  // namespace mh2n
