#pragma once

#include <cmath>
#include <iosfwd>
#include <string>

namespace mh2n {

// Two-branch hyper-exponential service distribution: Expo(mu1) w.p. p,
// Expo(mu2) w.p. 1-p.
struct HyperExp2 {
  double p = 0.5;
  double mu1 = 1.0;
  double mu2 = 1.0;

  bool degenerate_exponential() const { return mu1 == mu2; }
  double mean() const { return p / mu1 + (1.0 - p) / mu2; }
  double second_moment() const {
    return 2.0 * p / (mu1 * mu1) + 2.0 * (1.0 - p) / (mu2 * mu2);
  }
  // Product form p*mu2 + (1-p)*mu1; equals mu1*mu2 exactly when mean()==1.
  double rate_product() const { return mu1 * mu2; }

  void validate() const;  // throws on p outside (0,1) or nonpositive rates
};

// The appendix's moment-matched pair: both have mean 1 and second moment 4
// yet different tail exponents at theta = 1/5.
HyperExp2 counterexample_a();
HyperExp2 counterexample_b();

// Unit-mean mixing probability p = mu1 (mu2 - 1) / (mu2 - mu1).
// Throws "degenerate" when mu1 == mu2 and "no-unit-mean-mix" when the result
// falls outside (0,1).
double mix_from_rates(double mu1, double mu2);

// Equilibrium (stationary-excess) mixing probability p_hat = p / mu1.
// Requires unit mean; throws "not-normalized" otherwise.
double equilibrium_mix(const HyperExp2& d, double tol = 1e-9);

enum class RegimeCheck {
  kNone,              // no Assumption-1 requirement
  kFormulas,          // theta <= min(mu1,mu2); equality tolerated
  kDominanceCoupling  // theta <= min(mu1,mu2) required for rate splitting
};

struct SystemParams {
  long n = 1;
  double B = 0.0;
  HyperExp2 service;
  double theta = 1.0;

  double lambda() const { return static_cast<double>(n) + B * std::sqrt(static_cast<double>(n)); }

  bool unit_mean(double tol = 1e-12) const { return std::fabs(service.mean() - 1.0) <= tol; }
  // Assumption-1 flags.
  bool hazard_ordering_strict() const { return theta < std::min(service.mu1, service.mu2); }
  bool hazard_ordering_weak() const { return theta <= std::min(service.mu1, service.mu2); }

  // Throws on structural violations (n <= B^2, invalid service, theta <= 0);
  // in dominance-coupling mode also on theta > min(mu1, mu2).
  void validate(RegimeCheck check = RegimeCheck::kFormulas) const;
};

struct ExponentReport {
  double true_exponent = 0.0;
  double dai_he_exponent = 0.0;
  double sup_variance = 0.0;
  double gap = 0.0;  // true - conjectured; negative when mu1 != mu2

  std::string to_json() const;
  std::string csv_header() const;
  std::string csv_row() const;
};

// Large-deviations exponents for the unit-mean hyper-exponential queue:
//   true:       -theta (theta + mu1 mu2) / (2 (theta + mu1 + mu2 - 1))
//   conjecture: -mu1 mu2 theta / (2 (mu1 + mu2 - 1))
//   sup var:    (theta + mu1 + mu2 - 1) / (theta (theta + mu1 mu2))
// The mixing probability is implied by unit mean. Throws
// "assumption-violation" if theta > min(mu1,mu2), "no-unit-mean-mix" if no
// valid p exists.
ExponentReport exponents(double theta, double mu1, double mu2);
ExponentReport exponents(const SystemParams& params);

struct ExponentAsymptotics {
  double theta_slope = 0.0;  // d true_exponent / d theta at theta = 0
  double mu1 = 0.0;
  // Limit of the exponent as mu2 -> infinity with the mean held at 1.
  double mu2_infinity_limit(double theta) const { return -0.5 * theta * mu1; }
};

ExponentAsymptotics exponent_asymptotics(double mu1, double mu2);

// Flat key-value serialization (keys: n, B, p, mu1, mu2, theta).
std::string to_config(const SystemParams& params);
SystemParams params_from_config(const std::string& text);

}  // namespace mh2n
