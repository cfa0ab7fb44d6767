#include "mh2n/model.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mh2n {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void HyperExp2::validate() const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("HyperExp2: p must lie in (0,1)");
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) throw std::invalid_argument("HyperExp2: rates must be positive");
  if (!std::isfinite(mean())) throw std::invalid_argument("HyperExp2: mean not finite");
}

HyperExp2 counterexample_a() {
  const double r2 = std::sqrt(2.0);
  HyperExp2 d;
  d.mu1 = (15.0 - 2.0 * r2) / 31.0;
  d.mu2 = 2.0 * r2;
  d.p = (121.0 - 32.0 * r2) / 257.0;
  return d;
}

HyperExp2 counterexample_b() {
  const double r2 = std::sqrt(2.0);
  HyperExp2 d;
  d.mu1 = (3.0 - r2) / 7.0;
  d.mu2 = r2;
  d.p = (7.0 - 4.0 * r2) / 17.0;
  return d;
}

double mix_from_rates(double mu1, double mu2) {
  if (mu1 == mu2) throw std::invalid_argument("mix_from_rates: degenerate (mu1 == mu2)");
  const double p = mu1 * (mu2 - 1.0) / (mu2 - mu1);
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("mix_from_rates: no-unit-mean-mix for these rates");
  return p;
}

double equilibrium_mix(const HyperExp2& d, double tol) {
  d.validate();
  if (std::fabs(d.mean() - 1.0) > tol)
    throw std::invalid_argument("equilibrium_mix: not-normalized (E[S] != 1)");
  return d.p / d.mu1;
}

void SystemParams::validate(RegimeCheck check) const {
  service.validate();
  if (n < 1) throw std::invalid_argument("SystemParams: n must be positive");
  if (static_cast<double>(n) <= B * B)
    throw std::invalid_argument("SystemParams: need n > B^2 so lambda_n > 0");
  if (!(theta > 0.0)) throw std::invalid_argument("SystemParams: theta must be positive");
  if (check == RegimeCheck::kNone) return;
  if (theta > std::min(service.mu1, service.mu2)) {
    if (check == RegimeCheck::kDominanceCoupling)
      throw std::invalid_argument(
          "SystemParams: assumption-violation (theta > min(mu1,mu2) breaks the coupling)");
    throw std::invalid_argument("SystemParams: assumption-violation (theta > min(mu1,mu2))");
  }
}

std::string ExponentReport::to_json() const {
  std::ostringstream os;
  os << "{\"true_exponent\": " << fmt(true_exponent)
     << ", \"dai_he_exponent\": " << fmt(dai_he_exponent)
     << ", \"sup_variance\": " << fmt(sup_variance) << ", \"gap\": " << fmt(gap) << "}";
  return os.str();
}

std::string ExponentReport::csv_header() const {
  return "true_exponent,dai_he_exponent,sup_variance,gap";
}

std::string ExponentReport::csv_row() const {
  return fmt(true_exponent) + "," + fmt(dai_he_exponent) + "," + fmt(sup_variance) + "," + fmt(gap);
}

ExponentReport exponents(double theta, double mu1, double mu2) {
  if (!(theta > 0.0)) throw std::invalid_argument("exponents: theta must be positive");
  if (theta > std::min(mu1, mu2))
    throw std::invalid_argument("exponents: assumption-violation (theta > min(mu1,mu2))");

  // Mixing probability implied by unit mean. mu1 == mu2 collapses to the
  // exponential case, which has unit mean only at rate 1.
  double p;
  if (mu1 == mu2) {
    if (std::fabs(mu1 - 1.0) > 1e-12)
      throw std::invalid_argument("exponents: no-unit-mean-mix (mu1 == mu2 != 1)");
    p = 0.5;
  } else {
    p = mix_from_rates(mu1, mu2);
  }

  const double m = mu1 * mu2;
  ExponentReport r;
  // Grouped so that the (theta + m)/(theta + mu1 + mu2 - 1) factor cancels
  // exactly when mu1 = mu2 = 1, giving -theta/2 with no rounding.
  const double denom = theta + (mu1 + mu2 - 1.0);
  r.true_exponent = -0.5 * theta * ((theta + m) / denom);
  r.dai_he_exponent = -0.5 * theta * (m / (mu1 + mu2 - 1.0));
  r.sup_variance = (denom / (theta + m)) / theta;
  r.gap = r.true_exponent - r.dai_he_exponent;

  // Cross-check the simplified variance against the raw covariance limit.
  const double raw =
      p * (1.0 - p) * (mu1 - mu2) * (mu1 - mu2) / (theta * m * (m + theta)) + 1.0 / theta;
  if (std::fabs(raw - r.sup_variance) > 1e-12 * std::max(1.0, std::fabs(raw)))
    throw std::runtime_error("exponents: variance cross-check failed");
  return r;
}

ExponentReport exponents(const SystemParams& params) {
  if (!params.unit_mean())
    throw std::invalid_argument("exponents: not-normalized (E[S] != 1)");
  return exponents(params.theta, params.service.mu1, params.service.mu2);
}

ExponentAsymptotics exponent_asymptotics(double mu1, double mu2) {
  ExponentAsymptotics a;
  a.theta_slope = -mu1 * mu2 / (2.0 * (mu1 + mu2 - 1.0));
  a.mu1 = mu1;
  return a;
}

std::string to_config(const SystemParams& params) {
  std::ostringstream os;
  os << "n = " << params.n << "\n"
     << "B = " << fmt(params.B) << "\n"
     << "p = " << fmt(params.service.p) << "\n"
     << "mu1 = " << fmt(params.service.mu1) << "\n"
     << "mu2 = " << fmt(params.service.mu2) << "\n"
     << "theta = " << fmt(params.theta) << "\n";
  return os.str();
}

SystemParams params_from_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty() && key.front() == '[') continue;
    kv[key] = val;
  }
  SystemParams p;
  try {
    p.n = std::stol(kv.at("n"));
    p.B = std::stod(kv.at("B"));
    p.service.p = std::stod(kv.at("p"));
    p.service.mu1 = std::stod(kv.at("mu1"));
    p.service.mu2 = std::stod(kv.at("mu2"));
    p.theta = std::stod(kv.at("theta"));
  } catch (const std::exception&) {
    throw std::invalid_argument("params_from_config: missing or malformed key");
  }
  return p;
}

}  // namespace mh2n
