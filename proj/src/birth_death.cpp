#include "mh2n/birth_death.hpp"

#include <cmath>
#include <stdexcept>

namespace mh2n {

BirthDeathOracle::BirthDeathOracle(long n, double lambda, double mu, double theta, double tail_eps)
    : n_(n) {
  if (n < 1 || !(lambda > 0.0) || !(mu > 0.0) || !(theta > 0.0))
    throw std::invalid_argument("BirthDeathOracle: bad parameters");
  // Unnormalized pi_k = prod lambda / d_j, accumulated in log space.
  std::vector<double> logw{0.0};
  double logmax = 0.0;
  for (long k = 1;; ++k) {
    const double death = mu * static_cast<double>(std::min(k, n)) +
                         theta * static_cast<double>(std::max<long>(k - n, 0));
    logw.push_back(logw.back() + std::log(lambda / death));
    logmax = std::max(logmax, logw.back());
    // Stop once beyond the servers and the current term is negligible.
    if (k > n && logw.back() < logmax + std::log(tail_eps) - 10.0) break;
    if (k > 100000000) throw std::runtime_error("BirthDeathOracle: truncation runaway");
  }
  pi_.resize(logw.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    pi_[k] = std::exp(logw[k] - logmax);
    z += pi_[k];
  }
  for (double& x : pi_) x /= z;
}

double BirthDeathOracle::pmf(long k) const {
  if (k < 0 || k >= static_cast<long>(pi_.size())) return 0.0;
  return pi_[static_cast<std::size_t>(k)];
}

double BirthDeathOracle::queue_survival(long w) const {
  double s = 0.0;
  for (std::size_t k = static_cast<std::size_t>(n_ + w + 1); k < pi_.size(); ++k) s += pi_[k];
  return s;
}

double BirthDeathOracle::scaled_queue_survival(double x) const {
  // P(W > x sqrt(n)) = P(W > floor(x sqrt(n))) for integer W and real x >= 0.
  const double w_real = x * std::sqrt(static_cast<double>(n_));
  const long w = static_cast<long>(std::floor(w_real));
  return queue_survival(w);
}

}  // namespace mh2n
