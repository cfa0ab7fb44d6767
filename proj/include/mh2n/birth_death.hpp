#pragma once

#include <vector>

#include "mh2n/model.hpp"

namespace mh2n {

// Stationary distribution of the M/M/n+M total-jobs-in-system birth-death
// chain: birth rate lambda, death rate mu min(k,n) + theta (k-n)^+. Solved by
// truncated balance equations; the truncation grows until the tail mass is
// below tail_eps.
class BirthDeathOracle {
 public:
  BirthDeathOracle(long n, double lambda, double mu, double theta, double tail_eps = 1e-16);

  // P(total in system == k).
  double pmf(long k) const;
  // P(W > w) for the queue length W = (K - n)^+, w integer-valued threshold.
  double queue_survival(long w) const;
  // P(n^{-1/2} W > x).
  double scaled_queue_survival(double x) const;

  long truncation() const { return static_cast<long>(pi_.size()) - 1; }

 private:
  long n_;
  std::vector<double> pi_;
};

}  // namespace mh2n
