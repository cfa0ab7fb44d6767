#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mh2n {

// SplitMix64 step: advances x and returns a mixed output word.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seedable random stream for one replication.
//
// Splitting rule: stream k of master seed s is seeded from the SplitMix64
// outputs of s and of s XOR mix(k), so (s, k) -> stream is a pure function
// and replications can run concurrently with no shared state.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t x = master_seed;
    const std::uint64_t a = splitmix64(x);
    x ^= 0xd1b54a32d192ed03ull * (stream_index + 1);
    const std::uint64_t b = splitmix64(x);
    const std::uint64_t c = splitmix64(x);
    std::seed_seq seq{static_cast<std::uint32_t>(a),  static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b),  static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c),  static_cast<std::uint32_t>(c >> 32)};
    gen_.seed(seq);
  }

  explicit RngStream(std::uint64_t seed) : RngStream(seed, 0) {}

  // Uniform on the open interval (0,1); never returns 0 or 1, safe for logs.
  double uniform() {
    const std::uint64_t bits = gen_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double expo(double rate) { return -std::log(uniform()) / rate; }

  // Standard normal via Box-Muller, caching the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mh2n
