#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "common/errors.hpp"

namespace ctae {

// All randomness flows through this wrapper so that streams are reproducible
// across platforms and serializable into checkpoints. Distributions are
// implemented explicitly (std::normal_distribution et al. keep hidden state
// and are not guaranteed identical across standard libraries).
class Rng {
 public:
  Rng() : eng_(0) {}
  explicit Rng(uint64_t seed) : eng_(seed) {}

  void seed(uint64_t s) { eng_.seed(s); }

  uint64_t raw() { return eng_(); }

  // uniform in [0, 1), 53-bit resolution
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  // Box-Muller without the cached second value: one draw consumes exactly two
  // engine outputs, so the stream position is a pure function of call count.
  double normal() {
    const double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // unbiased integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) fail(ErrorKind::internal, "uniform_int(0)");
    const uint64_t threshold = (-n) % n;  // 2^64 mod n
    for (;;) {
      const uint64_t x = eng_();
      if (x >= threshold) return x % n;
    }
  }

  // Knuth's product-of-uniforms method; exact for the modest rates used here.
  int64_t poisson(double lambda) {
    if (lambda < 0) fail(ErrorKind::numeric, "poisson rate must be >= 0");
    if (lambda == 0) return 0;
    const double limit = std::exp(-lambda);
    int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= unit();
    } while (p > limit);
    return k - 1;
  }

  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(uniform_int(static_cast<uint64_t>(i + 1)));
      std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
  }

  // mt19937_64 state as whitespace-separated decimal tokens
  std::string save_state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) fail(ErrorKind::io, "malformed rng state");
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ctae
