#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "stylemix/tensor.hpp"

namespace stylemix {

// Seeded random source. Every stochastic operation takes one of these
// explicitly, so independent streams can be split off for reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : eng_(seed) {}

  double uniform() { return unif_(eng_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(eng_); }
  double normal() { return norm_(eng_); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }

  // Beta(b, b) draw via two Gamma(b, 1) variates.
  double beta_symmetric(double b) {
    if (b <= 0.0) throw std::invalid_argument("beta_symmetric: shape must be positive");
    std::gamma_distribution<double> g(b, 1.0);
    double x = g(eng_);
    double y = g(eng_);
    return x / (x + y);
  }

  void fill_normal(Tensor& t, float stddev = 1.0f) {
    for (int64_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<float>(norm_(eng_)) * stddev;
  }

  // Fisher-Yates shuffle of index vector [0, n).
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[uniform_int(0, i)]);
    return p;
  }

  Rng split() { return Rng(eng_()); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace stylemix
