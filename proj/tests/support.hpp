#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "selfsim/exponents.hpp"
#include "selfsim/shooter.hpp"

namespace selfsim::testing {

inline double rel_err(double got, double want) {
  const double s = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / s;
}

// Valid (N, p, q) drawn uniformly, kept `margin` (relative to the interval
// length) away from every endpoint.
class ParamGen {
 public:
  explicit ParamGen(std::uint64_t seed, int n_max = 5, double margin = 0.02)
      : rng_(seed), n_max_(n_max), margin_(margin) {}

  ExponentParams operator()() {
    ExponentParams P;
    P.N = std::uniform_int_distribution<int>(1, n_max_)(rng_);
    P.p = inside(2.0 * P.N / (P.N + 1.0), 2.0);
    P.q = inside(P.p - 1.0, P.p / 2.0);
    return P;
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  double inside(double lo, double hi) {
    const double m = margin_ * (hi - lo);
    return uniform(lo + m, hi - m);
  }

  std::mt19937_64 rng_;
  int n_max_;
  double margin_;
};

// The a*-profile for the reference triple, computed once per process.
struct Reference {
  DerivedConstants c;
  ProfileSolution sol;
};

inline const Reference& reference_n1() {
  static const Reference ref = [] {
    Reference r;
    r.c = derive_constants({1, 1.2, 0.5});
    r.sol = find_profile(r.c, find_bracket(r.c), 1e-10, 1e5);
    return r;
  }();
  return ref;
}

inline const Reference& reference_n2() {
  static const Reference ref = [] {
    Reference r;
    r.c = derive_constants({2, 1.5, 0.6});
    r.sol = find_profile(r.c, find_bracket(r.c), 1e-10, 1e7);
    return r;
  }();
  return ref;
}

}  // namespace selfsim::testing
