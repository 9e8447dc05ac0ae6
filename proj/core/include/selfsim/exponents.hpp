#pragma once

// Exponent range checks and the closed-form constants of the self-similar
// extinction problem  u_t - div(|Du|^{p-2} Du) + |Du|^q = 0,
//   2N/(N+1) < p < 2,   p - 1 < q < p/2.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfsim {

using Vec3 = std::array<double, 3>;

struct ExponentParams {
  int N = 1;
  double p = 1.2;
  double q = 0.5;
};

/// Outcome of validate_range. `violations` names each failed inequality, e.g.
/// "p < 2 fails". Parameters within 1e-6 of either q-endpoint are accepted
/// with a warning because the constants blow up there.
struct RangeReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
  bool near_boundary() const { return !warnings.empty(); }
};

RangeReport validate_range(int N, double p, double q);

class RangeError : public std::invalid_argument {
 public:
  explicit RangeError(RangeReport report);
  const RangeReport& report() const { return report_; }

 private:
  RangeReport report_;
};

struct DerivedConstants {
  ExponentParams params;
  double alpha = 0.0;  // time exponent (p-q)/(p-2q)
  double beta = 0.0;   // space exponent (q-p+1)/(p-2q)
  double mu = 0.0;     // fast-decay power alpha/beta
  double Kstar = 0.0;  // fast-decay coefficient
  double theta = 0.0;  // second-order tail exponent
  double gamma = 0.0;  // -1/beta
  double Zstar = 0.0;  // Z-coordinate of the critical point P0
  double nu = 0.0;     // (q-p+1)/(p-1)
  double zeta = 0.0;   // N(p-1) + q Zstar
  bool near_boundary = false;
};

/// Throws RangeError when the triple is outside the admissible range.
DerivedConstants derive_constants(const ExponentParams& params);

/// Root of P(l) = (N-1) l^2 - 3(p-1) l + (2-p)(p-1) in (0, (2-p)/2) and the
/// exponent q* = l* + p - 1 at which the two stable eigenvalues coincide.
struct Crossover {
  double lambdastar = 0.0;
  double qstar = 0.0;
};

Crossover eigenvalue_crossover(int N, double p);
double crossover_polynomial(int N, double p, double lambda);

struct Spectrum {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  Vec3 V1{};
  Vec3 V2{};
  Vec3 V3{};
  double LambdaMax = 0.0;
  double qstar = 0.0;
  double lambdastar = 0.0;
};

Spectrum spectral_data(const DerivedConstants& consts);

}  // namespace selfsim
