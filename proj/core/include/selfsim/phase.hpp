#pragma once

// Autonomous phase system in eta = ln r for
//   X = r f (-f')^{1-p},  Y = r^2 (-f')^{2-p},  Z = r (-f')^{q-p+1},
// whose critical point P0 = (0, 0, Z*) attracts the fast-decay profiles:
//   X' = N X - Y - alpha X^2 + beta X Y + X Z
//   Y' = (2 - k(N-1)) Y + k (alpha X - beta Y - Z) Y,       k = (2-p)/(p-1)
//   Z' = nu Z (Z* - Z) + nu (alpha X - beta Y) Z

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfsim/exponents.hpp"
#include "selfsim/shooter.hpp"

namespace selfsim {

using Mat3 = std::array<Vec3, 3>;

struct PhasePoint {
  double eta = 0.0;
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
  double Wshift = 0.0;  // Z - Z*

  Vec3 xyz() const { return {X, Y, Z}; }
};

enum class PhaseSource { kMappedFromProfile, kFreeIntegration };

struct PhasePath {
  std::vector<PhasePoint> points;
  PhaseSource source = PhaseSource::kMappedFromProfile;
  std::vector<std::string> warnings;
  bool blew_up = false;
};

PhasePoint make_phase_point(const DerivedConstants& c, double eta, const Vec3& xyz);

/// Samples with f' = 0 (or f <= 0) are skipped and noted in `warnings`.
PhasePath map_to_phase(const ProfileTrajectory& traj, const DerivedConstants& c);

Vec3 vector_field(const Vec3& xyz, const DerivedConstants& c);
Vec3 vector_field(const PhasePoint& pt, const DerivedConstants& c);

/// Derivative of the field with respect to (X, Y, Z); the same matrix serves
/// the shifted coordinates (X, Y, Z - Z*).
Mat3 jacobian(const Vec3& xyz, const DerivedConstants& c);

/// DF at P0: [[N+Z*, -1, 0], [0, lambda2, 0], [alpha nu Z*, -beta nu Z*, -nu Z*]].
Mat3 jacobian_origin(const DerivedConstants& c);

Vec3 apply(const Mat3& m, const Vec3& v);

/// Adaptive integration over [eta0, eta1]; stops early once |x| >= 1e12.
PhasePath integrate_phase(const DerivedConstants& c, const Vec3& x0, double eta0, double eta1,
                          double tol);

struct RateWindow {
  double lo = 0.0;
  double hi = 0.0;
};

struct RateFit {
  double lambda2_est = 0.0;
  double lambda3_est = 0.0;
  double Uinf_est = 0.0;
  double Vinf_est = 0.0;
  double A_from_Vinf = 0.0;
  RateWindow window_Y;
  RateWindow window_Z;
  std::size_t samples_Y = 0;
  std::size_t samples_Z = 0;
  bool lambda3_reliable = true;  // false when |lambda2 - lambda3| < 0.1
  std::vector<std::string> warnings;
};

class PhaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Last decade in r: [eta_end - ln 10, eta_end].
RateWindow default_rate_window(const PhasePath& path);

/// Log-linear regressions of Y and |Z - Z*| against eta on the window.
/// Throws PhaseError when the path ends farther than 0.05 Z* from P0, or when
/// fewer than 5 points remain above the 1e-13 floor of |Z - Z*|.
RateFit extract_rates(const PhasePath& path, const DerivedConstants& c, const RateWindow& window);

/// rms over the points within `radius` of P0 of |dx/deta - F(x)| / |x - P0|,
/// with dx/deta from a five-point Lagrange stencil in eta.
double dynamics_residual(const PhasePath& path, const DerivedConstants& c, double radius);

}  // namespace selfsim
