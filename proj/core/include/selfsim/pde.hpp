#pragma once

// Radial finite-volume solver, linearly implicit or explicit in time, for
//   u_t = r^{1-N} (r^{N-1} |u_r|^{p-2} u_r)_r - |u_r|^q
// started from the self-similar solution u = (T-t)^alpha f(r (T-t)^beta).

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfsim/exponents.hpp"
#include "selfsim/shooter.hpp"
#include "selfsim/tail.hpp"

namespace selfsim {

struct RadialGrid {
  double L = 0.0;
  int M = 0;
  double dx = 0.0;
  int N = 1;

  static RadialGrid make(double L, int M, int N);
  double node(int i) const { return i * dx; }
};

/// Profile f on [0, inf): series near 0, monotone cubic Hermite on the
/// samples (slopes from f', Fritsch-Carlson limited) and the fitted tail
/// K* r^{-mu} (1 - (A/K*) r^{-theta}) beyond the last sample.
class ProfileInterpolant {
 public:
  ProfileInterpolant(const ProfileTrajectory& traj, const DerivedConstants& c, double A,
                     double theta);
  double operator()(double r) const;
  double r_first() const { return r_.front(); }
  double r_last() const { return r_.back(); }
  double center() const { return a_; }

 private:
  std::vector<double> r_, f_, m_;
  double a_ = 0.0;
  double series_k_ = 0.0;
  double series_pow_ = 0.0;
  double K_ = 0.0;
  double mu_ = 0.0;
  double A_ = 0.0;
  double theta_ = 0.0;
};

struct SelfSimilarField {
  double T = 1.0;
  double t = 0.0;
  std::vector<double> u;
  std::shared_ptr<const ProfileInterpolant> profile;  // null: boundary value held fixed
  double alpha = 0.0;
  double beta = 0.0;
  long clipped = 0;
  double outflow = 0.0;  // cumulative mass carried out through r = L

  /// (T-t)^alpha f(r (T-t)^beta); requires `profile`.
  double exact(double r, double time) const;
};

class PdeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws PdeError when the profile fails certification or when
/// u(0, L) > 1e-3 u(0, 0).
SelfSimilarField build_initial(const ProfileTrajectory& traj, const DerivedConstants& c, double T,
                               const RadialGrid& grid);

/// Smallest L, rounded up to a multiple of 5, such that the radial L1 mass of
/// the self-similar solution beyond L at time t_end is at most `fraction` of the total.
double suggest_domain_radius(const ProfileTrajectory& traj, const DerivedConstants& c, double T,
                             double t_end, double fraction = 0.01);

enum class PdeScheme {
  kExplicit,           // forward Euler, regularised mobility, CFL-limited
  kLinearlyImplicit,   // mobility and absorption coefficient frozen per step
};

struct PdeOptions {
  PdeScheme scheme = PdeScheme::kLinearlyImplicit;
  /// Explicit: eps in (s^2 + eps^2)^{(p-2)/2}, 0 selects dx.
  /// Linearly implicit: gradient floor relative to max|u_r|, 0 selects 1e-12.
  double eps_reg = 0.0;
  double cfl = 0.9;       // explicit only
  double dt_rel = 2e-4;   // linearly implicit: dt = dt_rel (T - t)
  bool absorption = true;
};

/// Explicit scheme: largest dt keeping the update monotone, times opts.cfl:
///   dt <= cfl / max_i [ (w_{i-1/2} + w_{i+1/2}) / (V_i dx) eps^{p-2} + Lip(H_eps) / dx ].
double stable_dt(const RadialGrid& grid, const ExponentParams& params, const PdeOptions& opts);

/// One step of size dt; zero flux at r = 0, exact value at r = L.
/// Explicit: face fluxes Phi(s) = (s^2 + eps^2)^{(p-2)/2} s and the Godunov
/// Hamiltonian of H(s) = (s^2 + eps^2)^{q/2} - eps^q; throws PdeError when dt
/// breaks monotonicity.
/// Linearly implicit: fluxes |s_n|^{p-2} s_{n+1} and absorption |s_n|^{q-1} |s_{n+1}|
/// on the Godunov upwind side, one tridiagonal M-matrix solve per step.
/// Values below -1e-10 max|u| are clipped and counted.
void step(SelfSimilarField& field, const RadialGrid& grid, const ExponentParams& params,
          const PdeOptions& opts, double dt);

/// |S^{N-1}| sum_i u_i V_i with V_i the radially weighted node volumes.
double mass(const std::vector<double>& u, const RadialGrid& grid);
double sup_norm(const std::vector<double>& u);

struct ExtinctionMetrics {
  double alpha_est = 0.0;
  double l1_exponent_est = 0.0;
  double selfsim_error = 0.0;
  double L = 0.0;
  int M = 0;
  double eps_reg = 0.0;
  double t_end = 0.0;
  long steps = 0;
  long clipped = 0;
  bool stable = true;
  std::string detail;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> u;
};

struct PdeRun {
  ExtinctionMetrics metrics;
  std::vector<Snapshot> snapshots;
};

/// Checkpoints default to t_end k / 10, k = 0..10. Throws PdeError for
/// t_end >= T.
PdeRun run_and_measure(const SelfSimilarField& field0, const RadialGrid& grid,
                       const DerivedConstants& c, double t_end,
                       std::vector<double> checkpoints = {}, const PdeOptions& opts = {});

}  // namespace selfsim
