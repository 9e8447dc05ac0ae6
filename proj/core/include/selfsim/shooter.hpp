#pragma once

// Shooting for the radial profile problem
//   f' = -|F|^{(2-p)/(p-1)} F,
//   F' + (N-1)/r F = alpha f + beta r f' - |F|^{q/(p-1)},   f(0) = a, F(0) = 0,
// with F = -|f'|^{p-2} f'. Shooting parameters split into
//   A: w = r^mu f turns back (or f reaches zero),
//   C: w exceeds K*,
// and the fast-decay profiles sit on the common boundary.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selfsim/exponents.hpp"

namespace selfsim {

struct ProfileState {
  double r = 0.0;
  double f = 0.0;
  double F = 0.0;
  double fprime = 0.0;
};

enum class EventKind { kWPrimeVanishes, kWExceedsKstar, kFHitsZero, kRmaxReached };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct ProfileEvent {
  EventKind kind = EventKind::kRmaxReached;
  double r = 0.0;
  int direction = 0;  // sign of the crossing: +1 upward, -1 downward
};

enum class IntegrationStatus { kOk, kStepUnderflow, kOverflow };

std::string_view to_string(IntegrationStatus status);

struct ProfileTrajectory {
  double a = 0.0;
  std::vector<ProfileState> samples;
  std::vector<ProfileEvent> events;
  std::vector<double> energy;
  IntegrationStatus status = IntegrationStatus::kOk;
  std::string detail;

  const ProfileEvent* first_decisive_event() const;
};

/// Energy ((p-1)/p)|f'|^p + (alpha/2) f^2.
double profile_energy(const DerivedConstants& c, double f, double fprime);

/// Slope recovered from the momentum: f' = -|F|^{(2-p)/(p-1)} F.
double slope_from_momentum(const DerivedConstants& c, double F);

/// Right-hand side of the first-order system: returns (f', F').
std::array<double, 2> profile_rhs(const DerivedConstants& c, double r, double f, double F);

/// Tail system in eta = ln r for d = K* - w and e = mu K* + r^{mu+1} f':
/// returns (d_eta, e_eta). (0, 0) is an exact equilibrium.
std::array<double, 2> deviation_rhs(const DerivedConstants& c, double eta, double d, double e);

struct SeriesStart {
  ProfileState state;
  double f_truncation = 0.0;  // first omitted term in f, relative to a - f
  double F_truncation = 0.0;  // first omitted term in F, relative to F
};

/// Local expansion at r0 > 0:
///   f(r0) = a - ((p-1)/p) (alpha a/N)^{1/(p-1)} r0^{p/(p-1)},  F(r0) = (alpha a/N) r0.
/// Throws std::invalid_argument when a <= 0 or r0 <= 0.
SeriesStart series_start(const DerivedConstants& c, double a, double r0);

/// 1e-4 times the natural radius a^{-(2-p)/p}, shrunk until both series
/// truncation terms are below 1e-6.
double default_start_radius(const DerivedConstants& c, double a);

struct IntegrateOptions {
  double r0 = 0.0;               // 0: default_start_radius
  bool stop_at_first_event = true;
  bool record_samples = true;
  double overflow_guard = 1e12;  // |f| + |F|
};

/// Adaptive Dormand-Prince integration from the series start. Every sign
/// change of w', every crossing of w = K* and the first zero of f are located
/// on the dense output to 1e-10 r. `tol` is the relative local error per step.
ProfileTrajectory integrate_profile(const DerivedConstants& c, double a, double r_max,
                                    double tol, const IntegrateOptions& opts = {});

/// Same, starting from an arbitrary state (f, F) at radius start.r.
ProfileTrajectory integrate_profile_from(const DerivedConstants& c, double a,
                                         const ProfileState& start, double r_max, double tol,
                                         const IntegrateOptions& opts = {});

enum class ClassLabel { kA, kC, kUndetermined };

std::string_view to_string(ClassLabel label);

struct Classification {
  ClassLabel label = ClassLabel::kUndetermined;
  double witness_r = 0.0;
  std::string detail;
};

Classification classify_trajectory(const DerivedConstants& c, const ProfileTrajectory& traj);

Classification classify(const DerivedConstants& c, double a, double r_max, double tol);

struct Bracket {
  double lo = 0.0;  // classified C
  double hi = 0.0;  // classified A
  double tol = 0.0;
};

struct BracketOptions {
  double r_max = 1e4;
  double ode_tol = 1e-12;
  int max_decade = 12;
};

class ShootingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scans a = 10^{-2}, 10^{-3}, ... for a C value and a = 10^2, 10^3, ... for
/// an A value. Throws ShootingError once |k| exceeds max_decade.
Bracket find_bracket(const DerivedConstants& c, const BracketOptions& opts = {});

struct ProfileOptions {
  double ode_tol = 1e-12;
  double classify_r_cap = 1e7;  // undecided beyond this radius: heuristic side
  /// Re-bracketing threshold: splice when |w_hi - w_lo| <= this * (K* - w).
  double splice_ratio = 1e-6;
  /// Re-bracketing stops once the two ends differ by this multiple of ode_tol.
  double rebracket_floor_factor = 1e3;
  int max_restarts = 200;
};

struct ProfileSolution {
  double a_star = 0.0;
  Bracket final_bracket;
  ProfileTrajectory trajectory;
  std::vector<double> bracket_widths;  // after each bisection step
  int heuristic_assignments = 0;
  int restarts = 0;
  double clean_radius = 0.0;  // radius up to which the trajectory is resolved
  bool reached_r_max = false;
  bool unique = true;  // false for N >= 2, where uniqueness is only conjectured
  std::string detail;
};

/// Bisection on the classification until hi - lo <= a_tol * lo, followed by
/// a tail continuation that repeatedly re-brackets the state (f, F) at an
/// intermediate radius, so the returned trajectory stays on the fast-decay
/// branch out to r_max despite the unstable direction.
ProfileSolution find_profile(const DerivedConstants& c, const Bracket& bracket, double a_tol,
                             double r_max, const ProfileOptions& opts = {});

}  // namespace selfsim
