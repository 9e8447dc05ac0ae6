#pragma once

// Fast-decay tail: w = r^mu f, the w-equation, membership checks for the
// boundary set and the fit w ~ K - A r^{-theta}.

#include <stdexcept>
#include <string>
#include <vector>

#include "selfsim/exponents.hpp"
#include "selfsim/shooter.hpp"

namespace selfsim {

struct WState {
  double r = 0.0;
  double w = 0.0;
  double Wtail = 0.0;       // r w' - mu w = r^{mu+1} f'
  double wprime = 0.0;      // from r w' = mu w + Wtail
  double wsecond = 0.0;     // from the profile equation, no differencing
  double gamma_term = 0.0;  // beta r^{gamma+1} w'
};

WState w_state(const DerivedConstants& c, const ProfileState& s);

/// Pointwise transform of every sample with r > 0.
std::vector<WState> w_transform(const ProfileTrajectory& traj, const DerivedConstants& c);

/// Residual of
///   (p-1) r^2 w'' + (N-1-2mu(p-1)) r w' + mu[(p-1)(mu+1)-N+1] w
///     + |W|^{2-p} [beta r^{gamma+1} w' - |W|^q],
/// each sample divided by its largest term; returns the rms.
/// Throws std::invalid_argument with fewer than 5 states.
double w_residual(const std::vector<WState>& states, const DerivedConstants& c);

struct CertifyTolerances {
  double K_rel = 0.01;      // |w(r_max) - K*| <= K_rel K*
  double slope_rel = 0.05;  // |r w'(r_max)| <= slope_rel mu K*
  double deriv_rel = 0.05;  // |r^{mu+1} f'(r_max) + mu K*| <= deriv_rel mu K*
};

struct CertifyCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct Certification {
  std::vector<CertifyCheck> checks;
  double r_end = 0.0;
  bool passed() const;
};

/// Five checks: 0 < w <= K*, w' > 0, and the three limits at the last sample.
/// w touching K* to rounding passes the first check and is noted as weak.
Certification certify_B(const ProfileTrajectory& traj, const DerivedConstants& c,
                        const CertifyTolerances& tol = {});

struct TailWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// [r_max / 10, r_max].
TailWindow default_window(double r_max);

struct Stage2Fit {
  bool converged = false;
  double K_est = 0.0;
  double A_est = 0.0;
  double theta_est = 0.0;
  double residual_rms = 0.0;
};

struct TailFit {
  double K_est = 0.0;
  double A_est = 0.0;
  double theta_est = 0.0;
  TailWindow window;
  double residual_rms = 0.0;
  std::size_t samples = 0;
  Stage2Fit stage2;
};

class TailFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stage 1 regresses ln(K* - w) on ln r with K* pinned. Stage 2 releases K and
/// minimises over theta with (K, A) solved linearly for each trial theta.
/// Throws TailFitError for fewer than 10 samples in the window or K* - w <= 0.
TailFit fit_tail(const std::vector<WState>& states, const DerivedConstants& c,
                 const TailWindow& window, bool refine = true);

}  // namespace selfsim
