#pragma once

// Embedded Dormand-Prince 5(4) stepper with Shampine's continuous extension.
// Shared by the profile shooter (integrating in r) and the phase-space
// integrator (integrating in eta = ln r, in extended precision).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace selfsim::ode {

template <std::size_t Dim, class Real = double>
using State = std::array<Real, Dim>;

struct StepperOptions {
  double rtol = 1e-10;
  double atol = 1e-300;
  double initial_step = 0.0;  // 0 selects 1e-3 * |t0| (or 1e-6)
  double min_step_rel = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  double safety = 0.9;
  double max_growth = 5.0;
  double min_shrink = 0.2;
};

enum class StepStatus { kAccepted, kStepUnderflow, kNonFinite };

/// Quartic interpolant over one accepted step.
template <std::size_t Dim, class Real = double>
struct DenseStep {
  Real t0 = 0.0;
  Real h = 0.0;
  std::array<State<Dim, Real>, 5> coef{};

  State<Dim, Real> operator()(Real t) const {
    const Real s = (t - t0) / h;
    const Real s1 = 1.0 - s;
    State<Dim, Real> y{};
    for (std::size_t i = 0; i < Dim; ++i) {
      y[i] = coef[0][i] +
             s * (coef[1][i] + s1 * (coef[2][i] + s * (coef[3][i] + s1 * coef[4][i])));
    }
    return y;
  }
};

template <std::size_t Dim, class Rhs, class Real = double>
class DormandPrince45 {
 public:
  using StateT = State<Dim, Real>;

  DormandPrince45(Rhs rhs, Real t0, const StateT& y0, StepperOptions opts)
      : rhs_(std::move(rhs)), opts_(opts), t_(t0), y_(y0) {
    k1_ = rhs_(t_, y_);
    h_ = opts_.initial_step > 0.0 ? Real(opts_.initial_step)
                                  : (t0 != 0 ? Real(1e-3) * std::abs(t0) : Real(1e-6));
    h_ = std::min(h_, Real(opts_.max_step));
  }

  Real t() const { return t_; }
  const StateT& y() const { return y_; }
  const StateT& dydt() const { return k1_; }
  Real next_step() const { return h_; }
  const DenseStep<Dim, Real>& last_step() const { return dense_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t rejected() const { return rejected_; }

  /// Takes one accepted step without passing `t_limit` (t_limit > t()).
  StepStatus step(Real t_limit) {
    for (;;) {
      Real h = std::min(h_, Real(opts_.max_step));
      bool clipped = false;
      if (t_ + h >= t_limit) {
        h = t_limit - t_;
        clipped = true;
      }
      if (h <= opts_.min_step_rel * std::max(std::abs(t_), Real(1))) {
        return StepStatus::kStepUnderflow;
      }
      StateT y_new;
      StateT k7;
      const Real err = attempt(h, y_new, k7);
      if (!std::isfinite(err)) {
        h_ = h * opts_.min_shrink;
        ++rejected_;
        if (h_ <= opts_.min_step_rel * std::max(std::abs(t_), Real(1))) {
          return StepStatus::kNonFinite;
        }
        continue;
      }
      if (err <= 1.0) {
        build_dense(h, y_new, k7);
        t_ = clipped ? t_limit : t_ + h;
        y_ = y_new;
        k1_ = k7;
        ++accepted_;
        Real fac = err > 0 ? Real(opts_.safety) * std::pow(err, Real(-0.2)) : Real(opts_.max_growth);
        fac = std::clamp(fac, Real(1), Real(opts_.max_growth));
        // A clipped step says nothing about the admissible size.
        h_ = clipped ? std::max(h_, h * fac) : h * fac;
        return StepStatus::kAccepted;
      }
      ++rejected_;
      Real fac = Real(opts_.safety) * std::pow(err, Real(-0.2));
      h_ = h * std::clamp(fac, Real(opts_.min_shrink), Real(1));
    }
  }

  /// Restarts from a new state (used after event polishing or re-bracketing).
  void reset(Real t, const StateT& y) {
    t_ = t;
    y_ = y;
    k1_ = rhs_(t_, y_);
  }

 private:
  Real attempt(Real h, StateT& y_new, StateT& k7) {
    const Real a21 = Real(1) / 5;
    const Real a31 = Real(3) / 40, a32 = Real(9) / 40;
    const Real a41 = Real(44) / 45, a42 = -Real(56) / 15, a43 = Real(32) / 9;
    const Real a51 = Real(19372) / 6561, a52 = -Real(25360) / 2187,
               a53 = Real(64448) / 6561, a54 = -Real(212) / 729;
    const Real a61 = Real(9017) / 3168, a62 = -Real(355) / 33, a63 = Real(46732) / 5247,
               a64 = Real(49) / 176, a65 = -Real(5103) / 18656;
    const Real b1 = Real(35) / 384, b3 = Real(500) / 1113, b4 = Real(125) / 192,
               b5 = -Real(2187) / 6784, b6 = Real(11) / 84;
    const Real e1 = Real(71) / 57600, e3 = -Real(71) / 16695, e4 = Real(71) / 1920,
               e5 = -Real(17253) / 339200, e6 = Real(22) / 525, e7 = -Real(1) / 40;

    StateT tmp;
    for (std::size_t i = 0; i < Dim; ++i) tmp[i] = y_[i] + h * a21 * k1_[i];
    k2_ = rhs_(t_ + 0.2 * h, tmp);
    for (std::size_t i = 0; i < Dim; ++i) tmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    k3_ = rhs_(t_ + 0.3 * h, tmp);
    for (std::size_t i = 0; i < Dim; ++i)
      tmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    k4_ = rhs_(t_ + 0.8 * h, tmp);
    for (std::size_t i = 0; i < Dim; ++i)
      tmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    k5_ = rhs_(t_ + h * Real(8) / 9, tmp);
    for (std::size_t i = 0; i < Dim; ++i)
      tmp[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                            a65 * k5_[i]);
    k6_ = rhs_(t_ + h, tmp);
    for (std::size_t i = 0; i < Dim; ++i)
      y_new[i] = y_[i] + h * (b1 * k1_[i] + b3 * k3_[i] + b4 * k4_[i] + b5 * k5_[i] +
                              b6 * k6_[i]);
    k7 = rhs_(t_ + h, y_new);

    Real err = 0.0;
    for (std::size_t i = 0; i < Dim; ++i) {
      const Real e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                            e6 * k6_[i] + e7 * k7[i]);
      const Real sc =
          Real(opts_.atol) + Real(opts_.rtol) * std::max(std::abs(y_[i]), std::abs(y_new[i]));
      const Real v = std::abs(e) / sc;
      if (!std::isfinite(v) || !std::isfinite(y_new[i])) {
        return std::numeric_limits<Real>::quiet_NaN();
      }
      err = std::max(err, v);
    }
    return err;
  }

  void build_dense(Real h, const StateT& y_new, const StateT& k7) {
    const Real d1 = -Real(12715105075) / 11282082432;
    const Real d3 = Real(87487479700) / 32700410799;
    const Real d4 = -Real(10690763975) / 1880347072;
    const Real d5 = Real(701980252875) / 199316789632;
    const Real d6 = -Real(1453857185) / 822651844;
    const Real d7 = Real(69997945) / 29380423;
    dense_.t0 = t_;
    dense_.h = h;
    for (std::size_t i = 0; i < Dim; ++i) {
      const Real ydiff = y_new[i] - y_[i];
      const Real bspl = h * k1_[i] - ydiff;
      dense_.coef[0][i] = y_[i];
      dense_.coef[1][i] = ydiff;
      dense_.coef[2][i] = bspl;
      dense_.coef[3][i] = ydiff - h * k7[i] - bspl;
      dense_.coef[4][i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] +
                               d6 * k6_[i] + d7 * k7[i]);
    }
  }

  Rhs rhs_;
  StepperOptions opts_;
  Real t_;
  StateT y_;
  StateT k1_{}, k2_{}, k3_{}, k4_{}, k5_{}, k6_{};
  Real h_ = 0.0;
  DenseStep<Dim, Real> dense_{};
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
};

/// Locates a sign change of `g` on [a, b] by bisection; `g(a)` and `g(b)` must
/// differ in sign. Stops when the interval is below `tol`.
template <class G>
double bisect_root(G&& g, double a, double b, double tol) {
  double ga = g(a);
  for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
    const double m = 0.5 * (a + b);
    const double gm = g(m);
    if ((gm > 0.0) == (ga > 0.0) && gm != 0.0) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace selfsim::ode
