#include "selfsim/shooter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "selfsim/ode.hpp"

namespace selfsim {

namespace {

using Y2 = ode::State<2>;
using Y4 = ode::State<4>;

constexpr double kEventRelTol = 1e-10;

double signed_pow(double x, double e) {
  return x >= 0.0 ? std::pow(x, e) : -std::pow(-x, e);
}

struct Rhs2 {
  const DerivedConstants* c;
  Y2 operator()(double r, const Y2& y) const {
    const auto d = profile_rhs(*c, r, y[0], y[1]);
    return {d[0], d[1]};
  }
};

ode::StepperOptions stepper_options(double tol) {
  ode::StepperOptions o;
  o.rtol = tol;
  o.atol = 1e-300;
  return o;
}

// Event indicators; only the sign matters.
double g_f(double f) { return f; }
double g_wprime(const DerivedConstants& c, double r, double f, double F) {
  return r * slope_from_momentum(c, F) + c.mu * f;
}
double g_wk(const DerivedConstants& c, double r, double f) {
  return std::pow(r, c.mu) * f - c.Kstar;
}

ProfileState make_state(const DerivedConstants& c, double r, double f, double F) {
  return {r, f, F, slope_from_momentum(c, F)};
}

bool decisive(const ProfileEvent& e) {
  switch (e.kind) {
    case EventKind::kFHitsZero:
      return true;
    case EventKind::kWPrimeVanishes:
      return e.direction < 0;
    case EventKind::kWExceedsKstar:
      return e.direction > 0;
    case EventKind::kRmaxReached:
      return false;
  }
  return false;
}

// Decision test on a single state (no localisation): +1 for C, -1 for A, 0 open.
int state_side(const DerivedConstants& c, double r, double f, double F) {
  if (!(f > 0.0)) return -1;
  if (g_wprime(c, r, f, F) <= 0.0) return -1;
  if (g_wk(c, r, f) >= 0.0) return +1;
  return 0;
}

void fill_energy(const DerivedConstants& c, ProfileTrajectory& t) {
  t.energy.resize(t.samples.size());
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    t.energy[i] = profile_energy(c, t.samples[i].f, t.samples[i].fprime);
  }
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kWPrimeVanishes:
      return "W_PRIME_VANISHES";
    case EventKind::kWExceedsKstar:
      return "W_EXCEEDS_KSTAR";
    case EventKind::kFHitsZero:
      return "F_HITS_ZERO";
    case EventKind::kRmaxReached:
      return "RMAX_REACHED";
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view name) {
  for (EventKind k : {EventKind::kWPrimeVanishes, EventKind::kWExceedsKstar,
                      EventKind::kFHitsZero, EventKind::kRmaxReached}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown event kind: " + std::string(name));
}

std::string_view to_string(IntegrationStatus status) {
  switch (status) {
    case IntegrationStatus::kOk:
      return "ok";
    case IntegrationStatus::kStepUnderflow:
      return "step_underflow";
    case IntegrationStatus::kOverflow:
      return "overflow";
  }
  return "?";
}

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::kA:
      return "A";
    case ClassLabel::kC:
      return "C";
    case ClassLabel::kUndetermined:
      return "UNDETERMINED";
  }
  return "?";
}

const ProfileEvent* ProfileTrajectory::first_decisive_event() const {
  for (const auto& e : events) {
    if (decisive(e)) return &e;
  }
  return nullptr;
}

double profile_energy(const DerivedConstants& c, double f, double fprime) {
  const double p = c.params.p;
  return (p - 1.0) / p * std::pow(std::abs(fprime), p) + 0.5 * c.alpha * f * f;
}

double slope_from_momentum(const DerivedConstants& c, double F) {
  const double p = c.params.p;
  return -signed_pow(F, 1.0 / (p - 1.0));
}

std::array<double, 2> profile_rhs(const DerivedConstants& c, double r, double f, double F) {
  const double p = c.params.p;
  const double q = c.params.q;
  const double fp = slope_from_momentum(c, F);
  const double absorb = std::pow(std::abs(F), q / (p - 1.0));
  const double dF = c.alpha * f + c.beta * r * fp - absorb - (c.params.N - 1.0) * F / r;
  return {fp, dF};
}

SeriesStart series_start(const DerivedConstants& c, double a, double r0) {
  if (!(a > 0.0) || !(r0 > 0.0)) {
    throw std::invalid_argument("series_start needs a > 0 and r0 > 0");
  }
  const double N = c.params.N;
  const double p = c.params.p;
  const double q = c.params.q;
  const double c1 = c.alpha * a / N;
  const double k = (p - 1.0) / p * std::pow(c1, 1.0 / (p - 1.0));
  const double pe = p / (p - 1.0);
  const double qe = q / (p - 1.0);

  SeriesStart s;
  const double f = a - k * std::pow(r0, pe);
  const double F = c1 * r0;
  s.state = make_state(c, r0, f, F);
  // Leading corrections to F from absorption and from the alpha f + beta r f' terms.
  const double t_abs = std::pow(c1 * r0, qe) / (c1 * (N + qe));
  const double t_lin =
      (c.alpha * k + c.beta * std::pow(c1, 1.0 / (p - 1.0))) * std::pow(r0, pe) / (c1 * (N + pe));
  s.F_truncation = std::max(t_abs, t_lin);
  s.f_truncation = s.F_truncation / (p - 1.0);
  return s;
}

double default_start_radius(const DerivedConstants& c, double a) {
  const double p = c.params.p;
  double r0 = 1e-4 * std::pow(a, -(2.0 - p) / p);
  for (int i = 0; i < 200; ++i) {
    const SeriesStart s = series_start(c, a, r0);
    if (s.f_truncation <= 1e-6 && s.F_truncation <= 1e-6) break;
    r0 *= 0.5;
  }
  return r0;
}

ProfileTrajectory integrate_profile(const DerivedConstants& c, double a, double r_max,
                                    double tol, const IntegrateOptions& opts) {
  const double r0 = opts.r0 > 0.0 ? opts.r0 : default_start_radius(c, a);
  const SeriesStart s = series_start(c, a, r0);
  return integrate_profile_from(c, a, s.state, r_max, tol, opts);
}

ProfileTrajectory integrate_profile_from(const DerivedConstants& c, double a,
                                         const ProfileState& start, double r_max, double tol,
                                         const IntegrateOptions& opts) {
  ProfileTrajectory out;
  out.a = a;
  out.samples.push_back(make_state(c, start.r, start.f, start.F));
  if (!(r_max > start.r)) {
    fill_energy(c, out);
    return out;
  }

  ode::DormandPrince45<2, Rhs2> stepper(Rhs2{&c}, start.r, Y2{start.f, start.F},
                                        stepper_options(tol));
  double g0[3] = {g_f(start.f), g_wprime(c, start.r, start.f, start.F),
                  g_wk(c, start.r, start.f)};
  const EventKind kinds[3] = {EventKind::kFHitsZero, EventKind::kWPrimeVanishes,
                              EventKind::kWExceedsKstar};

  for (;;) {
    const ode::StepStatus st = stepper.step(r_max);
    if (st != ode::StepStatus::kAccepted) {
      out.status = IntegrationStatus::kStepUnderflow;
      std::ostringstream os;
      os << "step size underflow at r=" << stepper.t();
      out.detail = os.str();
      break;
    }
    const double r = stepper.t();
    const Y2& y = stepper.y();
    const double g1[3] = {g_f(y[0]), g_wprime(c, r, y[0], y[1]), g_wk(c, r, y[0])};
    const auto& dense = stepper.last_step();
    const double rl = dense.t0;

    // Locate every sign change inside the step.
    std::vector<ProfileEvent> found;
    for (int k = 0; k < 3; ++k) {
      if ((g0[k] > 0.0) == (g1[k] > 0.0)) continue;
      // f only matters on its first zero; after that the run ends.
      auto gk = [&](double rr) {
        const Y2 yy = dense(rr);
        if (k == 0) return g_f(yy[0]);
        if (k == 1) return g_wprime(c, rr, yy[0], yy[1]);
        return g_wk(c, rr, yy[0]);
      };
      const double re = ode::bisect_root(gk, rl, r, kEventRelTol * r);
      found.push_back({kinds[k], re, g1[k] > 0.0 ? +1 : -1});
    }
    std::sort(found.begin(), found.end(),
              [](const ProfileEvent& x, const ProfileEvent& y) { return x.r < y.r; });

    bool stop = false;
    for (const auto& e : found) {
      out.events.push_back(e);
      if (e.kind == EventKind::kFHitsZero || (opts.stop_at_first_event && decisive(e))) {
        const Y2 ye = dense(e.r);
        out.samples.push_back(make_state(c, e.r, ye[0], ye[1]));
        stop = true;
        break;
      }
    }
    if (stop) break;

    if (opts.record_samples || r >= r_max) {
      out.samples.push_back(make_state(c, r, y[0], y[1]));
    }
    if (std::abs(y[0]) + std::abs(y[1]) > opts.overflow_guard) {
      out.status = IntegrationStatus::kOverflow;
      std::ostringstream os;
      os << "|f| + |F| exceeded " << opts.overflow_guard << " at r=" << r;
      out.detail = os.str();
      break;
    }
    if (r >= r_max) {
      out.events.push_back({EventKind::kRmaxReached, r_max, 0});
      break;
    }
    std::copy(g1, g1 + 3, g0);
  }
  if (!opts.record_samples && out.samples.size() > 2) {
    out.samples.erase(out.samples.begin() + 1, out.samples.end() - 1);
  }
  fill_energy(c, out);
  return out;
}

Classification classify_trajectory(const DerivedConstants& c, const ProfileTrajectory& traj) {
  Classification cl;
  if (const ProfileEvent* e = traj.first_decisive_event()) {
    cl.witness_r = e->r;
    cl.label = e->kind == EventKind::kWExceedsKstar ? ClassLabel::kC : ClassLabel::kA;
    std::ostringstream os;
    os << to_string(e->kind) << " at r=" << e->r;
    cl.detail = os.str();
    return cl;
  }
  cl.label = ClassLabel::kUndetermined;
  cl.witness_r = traj.samples.empty() ? 0.0 : traj.samples.back().r;
  if (traj.status != IntegrationStatus::kOk) {
    cl.detail = "integration stopped: " + traj.detail;
  } else {
    const ProfileState& s = traj.samples.back();
    std::ostringstream os;
    os << "no decisive event up to r=" << s.r << " (w/K*="
       << std::pow(s.r, c.mu) * s.f / c.Kstar << ")";
    cl.detail = os.str();
  }
  return cl;
}

Classification classify(const DerivedConstants& c, double a, double r_max, double tol) {
  IntegrateOptions o;
  o.record_samples = false;
  return classify_trajectory(c, integrate_profile(c, a, r_max, tol, o));
}

Bracket find_bracket(const DerivedConstants& c, const BracketOptions& opts) {
  Bracket b;
  bool have_lo = false;
  bool have_hi = false;
  for (int k = 2; k <= opts.max_decade && !have_lo; ++k) {
    const double a = std::pow(10.0, -k);
    if (classify(c, a, opts.r_max, opts.ode_tol).label == ClassLabel::kC) {
      b.lo = a;
      have_lo = true;
    }
  }
  for (int k = 2; k <= opts.max_decade && !have_hi; ++k) {
    const double a = std::pow(10.0, k);
    if (classify(c, a, opts.r_max, opts.ode_tol).label == ClassLabel::kA) {
      b.hi = a;
      have_hi = true;
    }
  }
  if (!have_lo || !have_hi) {
    std::ostringstream os;
    os << "no bracket within 10^-" << opts.max_decade << " .. 10^" << opts.max_decade << ": "
       << (have_lo ? "" : "no C value found") << (have_lo || have_hi ? "" : ", ")
       << (have_hi ? "" : "no A value found");
    throw ShootingError(os.str());
  }
  b.tol = b.hi - b.lo;
  return b;
}

namespace {

// Side of an undecided state, judged by the local decay rate of K* - w against theta.
ClassLabel heuristic_side(const DerivedConstants& c, const ProfileState& s) {
  const double w = std::pow(s.r, c.mu) * s.f;
  const double rw = std::pow(s.r, c.mu) * (s.r * s.fprime + c.mu * s.f);
  const double gap = c.Kstar - w;
  if (!(gap > 0.0)) return ClassLabel::kC;
  return rw / gap > c.theta ? ClassLabel::kC : ClassLabel::kA;
}

// Profile system in (r; f, F).
struct RadialSys {
  const DerivedConstants* c;
  Y2 operator()(double r, const Y2& y) const { return Rhs2{c}(r, y); }
  int side(double r, const Y2& y) const { return state_side(*c, r, y[0], y[1]); }
  Y2 deviation(double r, const Y2& y) const {
    const double rm = std::pow(r, c->mu);
    const double V = -rm * r * slope_from_momentum(*c, y[1]);
    return {c->Kstar - rm * y[0], c->mu * c->Kstar - V};
  }
  ProfileState profile(double r, const Y2& y) const { return make_state(*c, r, y[0], y[1]); }
};

// The same system in eta = ln r for the deviations d = K* - w, e = mu K* - V with
// V = -r^{mu+1} f'. (d, e) = 0 is an exact equilibrium up to a forcing that
// vanishes with the deviation, and the right-hand side below has no
// cancellation, so errors stay relative to the distance from the limit.
struct DeviationSys {
  const DerivedConstants* c;
  double V0;  // mu K*
  double s;   // 2 - p + q

  explicit DeviationSys(const DerivedConstants& cc)
      : c(&cc), V0(cc.mu * cc.Kstar), s(2.0 - cc.params.p + cc.params.q) {}

  Y2 operator()(double eta, const Y2& y) const { return deviation_rhs(*c, eta, y[0], y[1]); }
  int side(double, const Y2& y) const {
    if (y[0] <= 0.0) return +1;
    if (y[1] - c->mu * y[0] <= 0.0 || y[0] >= c->Kstar || y[1] >= V0) return -1;
    return 0;
  }
  Y2 deviation(double, const Y2& y) const { return y; }
  ProfileState profile(double eta, const Y2& y) const {
    const double r = std::exp(eta);
    const double rm = std::exp(-c->mu * eta);
    const double f = rm * (c->Kstar - y[0]);
    const double fp = -rm / r * (V0 - y[1]);
    return {r, f, std::pow(-fp, c->params.p - 1.0), fp};
  }
};

template <class Sys>
struct Pair4 {
  Sys sys;
  Y4 operator()(double t, const Y4& y) const {
    const Y2 a = sys(t, Y2{y[0], y[1]});
    const Y2 b = sys(t, Y2{y[2], y[3]});
    return {a[0], a[1], b[0], b[1]};
  }
};

struct PairRun {
  std::vector<double> t;
  std::vector<Y4> y;
  bool reached = false;
  bool failed = false;
};

// Integrates two neighbouring states on a shared step sequence until either
// one commits to a side or t_end is reached.
template <class Sys>
PairRun integrate_pair(const Sys& sys, double t_s, const Y4& y0, double t_end, double tol) {
  PairRun run;
  run.t.push_back(t_s);
  run.y.push_back(y0);
  ode::DormandPrince45<4, Pair4<Sys>> stepper(Pair4<Sys>{sys}, t_s, y0, stepper_options(tol));
  while (stepper.t() < t_end) {
    if (stepper.step(t_end) != ode::StepStatus::kAccepted) {
      run.failed = true;
      return run;
    }
    const double t = stepper.t();
    const Y4& y = stepper.y();
    if (sys.side(t, Y2{y[0], y[1]}) != 0 || sys.side(t, Y2{y[2], y[3]}) != 0) return run;
    run.t.push_back(t);
    run.y.push_back(y);
  }
  run.reached = true;
  return run;
}

// Largest recorded index up to which the two members agree to `ratio` of
// their distance from the fast-decay limit.
template <class Sys>
std::size_t agreement_index(const Sys& sys, const PairRun& run, double ratio) {
  std::size_t last = 0;
  for (std::size_t i = 1; i < run.t.size(); ++i) {
    const Y4& y = run.y[i];
    const Y2 a = sys.deviation(run.t[i], Y2{y[0], y[1]});
    const Y2 b = sys.deviation(run.t[i], Y2{y[2], y[3]});
    const double dd = std::abs(b[0] - a[0]) / std::abs(0.5 * (a[0] + b[0]));
    const double de = std::abs(b[1] - a[1]) / std::abs(0.5 * (a[1] + b[1]));
    if (!(dd <= ratio) || !(de <= ratio)) break;
    last = i;
  }
  return last;
}

template <class Sys>
int classify_from(const Sys& sys, double t0, const Y2& y0, double t_cap, double tol,
                  bool* undecided) {
  ode::DormandPrince45<2, Sys> stepper(sys, t0, y0, stepper_options(tol));
  *undecided = false;
  while (stepper.t() < t_cap) {
    if (stepper.step(t_cap) != ode::StepStatus::kAccepted) {
      throw ShootingError("step size underflow while classifying");
    }
    const int sd = sys.side(stepper.t(), stepper.y());
    if (sd != 0) return sd;
  }
  *undecided = true;
  const ProfileState ps = sys.profile(stepper.t(), stepper.y());
  return ps.f > 0.0 && std::isfinite(ps.f) ? 0 : -1;
}

ClassLabel classify_state(const DerivedConstants& c, double a, const ProfileState& s,
                          double r_cap, double tol, int* heuristic) {
  IntegrateOptions o;
  o.record_samples = false;
  const ProfileTrajectory t = integrate_profile_from(c, a, s, r_cap, tol, o);
  const Classification cl = classify_trajectory(c, t);
  if (cl.label != ClassLabel::kUndetermined) return cl.label;
  if (t.status != IntegrationStatus::kOk) throw ShootingError(cl.detail);
  if (heuristic) ++*heuristic;
  return heuristic_side(c, t.samples.back());
}

}  // namespace

std::array<double, 2> deviation_rhs(const DerivedConstants& c, double eta, double d, double e) {
  const double p = c.params.p;
  const double N = c.params.N;
  const double V0 = c.mu * c.Kstar;
  const double s = 2.0 - p + c.params.q;
  const double V = V0 - e;
  // V^s - V0^s without cancellation.
  const double dVs = std::pow(V0, s) * std::expm1(s * std::log1p(-e / V0));
  const double de = (c.mu + 1.0) * e + (dVs - (N - 1.0) * e) / (p - 1.0) -
                    std::pow(V, 2.0 - p) / (p - 1.0) * std::exp(c.gamma * eta) *
                        (c.beta * e - c.alpha * d);
  return {c.mu * d - e, de};
}

ProfileSolution find_profile(const DerivedConstants& c, const Bracket& bracket, double a_tol,
                             double r_max, const ProfileOptions& opts) {
  if (!(bracket.lo > 0.0) || !(bracket.hi > bracket.lo)) {
    throw std::invalid_argument("find_profile needs 0 < lo < hi");
  }
  ProfileSolution sol;
  sol.unique = c.params.N == 1;
  double lo = bracket.lo;
  double hi = bracket.hi;
  const double tol = opts.ode_tol;

  // Bisection in the shooting parameter.
  while (hi - lo > a_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double r0 = default_start_radius(c, mid);
    const ProfileState s = series_start(c, mid, r0).state;
    const ClassLabel side =
        classify_state(c, mid, s, opts.classify_r_cap, tol, &sol.heuristic_assignments);
    if (side == ClassLabel::kC) {
      lo = mid;
    } else {
      hi = mid;
    }
    sol.bracket_widths.push_back(hi - lo);
  }
  sol.a_star = 0.5 * (lo + hi);
  sol.final_bracket = {lo, hi, a_tol};

  ProfileTrajectory& traj = sol.trajectory;
  traj.a = sol.a_star;
  const double r0 = default_start_radius(c, sol.a_star);
  const ProfileState s_lo = series_start(c, lo, r0).state;
  const ProfileState s_hi = series_start(c, hi, r0).state;
  traj.samples.push_back(
      make_state(c, r0, 0.5 * (s_lo.f + s_hi.f), 0.5 * (s_lo.F + s_hi.F)));

  // Lock-step run of the C and A ends in the radial variables, kept up to
  // the point where they still agree.
  const RadialSys radial{&c};
  const PairRun first = integrate_pair(radial, r0, Y4{s_lo.f, s_lo.F, s_hi.f, s_hi.F}, r_max, tol);
  if (first.failed) {
    traj.status = IntegrationStatus::kStepUnderflow;
    traj.detail = "step size underflow in the profile run";
  }
  const std::size_t first_idx = agreement_index(radial, first, opts.splice_ratio);
  for (std::size_t i = 1; i <= first_idx; ++i) {
    const Y4& v = first.y[i];
    traj.samples.push_back(make_state(c, first.t[i], 0.5 * (v[0] + v[2]), 0.5 * (v[1] + v[3])));
  }
  sol.reached_r_max = first.reached && first_idx + 1 == first.t.size();

  // Tail continuation in deviation variables: cut where the ends still agree,
  // re-bracket the state there by bisection and carry on.
  if (!sol.reached_r_max && !first.failed && first_idx > 0) {
    const DeviationSys dev(c);
    const double eta_max = std::log(r_max);
    double eta_s = std::log(first.t[first_idx]);
    const Y4& v = first.y[first_idx];
    const Y2 a0 = radial.deviation(first.t[first_idx], Y2{v[0], v[1]});
    const Y2 a1 = radial.deviation(first.t[first_idx], Y2{v[2], v[3]});
    Y4 y = {a0[0], a0[1], a1[0], a1[1]};
    const double eta_cap = std::log(std::max(opts.classify_r_cap, 10.0 * r_max));
    bool bracketed = false;  // first cut comes straight from the radial run

    for (;;) {
      if (bracketed) {
        const PairRun run = integrate_pair(dev, eta_s, y, eta_max, tol);
        if (run.failed) {
          traj.status = IntegrationStatus::kStepUnderflow;
          traj.detail = "step size underflow during tail continuation";
          break;
        }
        const std::size_t idx = agreement_index(dev, run, opts.splice_ratio);
        for (std::size_t i = 1; i <= idx; ++i) {
          const Y4& u = run.y[i];
          ProfileState ps = dev.profile(
              run.t[i], Y2{0.5 * (u[0] + u[2]), 0.5 * (u[1] + u[3])});
          if (run.reached && i + 1 == run.t.size()) ps.r = r_max;
          traj.samples.push_back(ps);
        }
        if (run.reached && idx + 1 == run.t.size()) {
          sol.reached_r_max = true;
          break;
        }
        if (idx == 0 || sol.restarts >= opts.max_restarts) {
          std::ostringstream os;
          os << "tail continuation stalled at r=" << std::exp(eta_s);
          traj.detail = os.str();
          break;
        }
        eta_s = run.t[idx];
        y = run.y[idx];
      }
      bracketed = true;

      // Confirm the two ends at the cut, widening the segment if the pair
      // drifted to one side.
      auto label = [&](const Y2& v) {
        bool undecided = false;
        int sd = classify_from(dev, eta_s, v, eta_cap, tol, &undecided);
        if (undecided) {
          ++sol.heuristic_assignments;
          sd = heuristic_side(c, dev.profile(eta_cap, v)) == ClassLabel::kC ? +1 : -1;
        }
        return sd;
      };
      const Y4 base = y;
      auto blend = [&](double t) {
        return Y2{base[0] + t * (base[2] - base[0]), base[1] + t * (base[3] - base[1])};
      };
      double tl = 0.0;
      double th = 1.0;
      bool ok = true;
      for (double step = 1.0; label(blend(tl)) <= 0; step *= 2.0) {
        th = tl;
        tl -= step;
        if (step > 1e6) {
          ok = false;
          break;
        }
      }
      for (double step = 1.0; ok && label(blend(th)) >= 0; step *= 2.0) {
        tl = th;
        th += step;
        if (step > 1e6) ok = false;
      }
      if (!ok) {
        std::ostringstream os;
        os << "could not re-bracket the tail at r=" << std::exp(eta_s);
        traj.detail = os.str();
        break;
      }
      Y2 yl = blend(tl);
      Y2 yh = blend(th);
      auto separation = [](const Y2& a, const Y2& b) {
        return std::max(std::abs(b[0] - a[0]) / std::abs(a[0]),
                        std::abs(b[1] - a[1]) / std::abs(a[1]));
      };
      // Bisection stops well above the integration tolerance: the pair's
      // drift relative to its own spread then stays small.
      const double floor = opts.rebracket_floor_factor * tol;
      while (separation(yl, yh) > floor) {
        const double tm = 0.5 * (tl + th);
        const Y2 ym = blend(tm);
        if (ym == yl || ym == yh) break;
        if (label(ym) > 0) {
          tl = tm;
          yl = ym;
        } else {
          th = tm;
          yh = ym;
        }
      }
      y = {yl[0], yl[1], yh[0], yh[1]};
      ++sol.restarts;
    }
  }

  sol.clean_radius = traj.samples.back().r;
  if (sol.reached_r_max) traj.events.push_back({EventKind::kRmaxReached, r_max, 0});
  fill_energy(c, traj);

  std::ostringstream os;
  os << "bisection steps=" << sol.bracket_widths.size() << ", restarts=" << sol.restarts;
  if (sol.heuristic_assignments > 0) {
    os << ", heuristic assignments=" << sol.heuristic_assignments;
  }
  if (!sol.unique) os << "; uniqueness of the boundary value is not established for N >= 2";
  if (!traj.detail.empty()) os << "; " << traj.detail;
  sol.detail = os.str();
  return sol;
}

}  // namespace selfsim
