#include "selfsim/tail.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

namespace selfsim {

WState w_state(const DerivedConstants& c, const ProfileState& s) {
  const double p = c.params.p;
  const double r = s.r;
  const double rm = std::pow(r, c.mu);
  WState ws;
  ws.r = r;
  ws.w = rm * s.f;
  ws.Wtail = rm * r * s.fprime;
  ws.wprime = (c.mu * ws.w + ws.Wtail) / r;
  // f'' = -(1/(p-1)) |F|^{(2-p)/(p-1)} F'.
  const auto d = profile_rhs(c, r, s.f, s.F);
  const double fpp = -std::pow(std::abs(s.F), (2.0 - p) / (p - 1.0)) * d[1] / (p - 1.0);
  ws.wsecond = c.mu * (c.mu - 1.0) * rm / (r * r) * s.f + 2.0 * c.mu * rm / r * s.fprime + rm * fpp;
  ws.gamma_term = c.beta * std::pow(r, c.gamma + 1.0) * ws.wprime;
  return ws;
}

std::vector<WState> w_transform(const ProfileTrajectory& traj, const DerivedConstants& c) {
  std::vector<WState> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    if (s.r > 0.0) out.push_back(w_state(c, s));
  }
  return out;
}

double w_residual(const std::vector<WState>& states, const DerivedConstants& c) {
  if (states.size() < 5) throw std::invalid_argument("w_residual needs at least 5 states");
  const double N = c.params.N;
  const double p = c.params.p;
  const double q = c.params.q;
  const double c1 = N - 1.0 - 2.0 * c.mu * (p - 1.0);
  const double c0 = c.mu * ((p - 1.0) * (c.mu + 1.0) - N + 1.0);
  double acc = 0.0;
  for (const auto& s : states) {
    const double aW = std::abs(s.Wtail);
    const double mob = std::pow(aW, 2.0 - p);
    const double t[5] = {(p - 1.0) * s.r * s.r * s.wsecond, c1 * s.r * s.wprime, c0 * s.w,
                         mob * s.gamma_term, -mob * std::pow(aW, q)};
    double sum = 0.0;
    double scale = 0.0;
    for (double v : t) {
      sum += v;
      scale = std::max(scale, std::abs(v));
    }
    const double rel = scale > 0.0 ? sum / scale : 0.0;
    acc += rel * rel;
  }
  return std::sqrt(acc / static_cast<double>(states.size()));
}

bool Certification::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const CertifyCheck& k) { return k.pass; });
}

Certification certify_B(const ProfileTrajectory& traj, const DerivedConstants& c,
                        const CertifyTolerances& tol) {
  Certification cert;
  const std::vector<WState> ws = w_transform(traj, c);
  const double K = c.Kstar;
  const double muK = c.mu * K;

  CertifyCheck range{"w_in_range", true, 0.0, K, ""};
  CertifyCheck mono{"w_increasing", true, 0.0, 0.0, ""};
  std::size_t touches = 0;
  double wmax = -std::numeric_limits<double>::infinity();
  double min_rwp = std::numeric_limits<double>::infinity();
  for (const auto& s : ws) {
    wmax = std::max(wmax, s.w);
    const double rwp = c.mu * s.w + s.Wtail;
    min_rwp = std::min(min_rwp, rwp / K);
    if (range.pass && (!(s.w > 0.0) || s.w > K * (1.0 + 1e-14))) {
      range.pass = false;
      std::ostringstream os;
      os << "w=" << s.w << " at r=" << s.r;
      range.detail = os.str();
    } else if (s.w >= K * (1.0 - 1e-14)) {
      ++touches;
    }
    if (mono.pass && !(rwp > 0.0)) {
      mono.pass = false;
      std::ostringstream os;
      os << "r w'=" << rwp << " at r=" << s.r;
      mono.detail = os.str();
    }
  }
  range.value = wmax;
  if (range.pass && touches > 0) {
    std::ostringstream os;
    os << "weak: w equals K* to rounding at " << touches << " samples";
    range.detail = os.str();
  }
  mono.value = ws.empty() ? 0.0 : min_rwp;
  if (mono.pass) mono.detail = "value is min r w' / K*";

  cert.r_end = ws.empty() ? 0.0 : ws.back().r;
  const WState last = ws.empty() ? WState{} : ws.back();
  CertifyCheck lim_w{"w_limit", false, std::abs(last.w - K), tol.K_rel * K, ""};
  CertifyCheck lim_s{"rwprime_limit", false, std::abs(c.mu * last.w + last.Wtail),
                     tol.slope_rel * muK, ""};
  CertifyCheck lim_d{"Wtail_limit", false, std::abs(last.Wtail + muK), tol.deriv_rel * muK, ""};
  for (CertifyCheck* k : {&lim_w, &lim_s, &lim_d}) {
    k->pass = !ws.empty() && k->value <= k->limit;
    std::ostringstream os;
    os << "at r=" << cert.r_end;
    k->detail = os.str();
  }
  cert.checks = {range, mono, lim_w, lim_s, lim_d};
  return cert;
}

TailWindow default_window(double r_max) { return {r_max / 10.0, r_max}; }

namespace {

struct WindowData {
  std::vector<double> r;
  std::vector<double> dev;  // (w - K*) / K*
};

WindowData collect(const std::vector<WState>& states, const DerivedConstants& c,
                   const TailWindow& window) {
  WindowData d;
  for (const auto& s : states) {
    if (s.r < window.lo || s.r > window.hi) continue;
    d.r.push_back(s.r);
    d.dev.push_back((s.w - c.Kstar) / c.Kstar);
  }
  return d;
}

// Linear least squares of dev on [1, -r^{-theta}], in units of K*.
std::array<double, 3> project(const WindowData& d, double theta) {
  const Eigen::Index n = static_cast<Eigen::Index>(d.r.size());
  Eigen::MatrixXd M(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, 0) = 1.0;
    M(i, 1) = -std::pow(d.r[static_cast<std::size_t>(i)], -theta);
    b(i) = d.dev[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d x = M.colPivHouseholderQr().solve(b);
  return {x(0), x(1), (M * x - b).squaredNorm()};
}

}  // namespace

TailFit fit_tail(const std::vector<WState>& states, const DerivedConstants& c,
                 const TailWindow& window, bool refine) {
  const WindowData d = collect(states, c, window);
  if (d.r.size() < 10) {
    std::ostringstream os;
    os << "tail window [" << window.lo << ", " << window.hi << "] holds " << d.r.size()
       << " samples, need at least 10";
    throw TailFitError(os.str());
  }
  const std::size_t n = d.r.size();
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = -d.dev[i];
    if (!(gap > 0.0)) {
      std::ostringstream os;
      os << "K* - w = " << gap * c.Kstar << " <= 0 at r=" << d.r[i];
      throw TailFitError(os.str());
    }
    M(static_cast<Eigen::Index>(i), 0) = 1.0;
    M(static_cast<Eigen::Index>(i), 1) = std::log(d.r[i]);
    y(static_cast<Eigen::Index>(i)) = std::log(gap);
  }
  const Eigen::Vector2d x = M.colPivHouseholderQr().solve(y);

  TailFit fit;
  fit.window = window;
  fit.samples = n;
  fit.K_est = c.Kstar;
  fit.A_est = std::exp(x(0));
  fit.theta_est = -x(1);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double model = -fit.A_est * std::pow(d.r[i], -fit.theta_est);
    ss += (d.dev[i] - model) * (d.dev[i] - model);
  }
  fit.A_est *= c.Kstar;
  fit.residual_rms = c.Kstar * std::sqrt(ss / static_cast<double>(n));

  if (refine) {
    const double t0 = fit.theta_est;
    auto ssr = [&](double th) { return project(d, th)[2]; };
    const auto best =
        boost::math::tools::brent_find_minima(ssr, 0.5 * t0, 1.5 * t0, 52);
    const auto sol = project(d, best.first);
    Stage2Fit& s2 = fit.stage2;
    s2.theta_est = best.first;
    s2.K_est = c.Kstar * (1.0 + sol[0]);
    s2.A_est = c.Kstar * sol[1];
    s2.residual_rms = c.Kstar * std::sqrt(sol[2] / static_cast<double>(n));
    s2.converged = std::isfinite(s2.theta_est) && std::isfinite(s2.K_est) &&
                   best.first > 0.5 * t0 && best.first < 1.5 * t0;
  }
  return fit;
}

}  // namespace selfsim
