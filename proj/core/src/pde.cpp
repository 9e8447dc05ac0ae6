#include "selfsim/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

namespace selfsim {

namespace {

double sphere_area(int N) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N);
}

// Radial weights r^{N-1} at faces i+1/2 and node volumes int r^{N-1} dr.
struct Geometry {
  std::vector<double> face;  // face[i] sits at (i + 1/2) dx
  std::vector<double> vol;
};

Geometry geometry(const RadialGrid& g) {
  Geometry geo;
  geo.face.resize(static_cast<std::size_t>(g.M));
  geo.vol.resize(static_cast<std::size_t>(g.M) + 1);
  const int N = g.N;
  auto cum = [&](double r) { return std::pow(r, N) / N; };
  for (int i = 0; i < g.M; ++i) geo.face[static_cast<std::size_t>(i)] = std::pow((i + 0.5) * g.dx, N - 1);
  for (int i = 0; i <= g.M; ++i) {
    const double lo = i == 0 ? 0.0 : (i - 0.5) * g.dx;
    const double hi = i == g.M ? g.L : (i + 0.5) * g.dx;
    geo.vol[static_cast<std::size_t>(i)] = cum(hi) - cum(lo);
  }
  return geo;
}

double eps_of(const RadialGrid& g, const PdeOptions& o) { return o.eps_reg > 0.0 ? o.eps_reg : g.dx; }

// Lipschitz constant of H_eps(s) = (s^2 + eps^2)^{q/2} - eps^q.
double hamiltonian_lip(double q, double eps) {
  const double s = eps / std::sqrt(1.0 - q);
  return q * s * std::pow(s * s + eps * eps, 0.5 * q - 1.0);
}

double slope_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd M(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, 0) = 1.0;
    M(i, 1) = x[static_cast<std::size_t>(i)];
    b(i) = y[static_cast<std::size_t>(i)];
  }
  return M.colPivHouseholderQr().solve(b)(1);
}

}  // namespace

RadialGrid RadialGrid::make(double L, int M, int N) {
  if (!(L > 0.0) || M < 2 || N < 1) throw std::invalid_argument("grid needs L > 0, M >= 2, N >= 1");
  return {L, M, L / M, N};
}

ProfileInterpolant::ProfileInterpolant(const ProfileTrajectory& traj, const DerivedConstants& c,
                                       double A, double theta)
    : a_(traj.a), K_(c.Kstar), mu_(c.mu), A_(A), theta_(theta) {
  for (const auto& s : traj.samples) {
    if (!r_.empty() && !(s.r > r_.back())) continue;
    r_.push_back(s.r);
    f_.push_back(s.f);
    m_.push_back(s.fprime);
  }
  if (r_.size() < 2) throw PdeError("profile needs at least two samples");
  // Fritsch-Carlson limiter.
  for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
    const double d = (f_[i + 1] - f_[i]) / (r_[i + 1] - r_[i]);
    if (d == 0.0) {
      m_[i] = m_[i + 1] = 0.0;
      continue;
    }
    const double a = m_[i] / d;
    const double b = m_[i + 1] / d;
    if (a < 0.0) m_[i] = 0.0;
    if (b < 0.0) m_[i + 1] = 0.0;
    const double s = a * a + b * b;
    if (s > 9.0) {
      const double tau = 3.0 / std::sqrt(s);
      m_[i] = tau * a * d;
      m_[i + 1] = tau * b * d;
    }
  }
  const double p = c.params.p;
  series_pow_ = p / (p - 1.0);
  series_k_ = (p - 1.0) / p * std::pow(c.alpha * a_ / c.params.N, 1.0 / (p - 1.0));
}

double ProfileInterpolant::operator()(double r) const {
  if (r <= r_.front()) return a_ - series_k_ * std::pow(r, series_pow_);
  if (r == r_.back()) return f_.back();
  if (r > r_.back()) return K_ * std::pow(r, -mu_) * (1.0 - A_ / K_ * std::pow(r, -theta_));
  const auto it = std::upper_bound(r_.begin(), r_.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - r_.begin()) - 1;
  const double h = r_[i + 1] - r_[i];
  const double t = (r - r_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f_[i] + (t3 - 2 * t2 + t) * h * m_[i] +
         (-2 * t3 + 3 * t2) * f_[i + 1] + (t3 - t2) * h * m_[i + 1];
}

double SelfSimilarField::exact(double r, double time) const {
  const double s = T - time;
  return std::pow(s, alpha) * (*profile)(r * std::pow(s, beta));
}

SelfSimilarField build_initial(const ProfileTrajectory& traj, const DerivedConstants& c, double T,
                               const RadialGrid& grid) {
  const Certification cert = certify_B(traj, c);
  if (!cert.passed()) throw PdeError("profile is not certified as a fast-decay profile");
  const TailFit fit = fit_tail(w_transform(traj, c), c, default_window(cert.r_end), false);

  SelfSimilarField field;
  field.T = T;
  field.t = 0.0;
  field.alpha = c.alpha;
  field.beta = c.beta;
  field.profile = std::make_shared<ProfileInterpolant>(traj, c, fit.A_est, fit.theta_est);
  field.u.resize(static_cast<std::size_t>(grid.M) + 1);
  for (int i = 0; i <= grid.M; ++i) field.u[static_cast<std::size_t>(i)] = field.exact(grid.node(i), 0.0);
  if (field.u.back() > 1e-3 * field.u.front()) {
    std::ostringstream os;
    os << "domain too small: u(0,L)/u(0,0) = " << field.u.back() / field.u.front() << " > 1e-3";
    throw PdeError(os.str());
  }
  return field;
}

double suggest_domain_radius(const ProfileTrajectory& traj, const DerivedConstants& c, double T,
                             double t_end, double fraction) {
  const int N = c.params.N;
  // Integrate f xi^{N-1} over the samples by trapezoids, tail beyond the last sample analytically.
  std::vector<double> cum(1, 0.0);
  const auto& S = traj.samples;
  for (std::size_t i = 1; i < S.size(); ++i) {
    const double g0 = S[i - 1].f * std::pow(S[i - 1].r, N - 1);
    const double g1 = S[i].f * std::pow(S[i].r, N - 1);
    cum.push_back(cum.back() + 0.5 * (g0 + g1) * (S[i].r - S[i - 1].r));
  }
  const double rl = S.back().r;
  const double tail_last = c.Kstar * std::pow(rl, N - c.mu) / (c.mu - N);
  const double total = cum.back() + tail_last;
  double xi = rl;
  for (std::size_t i = 0; i < S.size(); ++i) {
    if (total - cum[i] <= fraction * total) {
      xi = S[i].r;
      break;
    }
  }
  if (xi >= rl) xi = std::pow(fraction * total * (c.mu - N) / c.Kstar, 1.0 / (N - c.mu));
  double L = xi / std::pow(T - t_end, c.beta);
  // Also keep u(0, L) <= 1e-3 u(0, 0) at the start.
  const double xi0 = std::pow(1e-3 * traj.a / c.Kstar, -1.0 / c.mu);
  L = std::max(L, xi0 / std::pow(T, c.beta));
  return 5.0 * std::ceil(L / 5.0);
}

double stable_dt(const RadialGrid& grid, const ExponentParams& params, const PdeOptions& opts) {
  const double eps = eps_of(grid, opts);
  const Geometry geo = geometry(grid);
  const double mob = std::pow(eps, params.p - 2.0);
  double worst = 0.0;
  for (int i = 0; i < grid.M; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double wl = i == 0 ? 0.0 : geo.face[k - 1];
    worst = std::max(worst, (wl + geo.face[k]) / (geo.vol[k] * grid.dx));
  }
  double rate = worst * mob;
  if (opts.absorption) rate += hamiltonian_lip(params.q, eps) / grid.dx;
  return opts.cfl / rate;
}

namespace {

void step_explicit(SelfSimilarField& field, const RadialGrid& grid, const ExponentParams& params,
                   const PdeOptions& opts, double dt, const Geometry& geo,
                   std::vector<double>& next) {
  PdeOptions limit = opts;
  limit.cfl = 1.0;
  if (dt > stable_dt(grid, params, limit) * (1.0 + 1e-12)) {
    throw PdeError("time step violates the monotonicity bound");
  }
  const double p = params.p;
  const double q = params.q;
  const double eps = eps_of(grid, opts);
  const double e2 = eps * eps;
  const double eq = std::pow(eps, q);
  const int M = grid.M;
  const auto& u = field.u;

  std::vector<double> g(static_cast<std::size_t>(M));
  std::vector<double> flux(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double s = (u[k + 1] - u[k]) / grid.dx;
    g[k] = s;
    flux[k] = geo.face[k] * std::pow(s * s + e2, 0.5 * (p - 2.0)) * s;
  }
  for (int i = 0; i < M; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double fl = i == 0 ? 0.0 : flux[k - 1];
    double du = (flux[k] - fl) / geo.vol[k];
    if (opts.absorption) {
      const double pm = i == 0 ? -g[0] : g[k - 1];
      const double pp = g[k];
      const double s = std::max(std::max(pm, 0.0), -std::min(pp, 0.0));
      du -= std::pow(s * s + e2, 0.5 * q) - eq;
    }
    next[k] = u[k] + dt * du;
  }
  field.outflow -= sphere_area(grid.N) * dt * flux[static_cast<std::size_t>(M - 1)];
}

void step_linearly_implicit(SelfSimilarField& field, const RadialGrid& grid,
                            const ExponentParams& params, const PdeOptions& opts, double dt,
                            const Geometry& geo, std::vector<double>& next) {
  const double p = params.p;
  const double q = params.q;
  const int M = grid.M;
  const auto& u = field.u;
  std::vector<double> g(static_cast<std::size_t>(M));
  double gmax = 0.0;
  for (int i = 0; i < M; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    g[k] = (u[k + 1] - u[k]) / grid.dx;
    gmax = std::max(gmax, std::abs(g[k]));
  }
  const double floor = (opts.eps_reg > 0.0 ? opts.eps_reg : 1e-12) * gmax;
  auto lifted = [floor](double s) { return std::max(std::abs(s), floor); };

  // Row i: lower[i] u_{i-1} + diag[i] u_i + upper[i] u_{i+1} = rhs[i].
  const std::size_t n = static_cast<std::size_t>(M);
  std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    diag[k] = geo.vol[k] / dt;
    rhs[k] = geo.vol[k] / dt * u[k];
  }
  if (floor > 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      // Face k + 1/2 couples nodes k and k + 1.
      const double a = geo.face[k] * std::pow(lifted(g[k]), p - 2.0) / grid.dx;
      diag[k] += a;
      upper[k] -= a;
      if (k + 1 < n) {
        diag[k + 1] += a;
        lower[k + 1] -= a;
      }
    }
  }
  // Diffusive coupling across the last face, before absorption joins upper[].
  const double a_last = -upper[n - 1];
  if (opts.absorption && floor > 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      const double pm = k == 0 ? -g[0] : g[k - 1];
      const double pp = g[k];
      const double right = -std::min(pp, 0.0);
      const double left = std::max(pm, 0.0);
      if (right == 0.0 && left == 0.0) continue;
      const double cv = geo.vol[k] * std::pow(lifted(std::max(left, right)), q - 1.0) / grid.dx;
      diag[k] += cv;
      if (right >= left) {
        upper[k] -= cv;  // |u_r| ~ (u_i - u_{i+1}) / dx
      } else if (k == 0) {
        upper[k] -= cv;  // mirror node
      } else {
        lower[k] -= cv;  // |u_r| ~ (u_i - u_{i-1}) / dx
      }
    }
  }
  // Known boundary value moves to the right side.
  const double uL = field.profile ? field.exact(grid.L, field.t + dt) : u[n];
  rhs[n - 1] -= upper[n - 1] * uL;
  upper[n - 1] = 0.0;

  // Thomas algorithm; the matrix is an M-matrix so no pivoting is needed.
  for (std::size_t k = 1; k < n; ++k) {
    const double w = lower[k] / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  next[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) next[k] = (rhs[k] - upper[k] * next[k + 1]) / diag[k];
  next[n] = uL;
  field.outflow += sphere_area(grid.N) * dt * a_last * (next[n - 1] - uL);
}

}  // namespace

void step(SelfSimilarField& field, const RadialGrid& grid, const ExponentParams& params,
          const PdeOptions& opts, double dt) {
  if (!(dt > 0.0)) throw PdeError("time step must be positive");
  const Geometry geo = geometry(grid);
  std::vector<double> next(field.u);
  if (opts.scheme == PdeScheme::kExplicit) {
    step_explicit(field, grid, params, opts, dt, geo, next);
  } else {
    step_linearly_implicit(field, grid, params, opts, dt, geo, next);
  }
  field.t += dt;
  const int M = grid.M;
  if (field.profile) next[static_cast<std::size_t>(M)] = field.exact(grid.L, field.t);
  double umax = 0.0;
  for (double v : next) umax = std::max(umax, std::abs(v));
  for (int i = 0; i < M; ++i) {
    double& v = next[static_cast<std::size_t>(i)];
    if (v < -1e-10 * umax) {
      v = 0.0;
      ++field.clipped;
    }
  }
  field.u.swap(next);
}

double mass(const std::vector<double>& u, const RadialGrid& grid) {
  const Geometry geo = geometry(grid);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * geo.vol[i];
  return sphere_area(grid.N) * s;
}

double sup_norm(const std::vector<double>& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

PdeRun run_and_measure(const SelfSimilarField& field0, const RadialGrid& grid,
                       const DerivedConstants& c, double t_end, std::vector<double> checkpoints,
                       const PdeOptions& opts) {
  if (!(t_end < field0.T)) throw PdeError("t_end must lie strictly below the extinction time T");
  if (!field0.profile) throw PdeError("run_and_measure needs a self-similar field");
  if (checkpoints.empty()) {
    for (int k = 0; k <= 10; ++k) checkpoints.push_back(t_end * k / 10.0);
  }
  std::sort(checkpoints.begin(), checkpoints.end());

  PdeRun run;
  ExtinctionMetrics& m = run.metrics;
  m.L = grid.L;
  m.M = grid.M;
  m.eps_reg = opts.scheme == PdeScheme::kExplicit ? eps_of(grid, opts)
                                                   : (opts.eps_reg > 0.0 ? opts.eps_reg : 1e-12);
  m.t_end = t_end;

  SelfSimilarField field = field0;
  const bool expl = opts.scheme == PdeScheme::kExplicit;
  const double dt_cfl = expl ? stable_dt(grid, c.params, opts) : 0.0;
  std::vector<double> lx, ls, ll;
  auto record = [&]() {
    double err = 0.0;
    double ref = 0.0;
    for (int i = 0; i <= grid.M; ++i) {
      const double e = field.exact(grid.node(i), field.t);
      err = std::max(err, std::abs(field.u[static_cast<std::size_t>(i)] - e));
      ref = std::max(ref, std::abs(e));
    }
    m.selfsim_error = std::max(m.selfsim_error, err / ref);
    lx.push_back(std::log(field.T - field.t));
    ls.push_back(std::log(sup_norm(field.u)));
    ll.push_back(std::log(mass(field.u, grid)));
    run.snapshots.push_back({field.t, field.u});
  };

  for (double tc : checkpoints) {
    if (tc > t_end) break;
    while (field.t < tc) {
      const double dt_nat = expl ? dt_cfl : opts.dt_rel * (field.T - field.t);
      const double dt = std::min(dt_nat, tc - field.t);
      step(field, grid, c.params, opts, dt);
      ++m.steps;
      if (!std::isfinite(field.u.front())) {
        m.stable = false;
        std::ostringstream os;
        os << "non-finite values at t=" << field.t;
        m.detail = os.str();
        break;
      }
      // Land exactly on the checkpoint despite rounding in the running sum.
      if (tc - field.t < 1e-12 * std::max(1.0, tc)) field.t = tc;
    }
    if (!m.stable) break;
    record();
  }
  m.clipped = field.clipped;
  if (lx.size() >= 2) {
    m.alpha_est = slope_fit(lx, ls);
    m.l1_exponent_est = slope_fit(lx, ll);
  }
  return run;
}

}  // namespace selfsim
