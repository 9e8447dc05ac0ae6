#include "selfsim/phase.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "selfsim/ode.hpp"

namespace selfsim {

namespace {

constexpr double kBlowUp = 1e12;
constexpr double kShiftFloor = 1e-13;

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

double distance_to_p0(const DerivedConstants& c, const Vec3& x) {
  return norm({x[0], x[1], x[2] - c.Zstar});
}

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

Line regress(const std::vector<double>& x, const std::vector<double>& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd M(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, 0) = 1.0;
    M(i, 1) = x[static_cast<std::size_t>(i)];
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d s = M.colPivHouseholderQr().solve(b);
  return {s(1), s(0)};
}

template <class T>
std::array<T, 3> field(const std::array<T, 3>& v, const DerivedConstants& c) {
  const T N = c.params.N;
  const T p = c.params.p;
  const T k = (2 - p) / (p - 1);
  const T alpha = c.alpha;
  const T beta = c.beta;
  const T nu = c.nu;
  const T Zs = c.Zstar;
  const T X = v[0];
  const T Y = v[1];
  const T Z = v[2];
  const T drift = alpha * X - beta * Y;
  return {N * X - Y - alpha * X * X + beta * X * Y + X * Z,
          (2 - k * (N - 1)) * Y + k * (drift - Z) * Y,
          nu * Z * (Zs - Z) + nu * drift * Z};
}

}  // namespace

PhasePoint make_phase_point(const DerivedConstants& c, double eta, const Vec3& xyz) {
  return {eta, xyz[0], xyz[1], xyz[2], xyz[2] - c.Zstar};
}

PhasePath map_to_phase(const ProfileTrajectory& traj, const DerivedConstants& c) {
  const double p = c.params.p;
  const double q = c.params.q;
  PhasePath path;
  path.source = PhaseSource::kMappedFromProfile;
  std::size_t skipped = 0;
  for (const auto& s : traj.samples) {
    if (!(s.r > 0.0) || !(s.fprime < 0.0) || !(s.f > 0.0)) {
      ++skipped;
      continue;
    }
    const double g = -s.fprime;
    const Vec3 x = {s.r * s.f * std::pow(g, 1.0 - p), s.r * s.r * std::pow(g, 2.0 - p),
                    s.r * std::pow(g, q - p + 1.0)};
    const double eta = std::log(s.r);
    if (!path.points.empty() && !(eta > path.points.back().eta)) {
      ++skipped;
      continue;
    }
    path.points.push_back(make_phase_point(c, eta, x));
  }
  if (skipped > 0) {
    std::ostringstream os;
    os << "skipped " << skipped << " samples with f' = 0 or f <= 0";
    path.warnings.push_back(os.str());
  }
  return path;
}

Vec3 vector_field(const Vec3& v, const DerivedConstants& c) { return field(v, c); }

Vec3 vector_field(const PhasePoint& pt, const DerivedConstants& c) {
  return vector_field(pt.xyz(), c);
}

Mat3 jacobian(const Vec3& v, const DerivedConstants& c) {
  const double N = c.params.N;
  const double p = c.params.p;
  const double k = (2.0 - p) / (p - 1.0);
  const double X = v[0];
  const double Y = v[1];
  const double Z = v[2];
  const double a = c.alpha;
  const double b = c.beta;
  Mat3 J;
  J[0] = {N - 2.0 * a * X + b * Y + Z, -1.0 + b * X, X};
  J[1] = {k * a * Y, 2.0 - k * (N - 1.0) + k * (a * X - 2.0 * b * Y - Z), -k * Y};
  J[2] = {c.nu * a * Z, -c.nu * b * Z, c.nu * (c.Zstar - 2.0 * Z) + c.nu * (a * X - b * Y)};
  return J;
}

Mat3 jacobian_origin(const DerivedConstants& c) {
  const double gap = c.params.q - c.params.p + 1.0;
  const double nz = c.nu * c.Zstar;
  Mat3 J;
  J[0] = {c.params.N + c.Zstar, -1.0, 0.0};
  J[1] = {0.0, -(c.params.p - 2.0 * c.params.q) / gap, 0.0};
  J[2] = {c.alpha * nz, -c.beta * nz, -nz};
  return J;
}

Vec3 apply(const Mat3& m, const Vec3& v) {
  Vec3 out{};
  for (int i = 0; i < 3; ++i) out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return out;
}

PhasePath integrate_phase(const DerivedConstants& c, const Vec3& x0, double eta0, double eta1,
                          double tol) {
  PhasePath path;
  path.source = PhaseSource::kFreeIntegration;
  path.points.push_back(make_phase_point(c, eta0, x0));
  // Rounding feeds the unstable direction of P0, so the state is carried in
  // long double and rounded to double only on output.
  using LState = ode::State<3, long double>;
  auto rhs = [&c](long double, const LState& y) { return field(y, c); };
  ode::StepperOptions o;
  o.rtol = tol;
  o.atol = tol * 1e-6;
  o.initial_step = 1e-3;
  // Finite-time blow-up needs steps far below 1e-14 to reach the guard.
  o.min_step_rel = 1e-18;
  const LState y0 = {x0[0], x0[1], x0[2]};
  ode::DormandPrince45<3, decltype(rhs), long double> stepper(rhs, eta0, y0, o);
  auto narrow = [](const LState& y) {
    return Vec3{static_cast<double>(y[0]), static_cast<double>(y[1]), static_cast<double>(y[2])};
  };
  while (stepper.t() < eta1) {
    const auto st = stepper.step(eta1);
    if (st != ode::StepStatus::kAccepted) {
      std::ostringstream os;
      os << "step size underflow at eta=" << static_cast<double>(stepper.t());
      path.warnings.push_back(os.str());
      break;
    }
    const Vec3 y = narrow(stepper.y());
    path.points.push_back(make_phase_point(c, static_cast<double>(stepper.t()), y));
    if (norm(y) >= kBlowUp) {
      path.blew_up = true;
      std::ostringstream os;
      os << "|x| reached 1e12 at eta=" << static_cast<double>(stepper.t());
      path.warnings.push_back(os.str());
      break;
    }
  }
  return path;
}

RateWindow default_rate_window(const PhasePath& path) {
  if (path.points.empty()) return {};
  const double end = path.points.back().eta;
  return {end - std::log(10.0), end};
}

RateFit extract_rates(const PhasePath& path, const DerivedConstants& c, const RateWindow& window) {
  if (path.points.empty()) throw PhaseError("empty phase path");
  const double dist = distance_to_p0(c, path.points.back().xyz());
  if (!(dist <= 0.05 * c.Zstar)) {
    std::ostringstream os;
    os << "path does not converge to P0: terminal distance " << dist << " > 0.05 Z*";
    throw PhaseError(os.str());
  }
  std::vector<double> ey, ly, ez, lz;
  std::size_t floored = 0;
  for (const auto& pt : path.points) {
    if (pt.eta < window.lo || pt.eta > window.hi) continue;
    if (pt.Y > 0.0) {
      ey.push_back(pt.eta);
      ly.push_back(std::log(pt.Y));
    }
    if (std::abs(pt.Wshift) > kShiftFloor * c.Zstar) {
      ez.push_back(pt.eta);
      lz.push_back(std::log(std::abs(pt.Wshift)));
    } else {
      ++floored;
    }
  }
  if (ey.size() < 5 || ez.size() < 5) {
    throw PhaseError("too few points in the rate window (|Z - Z*| floor 1e-13 or short path)");
  }

  RateFit fit;
  fit.window_Y = {ey.front(), ey.back()};
  fit.window_Z = {ez.front(), ez.back()};
  fit.samples_Y = ey.size();
  fit.samples_Z = ez.size();
  const Line a = regress(ey, ly);
  const Line b = regress(ez, lz);
  const double p = c.params.p;
  const double q = c.params.q;
  fit.lambda2_est = a.slope;
  fit.Uinf_est = std::exp(a.intercept) / (p - q);
  fit.lambda3_est = b.slope;

  std::size_t positive = 0;
  for (const auto& pt : path.points) {
    if (pt.eta >= window.lo && pt.eta <= window.hi && pt.Wshift > 0.0) ++positive;
  }
  fit.Vinf_est = (positive * 2 > ez.size() ? 1.0 : -1.0) * std::exp(b.intercept);
  if (fit.Vinf_est > 0.0) fit.warnings.push_back("Z - Z* > 0 on the window: V_inf positive");
  if (floored > 0) fit.warnings.push_back("window truncated at the |Z - Z*| floor");

  const Spectrum sp = spectral_data(c);
  fit.A_from_Vinf =
      -fit.Vinf_est * std::pow(c.Zstar, c.mu) / ((c.mu - sp.lambda3) * (q - p + 1.0));
  if (std::abs(sp.lambda2 - sp.lambda3) < 0.1) {
    fit.lambda3_reliable = false;
    fit.warnings.push_back("lambda2 and lambda3 closer than 0.1: lambda3 estimate unreliable");
  }
  return fit;
}

double dynamics_residual(const PhasePath& path, const DerivedConstants& c, double radius) {
  const auto& P = path.points;
  if (P.size() < 5) return 0.0;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 2; i + 2 < P.size(); ++i) {
    const Vec3 x = P[i].xyz();
    const double dist = distance_to_p0(c, x);
    if (!(dist <= radius) || dist == 0.0) continue;
    // Derivative of the Lagrange interpolant through five neighbours at eta_i.
    const double t = P[i].eta;
    double wts[5];
    for (int j = 0; j < 5; ++j) {
      const double tj = P[i - 2 + j].eta;
      double num = 0.0;
      double den = 1.0;
      for (int k = 0; k < 5; ++k) {
        if (k == j) continue;
        const double tk = P[i - 2 + k].eta;
        den *= tj - tk;
        double prod = 1.0;
        for (int m = 0; m < 5; ++m) {
          if (m == j || m == k) continue;
          prod *= t - P[i - 2 + m].eta;
        }
        num += prod;
      }
      wts[j] = num / den;
    }
    Vec3 dx{};
    for (int j = 0; j < 5; ++j) {
      const Vec3 xj = P[i - 2 + j].xyz();
      // Z enters through its shift so the stencil never sees the large constant.
      dx[0] += wts[j] * xj[0];
      dx[1] += wts[j] * xj[1];
      dx[2] += wts[j] * P[i - 2 + j].Wshift;
    }
    const Vec3 F = vector_field(x, c);
    const double e = norm({dx[0] - F[0], dx[1] - F[1], dx[2] - F[2]}) / dist;
    acc += e * e;
    ++n;
  }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

}  // namespace selfsim
