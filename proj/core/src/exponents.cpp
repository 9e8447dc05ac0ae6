#include "selfsim/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selfsim {

namespace {

constexpr double kBoundaryWarn = 1e-6;

std::string join(const std::vector<std::string>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) os << "; ";
    os << items[i];
  }
  return os.str();
}

}  // namespace

RangeReport validate_range(int N, double p, double q) {
  RangeReport rep;
  if (!std::isfinite(p) || !std::isfinite(q)) {
    rep.violations.emplace_back("p and q must be finite");
    return rep;
  }
  if (N < 1) rep.violations.emplace_back("N >= 1 fails");
  const double pc = N >= 1 ? 2.0 * N / (N + 1.0) : 0.0;
  if (!(p > pc)) rep.violations.emplace_back("2N/(N+1) < p fails");
  if (!(p < 2.0)) rep.violations.emplace_back("p < 2 fails");
  if (!(q > p - 1.0)) rep.violations.emplace_back("p-1 < q fails");
  if (!(q < p / 2.0)) rep.violations.emplace_back("q < p/2 fails");
  if (rep.ok()) {
    if (q - (p - 1.0) < kBoundaryWarn) {
      rep.warnings.emplace_back("q within 1e-6 of p-1: mu and Kstar blow up");
    }
    if (p / 2.0 - q < kBoundaryWarn) {
      rep.warnings.emplace_back("q within 1e-6 of p/2: alpha and beta blow up");
    }
  }
  return rep;
}

RangeError::RangeError(RangeReport report)
    : std::invalid_argument("exponent range violation: " + join(report.violations)),
      report_(std::move(report)) {}

DerivedConstants derive_constants(const ExponentParams& params) {
  RangeReport rep = validate_range(params.N, params.p, params.q);
  if (!rep.ok()) throw RangeError(std::move(rep));

  const double N = params.N;
  const double p = params.p;
  const double q = params.q;
  const double gap = q - p + 1.0;  // q - p + 1 > 0

  DerivedConstants c;
  c.params = params;
  c.near_boundary = rep.near_boundary();
  c.alpha = (p - q) / (p - 2.0 * q);
  c.beta = gap / (p - 2.0 * q);
  c.mu = (p - q) / gap;
  c.Zstar = (N * (p - 1.0) - q * (N - 1.0)) / gap;
  // (mu K*)^{q-p+1} = (p-1)(mu+1) - N + 1 = Zstar, so mu K* = Zstar^{mu+1}.
  c.Kstar = std::pow(c.Zstar, 1.0 / gap) / c.mu;
  c.theta = (N * (p - 1.0) - q * (N - 1.0)) / (p - 1.0);
  c.gamma = (2.0 * q - p) / gap;
  c.nu = gap / (p - 1.0);
  c.zeta = N * (p - 1.0) + q * c.Zstar;
  return c;
}

double crossover_polynomial(int N, double p, double lambda) {
  return (N - 1.0) * lambda * lambda - 3.0 * (p - 1.0) * lambda + (2.0 - p) * (p - 1.0);
}

Crossover eigenvalue_crossover(int N, double p) {
  Crossover out;
  if (N == 1) {
    out.lambdastar = (2.0 - p) / 3.0;
  } else {
    // Smaller root of the convex quadratic; it is the one inside (0, (2-p)/2).
    const double a = N - 1.0;
    const double b = -3.0 * (p - 1.0);
    const double c = (2.0 - p) * (p - 1.0);
    const double disc = std::sqrt(b * b - 4.0 * a * c);
    // Cancellation-free form of (-b - disc) / (2a).
    double root = (2.0 * c) / (-b + disc);
    // Newton polish against the bracketing interval.
    const double hi = (2.0 - p) / 2.0;
    for (int it = 0; it < 4; ++it) {
      const double val = crossover_polynomial(N, p, root);
      const double der = 2.0 * a * root + b;
      if (der == 0.0) break;
      const double next = root - val / der;
      if (!(next > 0.0 && next < hi)) break;
      root = next;
    }
    out.lambdastar = root;
  }
  out.qstar = out.lambdastar + p - 1.0;
  return out;
}

Spectrum spectral_data(const DerivedConstants& c) {
  const auto& prm = c.params;
  const double p = prm.p;
  const double q = prm.q;
  const double gap = q - p + 1.0;

  Spectrum s;
  s.lambda1 = prm.N + c.Zstar;
  s.lambda2 = -(p - 2.0 * q) / gap;
  s.lambda3 = -c.nu * c.Zstar;
  s.V1 = {c.zeta, 0.0, c.alpha * gap * c.Zstar};
  s.V2 = {gap, p - q, 0.0};
  s.V3 = {0.0, 0.0, 1.0};
  s.LambdaMax = std::max(s.lambda2, s.lambda3);
  const Crossover x = eigenvalue_crossover(prm.N, p);
  s.lambdastar = x.lambdastar;
  s.qstar = x.qstar;
  return s;
}

}  // namespace selfsim
