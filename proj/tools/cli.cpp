#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "selfsim/io.hpp"
#include "selfsim/pde.hpp"
#include "selfsim/phase.hpp"
#include "selfsim/shooter.hpp"
#include "selfsim/tail.hpp"

namespace selfsim::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

// Bad input files and paths; reported as usage errors.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw InputError("cannot write '" + path.string() + "'");
  outf << content;
}

io::ProfileFile load_profile(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return io::read_profile_csv(in);
  } catch (const io::FormatError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Parameters from the flags when any was given, else from the profile file.
ExponentParams resolve_params(const CLI::App* sc, const ExponentParams& flags,
                              const io::ProfileFile& file) {
  const bool explicit_flags =
      sc->count("--N") + sc->count("--p") + sc->count("--q") > 0;
  if (explicit_flags || !file.params) return flags;
  return *file.params;
}

// Smallest power of ten at which r^{-theta} <= 1e-5.
double auto_rmax(const DerivedConstants& c) {
  return std::pow(10.0, std::ceil(5.0 / c.theta - 1e-12));
}

const char* kUniquenessCaveat =
    "N >= 2: uniqueness of the fast-decay profile is conjectured, not proven; "
    "a_star approximates an element of the boundary set";

void add_params(CLI::App* sc, ExponentParams& P) {
  sc->add_option("--N", P.N, "space dimension")->capture_default_str();
  sc->add_option("--p", P.p, "diffusion exponent")->capture_default_str();
  sc->add_option("--q", P.q, "absorption exponent")->capture_default_str();
}

// Commands.

int cmd_constants(const ExponentParams& P, const std::string& output, std::ostream& out) {
  const RangeReport rep = validate_range(P.N, P.p, P.q);
  if (!rep.ok()) throw RangeError(rep);
  const DerivedConstants c = derive_constants(P);
  json j = io::to_json(c, spectral_data(c));
  j["warnings"] = rep.warnings;
  const std::string text = io::dump(j);
  if (output.empty()) {
    out << text;
  } else {
    write_file(output, text);
  }
  return kSuccess;
}

int cmd_qstar(int N, double p, std::ostream& out) {
  RangeReport rep;
  if (N < 1) rep.violations.push_back("N >= 1 fails");
  if (!(p > 2.0 * N / (N + 1.0))) rep.violations.push_back("2N/(N+1) < p fails");
  if (!(p < 2.0)) rep.violations.push_back("p < 2 fails");
  if (!rep.ok()) throw RangeError(rep);
  const Crossover x = eigenvalue_crossover(N, p);
  out << io::dump(json{{"N", N}, {"p", p}, {"lambdastar", x.lambdastar}, {"qstar", x.qstar}});
  return kSuccess;
}

int cmd_classify(const ExponentParams& P, double a, double rmax, double tol, std::ostream& out) {
  const DerivedConstants c = derive_constants(P);
  if (!(a > 0.0)) throw InputError("--a must be positive");
  json j = io::to_json(classify(c, a, rmax, tol));
  j["a"] = a;
  j["r_max"] = rmax;
  out << io::dump(j);
  return kSuccess;
}

int cmd_shoot(const ExponentParams& P, double a, double rmax, double tol, bool full,
              const std::string& output, std::ostream& out) {
  const DerivedConstants c = derive_constants(P);
  if (!(a > 0.0)) throw InputError("--a must be positive");
  IntegrateOptions o;
  o.stop_at_first_event = !full;
  const ProfileTrajectory traj = integrate_profile(c, a, rmax, tol, o);
  std::ostringstream os;
  io::write_profile_csv(os, traj, c);
  if (output.empty()) {
    out << os.str();
  } else {
    write_file(output, os.str());
  }
  return traj.status == IntegrationStatus::kOk ? kSuccess : kAlgorithmFailure;
}

int cmd_find(const ExponentParams& P, double a_tol, double rmax, double ode_tol,
             const std::string& dir, std::ostream& out, std::ostream& err) {
  const DerivedConstants c = derive_constants(P);
  if (!(a_tol > 0.0) || !(ode_tol > 0.0)) throw InputError("tolerances must be positive");
  if (rmax <= 0.0) rmax = auto_rmax(c);
  BracketOptions bo;
  bo.ode_tol = ode_tol;
  const Bracket b = find_bracket(c, bo);
  ProfileOptions po;
  po.ode_tol = ode_tol;
  const ProfileSolution sol = find_profile(c, b, a_tol, rmax, po);

  std::ostringstream csv;
  io::write_profile_csv(csv, sol.trajectory, c);
  write_file(fs::path(dir) / "profile.csv", csv.str());

  const Certification cert = certify_B(sol.trajectory, c);
  json cj = io::to_json(cert);
  cj["a_star"] = sol.a_star;
  cj["bracket"] = {sol.final_bracket.lo, sol.final_bracket.hi};
  cj["r_max"] = rmax;
  cj["unique"] = sol.unique;
  cj["detail"] = sol.detail;
  if (!sol.unique) cj["caveat"] = kUniquenessCaveat;
  write_file(fs::path(dir) / "certify.json", io::dump(cj));

  json summary = {{"a_star", sol.a_star},
                  {"bracket", {sol.final_bracket.lo, sol.final_bracket.hi}},
                  {"r_max", rmax},
                  {"certified", cert.passed()},
                  {"unique", sol.unique},
                  {"bisection_steps", sol.bracket_widths.size()},
                  {"heuristic_assignments", sol.heuristic_assignments}};
  if (!sol.unique) summary["caveat"] = kUniquenessCaveat;

  int code = cert.passed() ? kSuccess : kAlgorithmFailure;
  try {
    const TailFit fit = fit_tail(w_transform(sol.trajectory, c), c, default_window(cert.r_end));
    write_file(fs::path(dir) / "tailfit.json", io::dump(io::to_json(fit)));
    summary["theta_est"] = fit.theta_est;
    summary["A_est"] = fit.A_est;
  } catch (const TailFitError& e) {
    write_file(fs::path(dir) / "tailfit.json", io::dump(json{{"error", e.what()}}));
    err << "tail fit failed: " << e.what() << "\n";
    code = kAlgorithmFailure;
  }
  out << io::dump(summary);
  if (!cert.passed()) err << "certification failed\n";
  return code;
}

int cmd_tail(const CLI::App* sc, const ExponentParams& flags, const std::string& profile,
             double lo, double hi, std::ostream& out) {
  const io::ProfileFile file = load_profile(profile);
  const DerivedConstants c = derive_constants(resolve_params(sc, flags, file));
  const auto& traj = file.trajectory;
  const Certification cert = certify_B(traj, c);
  TailWindow window = default_window(cert.r_end);
  if (lo > 0.0) window.lo = lo;
  if (hi > 0.0) window.hi = hi;
  const auto states = w_transform(traj, c);
  json j;
  j["certification"] = io::to_json(cert);
  if (states.size() >= 5) j["w_residual"] = w_residual(states, c);
  j["tailfit"] = io::to_json(fit_tail(states, c, window));
  out << io::dump(j);
  return cert.passed() ? kSuccess : kAlgorithmFailure;
}

int cmd_phase(const CLI::App* sc, const ExponentParams& flags, const std::string& profile,
              const std::vector<double>& x0, double eta0, double eta1, double tol,
              const std::string& dir, std::ostream& out) {
  if (profile.empty() == x0.empty()) throw InputError("give exactly one of --from-profile, --x0");
  PhasePath path;
  DerivedConstants c;
  if (!profile.empty()) {
    const io::ProfileFile file = load_profile(profile);
    c = derive_constants(resolve_params(sc, flags, file));
    path = map_to_phase(file.trajectory, c);
  } else {
    if (x0.size() != 3) throw InputError("--x0 takes three numbers X,Y,Z");
    c = derive_constants(flags);
    path = integrate_phase(c, {x0[0], x0[1], x0[2]}, eta0, eta1, tol);
  }
  std::ostringstream csv;
  io::write_phase_csv(csv, path);
  write_file(fs::path(dir) / "phase.csv", csv.str());

  json summary = {{"points", path.points.size()}, {"warnings", path.warnings}};
  if (!profile.empty()) {
    const RateFit fit = extract_rates(path, c, default_rate_window(path));
    json rj = io::to_json(fit);
    rj["dynamics_residual"] = dynamics_residual(path, c, 0.05 * c.Zstar);
    write_file(fs::path(dir) / "rates.json", io::dump(rj));
    summary["rates"] = rj;
  } else {
    summary["blew_up"] = path.blew_up;
  }
  out << io::dump(summary);
  return path.blew_up ? kAlgorithmFailure : kSuccess;
}

struct PdeFlags {
  std::string profile;
  int M = 400;
  double T = 1.0;
  double tend = 0.8;
  double L = 0.0;
  std::string scheme = "implicit";
  double eps = 0.0;
  double dt_rel = 2e-4;
  double cfl = 0.9;
  bool no_absorption = false;
};

int cmd_pde(const CLI::App* sc, const ExponentParams& flags, const PdeFlags& f,
            const std::string& dir, std::ostream& out) {
  const io::ProfileFile file = load_profile(f.profile);
  const DerivedConstants c = derive_constants(resolve_params(sc, flags, file));
  if (f.M < 2 || !(f.T > 0.0) || !(f.tend > 0.0) || !(f.tend < f.T)) {
    throw InputError("need --M >= 2, --T > 0 and 0 < --tend < --T");
  }
  const double L = f.L > 0.0 ? f.L : suggest_domain_radius(file.trajectory, c, f.T, f.tend);
  const RadialGrid grid = RadialGrid::make(L, f.M, c.params.N);
  const SelfSimilarField field = build_initial(file.trajectory, c, f.T, grid);
  PdeOptions o;
  o.scheme = f.scheme == "explicit" ? PdeScheme::kExplicit : PdeScheme::kLinearlyImplicit;
  o.eps_reg = f.eps;
  o.dt_rel = f.dt_rel;
  o.cfl = f.cfl;
  o.absorption = !f.no_absorption;
  const PdeRun run = run_and_measure(field, grid, c, f.tend, {}, o);

  for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(2) << std::setfill('0') << k << ".csv";
    std::ostringstream csv;
    io::write_snapshot_csv(csv, run.snapshots[k], grid);
    write_file(fs::path(dir) / name.str(), csv.str());
  }
  json mj = io::to_json(run.metrics);
  mj["scheme"] = f.scheme;
  mj["T"] = f.T;
  write_file(fs::path(dir) / "metrics.json", io::dump(mj));
  out << io::dump(mj);
  return run.metrics.stable ? kSuccess : kAlgorithmFailure;
}

// Config injection.

std::vector<std::string> extract_config_path(std::vector<std::string>& args, std::string& path) {
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw InputError("--config needs a file name");
      path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  return rest;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto number = [&](const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' is not a number");
    }
    return x;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (key == "out") {
      cfg.output_dir = val;
    } else if (key == "N") {
      const double n = number(key, val);
      if (n != std::floor(n)) throw ConfigError("N must be an integer");
      cfg.params.N = static_cast<int>(n);
    } else if (key == "p") {
      cfg.params.p = number(key, val);
    } else if (key == "q") {
      cfg.params.q = number(key, val);
    } else {
      const double v = number(key, val);
      if (!(v > 0.0)) throw ConfigError("tolerance '" + key + "' must be positive");
      cfg.tolerances[key] = v;
    }
  }
  return cfg;
}

std::string to_text(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, v] : flat_entries(cfg)) os << k << '=' << v << '\n';
  return os.str();
}

std::map<std::string, std::string> flat_entries(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  m["N"] = std::to_string(cfg.params.N);
  m["p"] = fmt17(cfg.params.p);
  m["q"] = fmt17(cfg.params.q);
  m["out"] = cfg.output_dir;
  for (const auto& [k, v] : cfg.tolerances) m[k] = fmt17(v);
  return m;
}

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-similar extinction profiles for u_t - div(|Du|^{p-2} Du) + |Du|^q = 0",
               "selfsim"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Expand all help");

  ExponentParams P;
  std::string output;
  std::string dir = ".";
  double a = 0.0;
  double rmax = 50.0;
  double tol = 1e-12;

  auto* c_const = app.add_subcommand("constants", "closed-form constants and spectrum as JSON");
  add_params(c_const, P);
  c_const->add_option("--output", output, "write JSON here instead of stdout");

  int qN = 1;
  double qp = 1.2;
  auto* c_qstar = app.add_subcommand("qstar", "eigenvalue crossover exponent q*");
  c_qstar->add_option("--N", qN, "space dimension")->capture_default_str();
  c_qstar->add_option("--p", qp, "diffusion exponent")->capture_default_str();

  auto* c_class = app.add_subcommand("classify", "classify one shooting parameter as A, C or undetermined");
  add_params(c_class, P);
  c_class->add_option("--a", a, "shooting parameter f(0)")->required();
  c_class->add_option("--rmax", rmax, "integration radius")->capture_default_str();
  c_class->add_option("--tol", tol, "relative local error per step")->capture_default_str();

  bool full = false;
  auto* c_shoot = app.add_subcommand("shoot", "integrate one profile and write its CSV");
  add_params(c_shoot, P);
  c_shoot->add_option("--a", a, "shooting parameter f(0)")->required();
  c_shoot->add_option("--rmax", rmax, "integration radius")->capture_default_str();
  c_shoot->add_option("--tol", tol, "relative local error per step")->capture_default_str();
  c_shoot->add_flag("--full", full, "keep integrating past the first decisive event");
  c_shoot->add_option("--output", output, "write CSV here instead of stdout");

  double a_tol = 1e-10;
  double find_rmax = 0.0;
  double ode_tol = 1e-12;
  auto* c_find = app.add_subcommand("find", "locate the fast-decay profile, certify it and fit its tail");
  add_params(c_find, P);
  c_find->add_option("--a-tol", a_tol, "relative bracket width")->capture_default_str();
  c_find->add_option("--rmax", find_rmax, "profile radius (0: smallest 10^k with r^-theta <= 1e-5)")
      ->capture_default_str();
  c_find->add_option("--ode-tol", ode_tol, "relative local error per step")->capture_default_str();
  c_find->add_option("--out", dir, "output directory")->capture_default_str();

  std::string profile;
  double win_lo = 0.0;
  double win_hi = 0.0;
  auto* c_tail = app.add_subcommand("tail", "certify a profile CSV and fit K* - A r^-theta");
  add_params(c_tail, P);
  c_tail->add_option("--profile", profile, "profile CSV")->required();
  c_tail->add_option("--window-lo", win_lo, "fit window start (0: r_end / 10)");
  c_tail->add_option("--window-hi", win_hi, "fit window end (0: r_end)");

  std::vector<double> x0;
  double eta0 = 0.0;
  double eta1 = 10.0;
  auto* c_phase = app.add_subcommand("phase", "phase-space path and decay rates");
  add_params(c_phase, P);
  c_phase->add_option("--from-profile", profile, "map a profile CSV");
  c_phase->add_option("--x0", x0, "start point X,Y,Z for free integration")->delimiter(',')
      ->expected(3);
  c_phase->add_option("--eta0", eta0, "start of the eta span")->capture_default_str();
  c_phase->add_option("--eta1", eta1, "end of the eta span")->capture_default_str();
  c_phase->add_option("--tol", tol, "relative local error per step")->capture_default_str();
  c_phase->add_option("--out", dir, "output directory")->capture_default_str();

  PdeFlags pf;
  auto* c_pde = app.add_subcommand("pde", "evolve the self-similar solution and measure extinction rates");
  add_params(c_pde, P);
  c_pde->add_option("--profile", pf.profile, "profile CSV")->required();
  c_pde->add_option("--M", pf.M, "grid cells")->capture_default_str();
  c_pde->add_option("--T", pf.T, "extinction time")->capture_default_str();
  c_pde->add_option("--tend", pf.tend, "final time, below T")->capture_default_str();
  c_pde->add_option("--L", pf.L, "domain radius (0: automatic)")->capture_default_str();
  c_pde->add_option("--scheme", pf.scheme, "implicit or explicit")
      ->check(CLI::IsMember({"implicit", "explicit"}))
      ->capture_default_str();
  c_pde->add_option("--eps", pf.eps, "regularisation (0: scheme default)")->capture_default_str();
  c_pde->add_option("--dt-rel", pf.dt_rel, "implicit step as a fraction of T - t")
      ->capture_default_str();
  c_pde->add_option("--cfl", pf.cfl, "explicit CFL factor")->capture_default_str();
  c_pde->add_flag("--no-absorption", pf.no_absorption, "drop the gradient absorption term");
  c_pde->add_option("--out", dir, "output directory")->capture_default_str();

  try {
    std::string config_path;
    args = extract_config_path(args, config_path);
    if (!config_path.empty()) {
      const RunConfig cfg = parse_run_config(read_file(config_path));
      const auto it = std::find_if(args.begin(), args.end(),
                                   [](const std::string& s) { return !s.empty() && s[0] != '-'; });
      if (it != args.end()) {
        CLI::App* sc = nullptr;
        for (auto* s : app.get_subcommands({})) {
          if (s->get_name() == *it) sc = s;
        }
        if (sc) {
          std::vector<std::string> injected;
          for (const auto& [k, v] : flat_entries(cfg)) {
            if (sc->get_option_no_throw("--" + k)) {
              injected.push_back("--" + k);
              injected.push_back(v);
            }
          }
          args.insert(it + 1, injected.begin(), injected.end());
        }
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    err << e.what() << "\n";
    return kUsage;
  }

  try {
    if (app.got_subcommand(c_const)) return cmd_constants(P, output, out);
    if (app.got_subcommand(c_qstar)) return cmd_qstar(qN, qp, out);
    if (app.got_subcommand(c_class)) return cmd_classify(P, a, rmax, tol, out);
    if (app.got_subcommand(c_shoot)) return cmd_shoot(P, a, rmax, tol, full, output, out);
    if (app.got_subcommand(c_find)) return cmd_find(P, a_tol, find_rmax, ode_tol, dir, out, err);
    if (app.got_subcommand(c_tail)) return cmd_tail(c_tail, P, profile, win_lo, win_hi, out);
    if (app.got_subcommand(c_phase)) {
      return cmd_phase(c_phase, P, profile, x0, eta0, eta1, tol, dir, out);
    }
    if (app.got_subcommand(c_pde)) return cmd_pde(c_pde, P, pf, dir, out);
  } catch (const RangeError& e) {
    out << io::dump(io::to_json(e.report()));
    err << "parameters outside the admissible range\n";
    return kRangeViolation;
  } catch (const InputError& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const ShootingError& e) {
    err << "shooting: " << e.what() << "\n";
    return kAlgorithmFailure;
  } catch (const TailFitError& e) {
    err << "tail fit: " << e.what() << "\n";
    return kAlgorithmFailure;
  } catch (const PhaseError& e) {
    err << "phase: " << e.what() << "\n";
    return kAlgorithmFailure;
  } catch (const PdeError& e) {
    err << "pde: " << e.what() << "\n";
    return kAlgorithmFailure;
  }
  return kUsage;
}

}  // namespace selfsim::cli
