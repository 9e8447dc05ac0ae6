#include "selfsim/io.hpp"

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace selfsim::io {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0')) {
    throw FormatError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
  return v;
}

struct Precise {
  explicit Precise(std::ostream& os) : os_(os), flags_(os.flags()), prec_(os.precision()) {
    os_.precision(17);
  }
  ~Precise() {
    os_.flags(flags_);
    os_.precision(prec_);
  }
  std::ostream& os_;
  std::ios::fmtflags flags_;
  std::streamsize prec_;
};

}  // namespace

void write_profile_csv(std::ostream& os, const ProfileTrajectory& traj, const DerivedConstants& c) {
  Precise guard(os);
  os << "r,f,fprime,F,w,Wtail,E\n";
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const ProfileState& s = traj.samples[i];
    const WState ws = w_state(c, s);
    const double E = i < traj.energy.size() ? traj.energy[i] : profile_energy(c, s.f, s.fprime);
    os << s.r << ',' << s.f << ',' << s.fprime << ',' << s.F << ',' << ws.w << ',' << ws.Wtail
       << ',' << E << '\n';
  }
  os << "# a," << traj.a << '\n';
  os << "# params," << c.params.N << ',' << c.params.p << ',' << c.params.q << '\n';
  for (const auto& e : traj.events) os << "# event," << to_string(e.kind) << ',' << e.r << '\n';
}

ProfileFile read_profile_csv(std::istream& is) {
  ProfileFile out;
  ProfileTrajectory& traj = out.trajectory;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  bool have_a = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.erase(body.begin());
      const auto cells = split(body);
      if (cells.empty()) continue;
      if (cells[0] == "a" && cells.size() == 2) {
        traj.a = parse_number(cells[1], line_no);
        have_a = true;
      } else if (cells[0] == "params" && cells.size() == 4) {
        ExponentParams p;
        p.N = static_cast<int>(parse_number(cells[1], line_no));
        p.p = parse_number(cells[2], line_no);
        p.q = parse_number(cells[3], line_no);
        out.params = p;
      } else if (cells[0] == "event" && cells.size() == 3) {
        try {
          traj.events.push_back({event_kind_from_string(cells[1]), parse_number(cells[2], line_no), 0});
        } catch (const std::invalid_argument&) {
          throw FormatError("line " + std::to_string(line_no) + ": unknown event '" + cells[1] + "'");
        }
      }
      continue;
    }
    if (!header) {
      if (line.rfind("r,f,fprime,F", 0) != 0) {
        throw FormatError("line " + std::to_string(line_no) + ": expected header r,f,fprime,F,...");
      }
      header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() < 4) {
      throw FormatError("line " + std::to_string(line_no) + ": expected at least 4 columns");
    }
    ProfileState s;
    s.r = parse_number(cells[0], line_no);
    s.f = parse_number(cells[1], line_no);
    s.fprime = parse_number(cells[2], line_no);
    s.F = parse_number(cells[3], line_no);
    traj.samples.push_back(s);
    if (cells.size() >= 7) traj.energy.push_back(parse_number(cells[6], line_no));
  }
  if (!header) throw FormatError("missing header line");
  if (traj.samples.empty()) throw FormatError("no samples");
  if (!have_a) traj.a = traj.samples.front().f;
  if (traj.energy.size() != traj.samples.size()) traj.energy.clear();
  return out;
}

void write_phase_csv(std::ostream& os, const PhasePath& path) {
  Precise guard(os);
  os << "eta,X,Y,Z,Wshift\n";
  for (const auto& pt : path.points) {
    os << pt.eta << ',' << pt.X << ',' << pt.Y << ',' << pt.Z << ',' << pt.Wshift << '\n';
  }
  for (const auto& w : path.warnings) os << "# warning," << w << '\n';
}

void write_snapshot_csv(std::ostream& os, const Snapshot& snap, const RadialGrid& grid) {
  Precise guard(os);
  os << "x,u\n";
  os << "# t," << snap.t << '\n';
  for (std::size_t i = 0; i < snap.u.size(); ++i) {
    os << grid.node(static_cast<int>(i)) << ',' << snap.u[i] << '\n';
  }
}

json to_json(const RangeReport& report) {
  return json{{"ok", report.ok()}, {"violations", report.violations}, {"warnings", report.warnings}};
}

json to_json(const DerivedConstants& c, const Spectrum& sp) {
  json j;
  j["N"] = c.params.N;
  j["p"] = c.params.p;
  j["q"] = c.params.q;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["mu"] = c.mu;
  j["Kstar"] = c.Kstar;
  j["theta"] = c.theta;
  j["gamma"] = c.gamma;
  j["Zstar"] = c.Zstar;
  j["nu"] = c.nu;
  j["zeta"] = c.zeta;
  j["lambda1"] = sp.lambda1;
  j["lambda2"] = sp.lambda2;
  j["lambda3"] = sp.lambda3;
  j["V1"] = sp.V1;
  j["V2"] = sp.V2;
  j["V3"] = sp.V3;
  j["LambdaMax"] = sp.LambdaMax;
  j["lambdastar"] = sp.lambdastar;
  j["qstar"] = sp.qstar;
  j["near_boundary"] = c.near_boundary;
  return j;
}

json to_json(const Classification& cls) {
  return json{{"label", std::string(to_string(cls.label))},
              {"witness_r", cls.witness_r},
              {"detail", cls.detail}};
}

json to_json(const Certification& cert) {
  json checks = json::array();
  for (const auto& k : cert.checks) {
    checks.push_back(json{{"name", k.name},
                          {"pass", k.pass},
                          {"value", k.value},
                          {"limit", k.limit},
                          {"detail", k.detail}});
  }
  return json{{"passed", cert.passed()}, {"r_end", cert.r_end}, {"checks", checks}};
}

json to_json(const TailFit& fit) {
  json j;
  j["K_est"] = fit.K_est;
  j["A_est"] = fit.A_est;
  j["theta_est"] = fit.theta_est;
  j["window"] = {fit.window.lo, fit.window.hi};
  j["residual_rms"] = fit.residual_rms;
  j["samples"] = fit.samples;
  j["stage2"] = json{{"converged", fit.stage2.converged},
                     {"K_est", fit.stage2.K_est},
                     {"A_est", fit.stage2.A_est},
                     {"theta_est", fit.stage2.theta_est},
                     {"residual_rms", fit.stage2.residual_rms}};
  return j;
}

json to_json(const RateFit& fit) {
  json j;
  j["lambda2_est"] = fit.lambda2_est;
  j["lambda3_est"] = fit.lambda3_est;
  j["Uinf_est"] = fit.Uinf_est;
  j["Vinf_est"] = fit.Vinf_est;
  j["A_from_Vinf"] = fit.A_from_Vinf;
  j["windows"] = json{{"Y", {fit.window_Y.lo, fit.window_Y.hi}},
                      {"Z", {fit.window_Z.lo, fit.window_Z.hi}}};
  j["samples"] = json{{"Y", fit.samples_Y}, {"Z", fit.samples_Z}};
  j["lambda3_reliable"] = fit.lambda3_reliable;
  j["warnings"] = fit.warnings;
  return j;
}

json to_json(const ExtinctionMetrics& m) {
  json j;
  j["alpha_est"] = m.alpha_est;
  j["l1_exponent_est"] = m.l1_exponent_est;
  j["selfsim_error"] = m.selfsim_error;
  j["grid"] = json{{"L", m.L}, {"M", m.M}};
  j["eps_reg"] = m.eps_reg;
  j["t_end"] = m.t_end;
  j["steps"] = m.steps;
  j["clipped"] = m.clipped;
  j["stable"] = m.stable;
  if (!m.detail.empty()) j["detail"] = m.detail;
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace selfsim::io
