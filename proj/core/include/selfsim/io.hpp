#pragma once

// CSV and JSON artifacts. CSV rows carry 17 significant digits, comment and
// event lines start with '#'.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsim/exponents.hpp"
#include "selfsim/pde.hpp"
#include "selfsim/phase.hpp"
#include "selfsim/shooter.hpp"
#include "selfsim/tail.hpp"

namespace selfsim::io {

using nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header `r,f,fprime,F,w,Wtail,E`, then one row per sample, then
/// `# a,<a>`, `# params,<N>,<p>,<q>` and `# event,<kind>,<r>` lines.
void write_profile_csv(std::ostream& os, const ProfileTrajectory& traj, const DerivedConstants& c);

struct ProfileFile {
  ProfileTrajectory trajectory;
  std::optional<ExponentParams> params;  // from the `# params` line, if present
};

/// Reads what write_profile_csv writes. Without a `# a` line the shooting
/// parameter is taken from the first sample. Throws FormatError.
ProfileFile read_profile_csv(std::istream& is);

void write_phase_csv(std::ostream& os, const PhasePath& path);
void write_snapshot_csv(std::ostream& os, const Snapshot& snap, const RadialGrid& grid);

json to_json(const RangeReport& report);
/// Flat object: alpha ... zeta, lambda1..3, V1..3 as arrays, lambdastar, qstar.
json to_json(const DerivedConstants& c, const Spectrum& sp);
json to_json(const Classification& cls);
json to_json(const Certification& cert);
json to_json(const TailFit& fit);
json to_json(const RateFit& fit);
json to_json(const ExtinctionMetrics& m);

/// Two-space indented JSON with a trailing newline.
std::string dump(const json& j);

}  // namespace selfsim::io
