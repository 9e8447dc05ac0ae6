#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace selfsim::cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("selfsim_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const { return (path_ / leaf).string(); }

 private:
  fs::path path_;
};

// The reference profile is found once and shared.
const fs::path& reference_dir() {
  static TempDir dir("ref");
  static const bool done = [] {
    const Result r = run({"find", "--N", "1", "--p", "1.2", "--q", "0.5", "--out", dir.str()});
    EXPECT_EQ(r.code, kSuccess) << r.err;
    return true;
  }();
  (void)done;
  return dir.path();
}

}  // namespace

TEST(Cli, ConstantsPrintsJson) {
  const Result r = run({"constants", "--N", "1", "--p", "1.2", "--q", "0.5"});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["mu"].get<double>(), 7.0 / 3.0, 1e-14);
  EXPECT_NEAR(j["Kstar"].get<double>(), 0.1109309, 1e-7);
}

TEST(Cli, QstarReference) {
  const Result r = run({"qstar", "--N", "1", "--p", "1.2"});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  EXPECT_NEAR(json::parse(r.out)["qstar"].get<double>(), 0.46667, 1e-5);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"constants", "--N", "two"}).code, kUsage);
  EXPECT_EQ(run({"no-such-command"}).code, kUsage);
  EXPECT_EQ(run({"classify"}).code, kUsage);

  const Result range = run({"constants", "--N", "1", "--p", "2.5", "--q", "0.5"});
  EXPECT_EQ(range.code, kRangeViolation);
  EXPECT_FALSE(json::parse(range.out)["ok"].get<bool>());
  EXPECT_EQ(run({"qstar", "--N", "1", "--p", "0.9"}).code, kRangeViolation);

  TempDir dir("blowup");
  const Result blow = run({"phase", "--N", "1", "--p", "1.2", "--q", "0.5", "--x0=-1,0,0.6666666666666666",
                           "--eta1", "50", "--out", dir.str()});
  EXPECT_EQ(blow.code, kAlgorithmFailure) << blow.err;
  EXPECT_TRUE(json::parse(blow.out)["blew_up"].get<bool>());
}

TEST(Cli, HelpIsSuccess) { EXPECT_EQ(run({"--help"}).code, kSuccess); }

TEST(Cli, MissingProfileIsUsageError) {
  EXPECT_EQ(run({"tail", "--profile", "/nonexistent/profile.csv"}).code, kUsage);
}

TEST(RunConfig, ParseAndRoundTrip) {
  const RunConfig cfg = parse_run_config("# experiment\nN = 2\np=1.5\n\nq = 0.6  # absorption\nrmax=1e7\nout=results\n");
  EXPECT_EQ(cfg.params.N, 2);
  EXPECT_EQ(cfg.params.p, 1.5);
  EXPECT_EQ(cfg.params.q, 0.6);
  EXPECT_EQ(cfg.tolerances.at("rmax"), 1e7);
  EXPECT_EQ(cfg.output_dir, "results");

  const RunConfig back = parse_run_config(to_text(cfg));
  EXPECT_EQ(back.params.N, cfg.params.N);
  EXPECT_EQ(back.params.p, cfg.params.p);
  EXPECT_EQ(back.params.q, cfg.params.q);
  EXPECT_EQ(back.tolerances, cfg.tolerances);
  EXPECT_EQ(back.output_dir, cfg.output_dir);
}

TEST(RunConfig, RejectsBadLines) {
  EXPECT_THROW(parse_run_config("N\n"), ConfigError);
  EXPECT_THROW(parse_run_config("p = abc\n"), ConfigError);
  EXPECT_THROW(parse_run_config("tol = -1\n"), ConfigError);
}

TEST(RunConfig, FlagsOverrideConfig) {
  TempDir dir("config");
  {
    std::ofstream f(dir.path() / "run.cfg");
    f << "N = 2\np = 1.5\nq = 0.6\n";
  }
  const Result from_cfg = run({"constants", "--config", dir.str("run.cfg")});
  ASSERT_EQ(from_cfg.code, kSuccess) << from_cfg.err;
  EXPECT_EQ(json::parse(from_cfg.out)["N"], 2);

  const Result overridden = run({"constants", "--config", dir.str("run.cfg"), "--q", "0.55"});
  ASSERT_EQ(overridden.code, kSuccess) << overridden.err;
  const json j = json::parse(overridden.out);
  EXPECT_EQ(j["N"], 2);
  EXPECT_EQ(j["q"].get<double>(), 0.55);

  EXPECT_EQ(run({"constants", "--config", dir.str("missing.cfg")}).code, kUsage);
}

TEST(Cli, FindWritesArtifactsDeterministically) {
  const fs::path& ref = reference_dir();
  for (const char* leaf : {"profile.csv", "certify.json", "tailfit.json"}) {
    EXPECT_TRUE(fs::exists(ref / leaf)) << leaf;
  }
  const json cert = json::parse(slurp(ref / "certify.json"));
  EXPECT_TRUE(cert["passed"].get<bool>());
  EXPECT_EQ(cert["r_max"].get<double>(), 1e5);
  const json fit = json::parse(slurp(ref / "tailfit.json"));
  EXPECT_NEAR(fit["theta_est"].get<double>(), 1.0, 0.05);

  TempDir again("rerun");
  const Result r = run({"find", "--N", "1", "--p", "1.2", "--q", "0.5", "--out", again.str()});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  for (const char* leaf : {"profile.csv", "certify.json", "tailfit.json"}) {
    EXPECT_EQ(slurp(ref / leaf), slurp(again.path() / leaf)) << leaf;
  }
}

TEST(Cli, TailReadsParamsFromProfile) {
  const Result r = run({"tail", "--profile", (reference_dir() / "profile.csv").string()});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j["certification"]["passed"].get<bool>());
  EXPECT_LE(j["w_residual"].get<double>(), 1e-6);
}

TEST(Cli, PhaseFromProfile) {
  TempDir dir("phase");
  const Result r = run({"phase", "--from-profile", (reference_dir() / "profile.csv").string(),
                        "--out", dir.str()});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  EXPECT_TRUE(fs::exists(dir.path() / "phase.csv"));
  const json rates = json::parse(slurp(dir.path() / "rates.json"));
  EXPECT_NEAR(rates["lambda2_est"].get<double>(), -2.0 / 3.0, 0.02 * 2.0 / 3.0);
}

TEST(Cli, PhaseNeedsExactlyOneSource) {
  EXPECT_EQ(run({"phase", "--N", "1", "--p", "1.2", "--q", "0.5"}).code, kUsage);
}

TEST(Cli, PdeCoarseRun) {
  TempDir dir("pde");
  const Result r = run({"pde", "--profile", (reference_dir() / "profile.csv").string(), "--M", "100",
                        "--dt-rel", "2e-3", "--out", dir.str()});
  ASSERT_EQ(r.code, kSuccess) << r.err;
  const json m = json::parse(slurp(dir.path() / "metrics.json"));
  EXPECT_EQ(m["grid"]["M"], 100);
  EXPECT_EQ(m["scheme"], "implicit");
  EXPECT_TRUE(fs::exists(dir.path() / "snapshot_00.csv"));
  EXPECT_NEAR(m["alpha_est"].get<double>(), 3.5, 0.5);
}

TEST(Cli, PdeRejectsBadTimes) {
  EXPECT_EQ(run({"pde", "--profile", (reference_dir() / "profile.csv").string(), "--tend", "2"}).code,
            kUsage);
}
