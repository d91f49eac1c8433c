#pragma once

#include "collapse/blowup_diagnostics.hpp"
#include "collapse/evolution2d.hpp"
#include "collapse/meanfield_stationary.hpp"
#include "collapse/radial_core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace collapse {

/// Every schema violation found in a config, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

enum class RunMode { evolve2d, radial, meanfield, diagnose };
std::string to_string(RunMode m);

struct DomainSpec {
  DomainKind kind = DomainKind::disk;
  /// disk: centred at the origin
  double radius = 1.0;
  /// rectangle: [origin, origin + (lx, ly)]
  Point origin = Point::Zero();
  double lx = 1.0;
  double ly = 1.0;
};

struct GridSpec {
  /// radial intervals, or cells per direction on a disk
  int n = 0;
  /// rectangle cells
  int nx = 0;
  int ny = 0;
  /// radial only
  double grading = 1.0;
};

struct InitialSpec {
  enum class Kind { uniform, gaussian, meanfield, file };
  Kind kind = Kind::gaussian;
  double mass = 0;
  double width = 0;
  Point center = Point::Zero();
  double lambda = 0;
  std::string path;
  /// u ← u·(1 + a·ξ), ξ uniform on [−1,1] per cell from the seed, then renormalised.
  double perturbation = 0;
};

struct ProbeSpec {
  TestFunction::Kind kind = TestFunction::Kind::constant;
  double value = 1;
  Point center = Point::Zero();
  double radius = 0;
  double amplitude = 1;
  std::vector<TestFunction::Monomial> terms;

  TestFunction build() const;
};

struct DiagnosticsSpec {
  std::vector<double> ladder{1, 2, 4, 8, 16};
  double epsilon = 0.5;
  double epsilon0 = 1.0;
  double sigma0 = 0.25;
  double b_window = 16;
  /// final window growth for the blowup-time fit
  double growth = 1.5;
  int eps_balls = 20;
};

struct OutputSpec {
  /// Empty: the config file stem. Relative paths resolve against the output root.
  std::string directory;
  long snapshot_every = 0;
  double snapshot_growth = 0;
  long trace_every = 1;
};

struct MeanfieldSpec {
  bool radial = true;
  double lambda_start = 0;
  double lambda_end = 0;
  int steps = 0;
  double tolerance = 1e-10;
};

struct RunConfig {
  RunMode mode = RunMode::radial;
  DomainSpec domain;
  GridSpec grid;
  InitialSpec initial;
  StepControl step;
  Evolver2d::Scheme scheme = Evolver2d::Scheme::explicit_euler;
  std::vector<ProbeSpec> probes;
  DiagnosticsSpec diagnostics;
  OutputSpec output;
  MeanfieldSpec meanfield;
  /// diagnose: the run directory to post-process
  std::string input;
  std::uint64_t seed = 0;
  /// the config as read, echoed into the manifest
  std::string echo;
};

/// Strict JSON schema: unknown keys, wrong types, nonpositive physical
/// parameters and missing mode-required keys are all collected into one ConfigError.
RunConfig parse_config(std::string_view text);

// --------------------------------------------------------------------------
// Files

/// Write-temp-then-rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Snapshot CSVs with a '#' header that pins the grid. Readers rebuild the
/// grid and throw PreconditionError on any mismatch.
std::string snapshot_csv(const SimState& state);
std::string snapshot_csv(const RadialMassProfile& profile);
SimState read_cartesian_snapshot(std::string_view text);
RadialMassProfile read_radial_snapshot(std::string_view text);

struct ManifestEntry {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  std::string config;
  std::string code_version;
  std::string started;
  std::string finished;
  std::string mode;
  std::string halt_reason;
  std::string error;
  std::vector<ManifestEntry> files;
};

/// Lists every regular file under dir (except manifest.json) and writes manifest.json.
RunManifest write_manifest(const std::filesystem::path& dir, RunManifest manifest);
RunManifest read_manifest(const std::filesystem::path& dir);
/// Missing, unlisted or altered files; empty when the directory matches.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

std::string collapse_estimate_json(const BlowupVerdict& verdict, const std::optional<CollapseEstimate>& estimate,
                                   const std::optional<Point>& blowup_point, const std::string& halt_reason);
std::string bubbles_json(const BubbleSet& set, double t, double T_est);

struct PlotOptions {
  std::string x = "t";
  std::string y;
  bool log_y = false;
  int width = 640;
  int height = 400;
};

/// A line plot of one TraceTable column against another.
std::string plot_svg(const TraceTable& table, const PlotOptions& options);

// --------------------------------------------------------------------------
// Driver

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

/// Name of the environment variable that overrides the output root.
inline constexpr const char* kOutputRootVariable = "COLLAPSE_LAB_OUTPUT_ROOT";

/// Subcommands run, diagnose, meanfield, plot, validate. Returns the exit code:
/// 0 success, 1 config or usage error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace collapse
