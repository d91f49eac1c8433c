#include "collapse/cli_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <random>
#include <sstream>

#ifndef COLLAPSE_VERSION
#define COLLAPSE_VERSION "unknown"
#endif

namespace collapse {

namespace fs = std::filesystem;

namespace {

// bad arguments, unreadable inputs, occupied output directories
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path under_root(const fs::path& p) {
  if (p.is_absolute()) return p;
  const char* root = std::getenv(kOutputRootVariable);
  return root && *root ? fs::path(root) / p : p;
}

void prepare(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw UsageError("output directory " + dir.string() + " is not empty (pass --force to replace it)");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

std::string label(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

std::string numbered(const std::string& prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", k);
  return "snapshots/" + prefix + "_" + buf + ".csv";
}

// One output directory: files go in through put(), the manifest goes last.
class Job {
 public:
  Job(fs::path dir, const std::string& mode, const std::string& config) : dir_(std::move(dir)) {
    manifest_.code_version = COLLAPSE_VERSION;
    manifest_.mode = mode;
    manifest_.config = config;
    manifest_.started = now_utc();
  }
  const fs::path& dir() const { return dir_; }
  void put(const std::string& name, std::string_view content) const { write_atomic(dir_ / name, content); }
  int finish(const std::string& halt, const std::string& error, int code) {
    manifest_.finished = now_utc();
    manifest_.halt_reason = halt;
    manifest_.error = error;
    write_manifest(dir_, manifest_);
    return code;
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

// --------------------------------------------------------------------------
// Initial data

RadialGridPtr radial_grid(const RunConfig& c) {
  return std::make_shared<RadialGrid>(make_radial_grid(c.domain.radius, c.grid.n, c.grid.grading));
}

GridPtr cartesian_grid(const RunConfig& c) {
  if (c.domain.kind == DomainKind::disk) return std::make_shared<CartesianGrid>(make_disk_grid(c.domain.radius, c.grid.n));
  return std::make_shared<CartesianGrid>(DomainKind::rectangle, c.domain.origin, c.domain.lx, c.domain.ly, c.grid.nx,
                                         c.grid.ny);
}

RadialMassProfile radial_initial(const RunConfig& c, const fs::path& base) {
  const auto& in = c.initial;
  if (in.kind == InitialSpec::Kind::file) return read_radial_snapshot(read_file(base / in.path));
  const auto grid = radial_grid(c);
  switch (in.kind) {
    case InitialSpec::Kind::gaussian: return gaussian_mass_profile(grid, in.mass, in.width);
    case InitialSpec::Kind::uniform: {
      RadialMassProfile p{grid, Eigen::ArrayXd(grid->nodes().size()), 0.0};
      const double R = grid->radius();
      for (Eigen::Index k = 0; k < p.m.size(); ++k) p.m[k] = in.mass * std::pow(grid->node(int(k)) / R, 2);
      return p;
    }
    default: return mass_profile(to_density(solve_meanfield(grid, in.lambda)));
  }
}

CartesianField cartesian_initial(const RunConfig& c, const fs::path& base) {
  const auto& in = c.initial;
  if (in.kind == InitialSpec::Kind::file) return read_cartesian_snapshot(read_file(base / in.path)).u;
  const auto grid = cartesian_grid(c);
  CartesianField u;
  switch (in.kind) {
    case InitialSpec::Kind::gaussian:
      u = sample(grid, [&](const Point& x) { return std::exp(-(x - in.center).squaredNorm() / (in.width * in.width)); });
      break;
    case InitialSpec::Kind::uniform: u = sample(grid, [](const Point&) { return 1.0; }); break;
    default: return to_density(solve_meanfield(grid, in.lambda));
  }
  const double total = integrate(u);
  require(total > 0, "initial data: the gaussian has no mass on the grid (centre too far out?)");
  u.values *= in.mass / total;
  if (in.perturbation > 0) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> xi(-1.0, 1.0);
    for (auto k : grid->active_cells()) u.values[k] *= 1 + in.perturbation * xi(rng);
    u.values *= in.mass / integrate(u);
  }
  return u;
}

// --------------------------------------------------------------------------
// Runs

int run_radial_job(const RunConfig& c, Job& job, const fs::path& base, std::ostream& out, std::ostream& err) {
  const auto p0 = radial_initial(c, base);
  RadialRunOptions o;
  o.control = c.step;
  o.sample_every = c.output.trace_every;
  o.snapshot_growth = c.output.snapshot_growth;
  o.trace_free_energy = true;
  RadialRun run;
  try {
    run = run_radial(p0, o);
  } catch (const RadialRunFailure& e) {
    job.put("failure.csv", snapshot_csv(e.last_good()));
    err << "numerical failure: " << e.what() << "\n";
    return job.finish("numerical_failure", e.what(), kExitNumerical);
  }

  TraceTable trace({"t", "dt", "mass", "free_energy", "max_u"});
  for (const auto& s : run.samples) trace.add_row({s.t, s.dt, s.mass, s.free_energy, s.sup_u});
  job.put("trace.csv", trace.to_csv());
  for (std::size_t k = 0; k < run.snapshots.size(); ++k) job.put(numbered("radial", k), snapshot_csv(run.snapshots[k]));
  job.put("final.csv", snapshot_csv(run.final));

  const auto verdict = blowup_verdict(run.samples, c.diagnostics.growth);
  std::optional<CollapseEstimate> estimate;
  if (verdict.blowup && verdict.fit.T_est > run.final.time)
    estimate = extract_collapse_mass(run.final, verdict.fit.T_est, c.diagnostics.ladder);
  job.put("collapse_estimate.json",
          collapse_estimate_json(verdict, estimate, estimate ? std::optional<Point>(Point::Zero()) : std::nullopt,
                                 to_string(run.halt)));
  out << "radial run: " << run.steps << " steps, halt " << to_string(run.halt) << " at t = " << run.final.time
      << ", sup u = " << run.samples.back().sup_u << "\n";
  if (estimate)
    out << "collapse mass " << estimate->extrapolated_collapse_mass << " = "
        << estimate->extrapolated_collapse_mass / kCollapseMass << "·8π (T ≈ " << estimate->T_est << ")\n";
  return job.finish(to_string(run.halt), "", kExitOk);
}

int run_cartesian_job(const RunConfig& c, Job& job, const fs::path& base, std::ostream& out,
                      std::ostream& err) {
  const auto u0 = cartesian_initial(c, base);
  RunOptions o;
  o.control = c.step;
  o.snapshot_every = c.output.snapshot_every;
  o.trace_every = c.output.trace_every;
  o.evolver.scheme = c.scheme;
  std::vector<TestFunction> probes;
  for (const auto& p : c.probes) probes.push_back(p.build());
  Trajectory traj;
  try {
    traj = run(u0, o, probes);
  } catch (const RunFailure& e) {
    job.put("failure.csv", snapshot_csv(e.last_good()));
    err << "numerical failure: " << e.what() << "\n";
    return job.finish("numerical_failure", e.what(), kExitNumerical);
  }

  job.put("trace.csv", traj.traces.to_csv());
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k)
    job.put(numbered("cartesian", k), snapshot_csv(traj.snapshots[k]));
  job.put("final.csv", snapshot_csv(traj.final));

  const auto verdict = blowup_verdict(traj.traces, c.diagnostics.growth);
  std::optional<CollapseEstimate> estimate;
  std::optional<Point> x0;
  if (verdict.blowup && verdict.fit.T_est > traj.final.t) {
    auto u = traj.final.u;
    u.time = traj.final.t;
    x0 = blowup_point(u);
    estimate = extract_collapse_mass(u, *x0, verdict.fit.T_est, c.diagnostics.ladder);
  }
  job.put("collapse_estimate.json", collapse_estimate_json(verdict, estimate, x0, to_string(traj.halt)));
  out << "2D run: " << traj.final.step_count << " steps, halt " << to_string(traj.halt) << " at t = " << traj.final.t
      << ", max u = " << max_value(traj.final.u) << "\n";
  if (estimate)
    out << "collapse mass " << estimate->extrapolated_collapse_mass << " = "
        << estimate->extrapolated_collapse_mass / kCollapseMass << "·8π near (" << x0->x() << ", " << x0->y() << ")\n";
  return job.finish(to_string(traj.halt), "", kExitOk);
}

template <typename Grid>
int branch_job(const RunConfig& c, const Grid& grid, Job& job, std::ostream& out) {
  const auto& m = c.meanfield;
  BranchOptions bo;
  bo.newton.tolerance = m.tolerance;
  const auto branch = continue_branch(grid, m.lambda_start, m.lambda_end, m.steps, bo);
  job.put("branch.csv", branch_table(branch).to_csv());
  const auto& last = branch.states.back();
  if constexpr (std::is_same_v<Grid, RadialGridPtr>) {
    // the snapshot quadrature differs from the solver's at O(h^4); pin m(R) to λ
    auto profile = mass_profile(to_density(last));
    profile.m *= last.lambda / profile.mass();
    profile.m[profile.m.size() - 1] = last.lambda;
    job.put("final.csv", snapshot_csv(profile));
  } else {
    job.put("final.csv", snapshot_csv(SimState{to_density(last), last.v, 0.0, 0}));
  }
  out << "mean-field branch: " << branch.states.size() << " states, λ = " << branch.states.front().lambda << " → "
      << last.lambda << ", residual " << last.newton_residual << "\n";
  if (!branch.completed) {
    out << "branch stalled: " << branch.report << "\n";
    return job.finish("stalled", branch.report, kExitNumerical);
  }
  return job.finish(last.lambda == m.lambda_end ? "completed" : "step_budget", "", kExitOk);
}

int meanfield_job(const RunConfig& c, Job& job, std::ostream& out) {
  if (c.meanfield.radial) return branch_job(c, radial_grid(c), job, out);
  return branch_job(c, cartesian_grid(c), job, out);
}

// --------------------------------------------------------------------------
// Diagnose

std::vector<fs::path> snapshot_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir / "snapshots"))
    for (const auto& e : fs::directory_iterator(dir / "snapshots"))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

void ladder_tables(const DiagnosticsSpec& d, Job& job, const std::vector<double>& times, double T,
                   const std::function<double(std::size_t, double)>& mass,
                   const std::function<double(std::size_t, double)>& moment) {
  std::vector<std::string> mcols{"t", "envelope_radius"}, icols{"t", "s"};
  for (double b : d.ladder) {
    mcols.push_back("mass_b" + label(b));
    icols.push_back("I_b" + label(b));
  }
  TraceTable envelope(mcols), moments(icols);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] < T)) continue;
    std::vector<double> mrow{times[k], std::sqrt(T - times[k])}, irow{times[k], -std::log(T - times[k])};
    for (double b : d.ladder) {
      mrow.push_back(mass(k, b));
      irow.push_back(moment(k, b));
    }
    envelope.add_row(mrow);
    moments.add_row(irow);
  }
  job.put("envelope.csv", envelope.to_csv());
  job.put("moments.csv", moments.to_csv());
}

int diagnose_job(const fs::path& input, const RunConfig& c, Job& job, std::ostream& out) {
  const auto manifest = read_manifest(input);
  const auto& d = c.diagnostics;
  std::istringstream trace_text(read_file(input / "trace.csv"));
  const auto trace = TraceTable::read_csv(trace_text);
  const auto verdict = blowup_verdict(trace, d.growth);
  const double T = verdict.fit.T_est;
  const BubbleOptions bopt{d.epsilon, d.epsilon0, 16};

  if (manifest.mode == "radial") {
    std::vector<RadialMassProfile> profiles;
    for (const auto& f : snapshot_files(input)) profiles.push_back(read_radial_snapshot(read_file(f)));
    const auto final = read_radial_snapshot(read_file(input / "final.csv"));
    if (profiles.empty() || profiles.back().time < final.time) profiles.push_back(final);
    std::optional<CollapseEstimate> estimate;
    if (verdict.blowup && T > final.time) {
      estimate = extract_collapse_mass(final, T, d.ladder);
      std::vector<double> times;
      for (const auto& p : profiles) times.push_back(p.time);
      const double window = d.ladder.back();
      ladder_tables(d, job, times, T,
                    [&](std::size_t k, double b) { return backward_rescale(profiles[k], T, window).mass(b); },
                    [&](std::size_t k, double b) {
                      return rescaled_second_moment(backward_rescale(profiles[k], T, window), b);
                    });
      const auto set = detect_bubbles(backward_rescale(final, T, d.b_window), bopt);
      job.put("bubbles.json", bubbles_json(set, final.time, T));
      out << "bubbles at t = " << final.time << ": " << set.count() << " (" << set.stop_reason << ")\n";
    }
    job.put("collapse_estimate.json",
            collapse_estimate_json(verdict, estimate, estimate ? std::optional<Point>(Point::Zero()) : std::nullopt,
                                   manifest.halt_reason));
  } else if (manifest.mode == "evolve2d") {
    std::vector<SimState> states;
    for (const auto& f : snapshot_files(input)) states.push_back(read_cartesian_snapshot(read_file(f)));
    const auto final = read_cartesian_snapshot(read_file(input / "final.csv"));
    if (states.empty() || states.back().t < final.t) states.push_back(final);
    for (auto& s : states) s.u.time = s.t;
    std::optional<CollapseEstimate> estimate;
    std::optional<Point> x0;
    if (verdict.blowup && T > final.t) {
      x0 = blowup_point(states.back().u);
      estimate = extract_collapse_mass(states.back().u, *x0, T, d.ladder);
      std::vector<double> times;
      for (const auto& s : states) times.push_back(s.t);
      const double window = d.ladder.back();
      ladder_tables(
          d, job, times, T, [&](std::size_t k, double b) { return local_mass(states[k].u, *x0, b * std::sqrt(T - times[k])); },
          [&](std::size_t k, double b) {
            return rescaled_second_moment(backward_rescale(states[k].u, *x0, T, window), b);
          });
      const auto set = detect_bubbles(backward_rescale(states.back().u, *x0, T, d.b_window), bopt);
      job.put("bubbles.json", bubbles_json(set, final.t, T));
      out << "bubbles at t = " << final.t << ": " << set.count() << " (" << set.stop_reason << ")\n";
    }
    job.put("collapse_estimate.json", collapse_estimate_json(verdict, estimate, x0, manifest.halt_reason));

    // ε-regularity on random balls whose parabolic window fits inside the run
    const auto& grid = *states.front().u.grid;
    const double size = std::min(grid.lx(), grid.ly());
    const double r_min = 4 * std::max(grid.hx(), grid.hy()), r_max = 0.25 * size;
    const double t_min = states.front().t + d.sigma0 * r_max * r_max, t_max = states.back().t - d.sigma0 * r_max * r_max;
    TraceTable eps({"x", "y", "radius", "t0", "premise_mass", "premise", "scaled_sup", "inconclusive", "snapshots_used"});
    if (d.eps_balls > 0 && r_max > r_min && t_max > t_min && states.size() >= 3) {
      int kept = 0;
      for (const auto& ball : random_balls(grid, std::size_t(50) * d.eps_balls, c.seed, r_min, r_max, t_min, t_max)) {
        const auto r = check_eps_regularity(states, ball, d.epsilon0, d.sigma0);
        if (!r.premise || r.inconclusive) continue;
        eps.add_row({ball.center.x(), ball.center.y(), ball.radius, ball.t0, r.premise_mass, 1.0, r.scaled_sup, 0.0,
                     double(r.snapshots_used)});
        if (++kept == d.eps_balls) break;
      }
    }
    job.put("eps_regularity.csv", eps.to_csv());
    out << "ε-regularity: " << eps.rows() << " premise-true balls checked\n";
  } else {
    throw UsageError("cannot diagnose a " + manifest.mode + " run (only radial and evolve2d)");
  }
  out << "blowup " << (verdict.blowup ? "yes" : "no");
  if (verdict.blowup) out << ", T ≈ " << T;
  out << "\n";
  return job.finish("diagnosed", "", kExitOk);
}

// --------------------------------------------------------------------------

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return parse_config(text);
}

int execute(const RunConfig& c, const fs::path& config_path, const std::string& output_flag, bool force,
            std::ostream& out, std::ostream& err) {
  fs::path dir;
  if (!output_flag.empty()) dir = under_root(output_flag);
  else if (c.mode == RunMode::diagnose && c.output.directory.empty())
    dir = under_root(c.input + "-diagnostics");
  else
    dir = under_root(c.output.directory.empty() ? config_path.stem().string() : c.output.directory);
  if (c.mode == RunMode::diagnose) {
    const auto problems = verify_manifest(under_root(c.input));
    if (!problems.empty()) {
      std::string all;
      for (const auto& p : problems) all += "\n  " + p;
      throw UsageError("run directory " + under_root(c.input).string() + " does not match its manifest:" + all);
    }
  }
  prepare(dir, force);
  Job job(dir, to_string(c.mode), c.echo);
  out << to_string(c.mode) << " → " << dir.string() << "\n";
  const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  try {
    switch (c.mode) {
      case RunMode::radial: return run_radial_job(c, job, base, out, err);
      case RunMode::evolve2d: return run_cartesian_job(c, job, base, out, err);
      case RunMode::meanfield: return meanfield_job(c, job, out);
      case RunMode::diagnose: return diagnose_job(under_root(c.input), c, job, out);
    }
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    job.put("error.txt", std::string(e.what()) + "\n");
    return job.finish("numerical_failure", e.what(), kExitNumerical);
  }
  return kExitOk;
}

int meanfield_summary(double lambda, int n, double radius, std::ostream& out) {
  const auto grid = std::make_shared<RadialGrid>(make_radial_grid(radius, n, 1.0));
  const auto s = solve_meanfield(grid, lambda);
  const double u0 = to_density(s).values[0];
  out << "{\"lambda\": " << format_number(lambda) << ", \"intervals\": " << n << ", \"v0\": " << format_number(s.v.values[0])
      << ", \"u0\": " << format_number(u0) << ", \"residual\": " << format_number(s.newton_residual)
      << ", \"iterations\": " << s.iterations;
  if (radius == 1.0) out << ", \"closed_form_v0\": " << format_number(closed_form_potential(lambda, 0.0));
  out << "}\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"collapse-lab: collapse experiments for the 2D Smoluchowski–Poisson system", "collapse-lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", COLLAPSE_VERSION);

  std::string config, output, input, trace_path, diag_config;
  std::vector<std::string> configs;
  bool force = false;
  PlotOptions plot;
  double lambda = 0, radius = 1;
  int n = 1024;

  auto* run = app.add_subcommand("run", "run a config and write its artifacts and manifest");
  run->add_option("config", config, "config JSON")->required();
  run->add_option("-o,--output", output, "output directory (overrides the config)");
  run->add_flag("-f,--force", force, "replace a non-empty output directory");

  auto* diagnose = app.add_subcommand("diagnose", "post-process a run directory: envelope, bubbles, ε-regularity");
  diagnose->add_option("run_dir", input, "run directory with manifest.json")->required();
  diagnose->add_option("-c,--config", diag_config, "diagnose config (mode diagnose) for the diagnostics settings");
  diagnose->add_option("-o,--output", output, "output directory (default <run_dir>-diagnostics)");
  diagnose->add_flag("-f,--force", force, "replace a non-empty output directory");

  auto* meanfield = app.add_subcommand("meanfield", "mean-field branch from a config, or one radial solve");
  meanfield->add_option("config", config, "config JSON with mode meanfield");
  meanfield->add_option("--lambda", lambda, "solve once at this λ on a uniform radial grid and print a summary");
  meanfield->add_option("--n", n, "radial intervals for --lambda")->check(CLI::Range(8, 1000000));
  meanfield->add_option("--radius", radius, "disk radius for --lambda")->check(CLI::PositiveNumber);
  meanfield->add_option("-o,--output", output, "output directory (overrides the config)");
  meanfield->add_flag("-f,--force", force, "replace a non-empty output directory");

  auto* plotter = app.add_subcommand("plot", "SVG line plot of one trace column");
  plotter->add_option("trace", trace_path, "trace CSV")->required();
  plotter->add_option("--y", plot.y, "column to plot")->required();
  plotter->add_option("--x", plot.x, "abscissa column")->capture_default_str();
  plotter->add_flag("--log-y", plot.log_y, "log10 scale on y");
  plotter->add_option("-o,--output", output, "SVG file (default: standard output)");

  auto* validate = app.add_subcommand("validate", "check configs without running them");
  validate->add_option("configs", configs, "config JSON files")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate) {
      int code = kExitOk;
      for (const auto& path : configs) {
        try {
          const auto c = load_config(path);
          out << path << ": ok (" << to_string(c.mode) << ")\n";
        } catch (const ConfigError& e) {
          for (const auto& v : e.violations()) err << path << ": " << v << "\n";
          code = kExitConfig;
        } catch (const UsageError& e) {
          err << path << ": " << e.what() << "\n";
          code = kExitConfig;
        }
      }
      return code;
    }
    if (*run) return execute(load_config(config), config, output, force, out, err);
    if (*meanfield) {
      if (config.empty() == (lambda == 0)) throw UsageError("meanfield: give either a config or --lambda");
      if (lambda != 0) {
        if (!(lambda > 0 && lambda < kCollapseMass)) throw UsageError("meanfield: --lambda must lie in (0, 8π)");
        return meanfield_summary(lambda, n, radius, out);
      }
      const auto c = load_config(config);
      if (c.mode != RunMode::meanfield) throw UsageError("meanfield: config mode is " + to_string(c.mode));
      return execute(c, config, output, force, out, err);
    }
    if (*diagnose) {
      RunConfig c;
      if (!diag_config.empty()) {
        c = load_config(diag_config);
        if (c.mode != RunMode::diagnose) throw UsageError("diagnose: config mode is " + to_string(c.mode));
      } else {
        c.mode = RunMode::diagnose;
        c.echo = "{\"mode\": \"diagnose\"}";
      }
      c.input = fs::absolute(input).string();
      if (output.empty() && c.output.directory.empty()) output = c.input + "-diagnostics";
      return execute(c, diag_config.empty() ? fs::path(input) : fs::path(diag_config), output, force, out, err);
    }
    if (*plotter) {
      std::istringstream text(read_file(trace_path));
      const auto svg = plot_svg(TraceTable::read_csv(text), plot);
      if (output.empty()) out << svg;
      else write_atomic(output, svg);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    for (const auto& v : e.violations()) err << "config: " << v << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace collapse
