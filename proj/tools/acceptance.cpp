// Acceptance checks. Prints one PASS/FAIL line per criterion with the measured
// numbers; `--criterion N` runs a single one. Exit status 0 iff everything run passed.

#include "collapse/cli_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/numeric/odeint.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace collapse;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Shipped configs run through the command-line driver into a scratch root,
// each at most once per process and tag.
class Workspace {
 public:
  explicit Workspace(fs::path configs) : configs_(std::move(configs)) {
    root_ = fs::temp_directory_path() / ("collapse-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const fs::path& configs() const { return configs_; }

  struct Run {
    fs::path dir;
    double seconds = 0;
  };

  const Run& run(const std::string& name, const std::string& tag = "a") {
    const std::string key = name + "/" + tag;
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    const fs::path dir = root_ / tag / name;
    std::ostringstream out, err;
    const auto start = Clock::now();
    const int code = run_cli({"run", (configs_ / (name + ".json")).string(), "--output", dir.string()}, out, err);
    const double s = seconds_since(start);
    if (code != kExitOk) throw std::runtime_error(name + ": exit " + std::to_string(code) + ": " + err.str());
    return runs_[key] = Run{dir, s};
  }

  /// Configs that describe a time evolution.
  std::vector<std::string> evolution_configs() const {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(configs_)) {
      if (e.path().extension() != ".json") continue;
      const auto c = parse_config(read_file(e.path()));
      if (c.mode == RunMode::radial || c.mode == RunMode::evolve2d) names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  }

  std::vector<std::string> runnable_configs() const {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(configs_)) {
      if (e.path().extension() != ".json") continue;
      if (parse_config(read_file(e.path())).mode != RunMode::diagnose) names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  }

 private:
  fs::path configs_;
  fs::path root_;
  std::map<std::string, Run> runs_;
};

TraceTable read_trace(const fs::path& file) {
  std::istringstream in(read_file(file));
  return TraceTable::read_csv(in);
}

nlohmann::json read_json(const fs::path& file) { return nlohmann::json::parse(read_file(file)); }

GridPtr disk(int n) { return std::make_shared<CartesianGrid>(make_disk_grid(1, n)); }

CartesianField gaussian(const GridPtr& g, double mass, double width, const Point& c) {
  auto u = sample(g, [&](const Point& x) { return std::exp(-(x - c).squaredNorm() / (width * width)); });
  u.values *= mass / integrate(u);
  return u;
}

double sup_difference(const CartesianField& a, const CartesianField& b) {
  double d = 0;
  for (auto c : a.grid->active_cells()) d = std::max(d, std::abs(a.values[c] - b.values[c]));
  return d;
}

// --------------------------------------------------------------------------

Outcome collapse_quantization(Workspace& ws) {
  Outcome o{true, ""};
  for (const char* name : {"radial_supercritical_1.2", "radial_supercritical", "radial_supercritical_2.0"}) {
    const auto& r = ws.run(name);
    const auto c = parse_config(read_file(ws.configs() / (std::string(name) + ".json")));
    const auto e = read_json(r.dir / "collapse_estimate.json");
    if (e["extrapolated_collapse_mass"].is_null()) {
      o.pass = false;
      o.detail += fmt("λ=%.2f·8π no estimate; ", c.initial.mass / kCollapseMass);
      continue;
    }
    const double m = e["extrapolated_collapse_mass"].get<double>();
    double m8 = NAN, m16 = NAN;
    for (const auto& s : e["mass_at_scales"]) {
      if (s["b"].get<double>() == 8) m8 = s["mass"].get<double>();
      if (s["b"].get<double>() == 16) m16 = s["mass"].get<double>();
    }
    const double flat = std::abs(m16 - m8) / m16;
    const bool ok = std::abs(m / kCollapseMass - 1) <= 0.05 && flat <= 0.02 && r.seconds <= 60;
    o.pass = o.pass && ok;
    o.detail += fmt("λ=%.1f·8π m/8π=%.4f flat(8,16)=%.4f %.1fs; ", c.initial.mass / kCollapseMass,
                    m / kCollapseMass, flat, r.seconds);
  }
  return o;
}

Outcome subcritical_boundedness(Workspace& ws) {
  const auto& r = ws.run("radial_subcritical");
  const auto e = read_json(r.dir / "collapse_estimate.json");
  const auto sup = read_trace(r.dir / "trace.csv").column("max_u");
  const auto t = read_trace(r.dir / "trace.csv").column("t");
  const double ratio = sup.back() / sup.front();
  const bool blowup = e["blowup"].get<bool>();
  const std::string halt = e["halt_reason"];
  return {!blowup && halt == "horizon" && ratio <= 10,
          fmt("blowup=%s halt=%s t_end=%.3g sup final/initial=%.4f", blowup ? "yes" : "no", halt.c_str(),
              t.back(), ratio)};
}

Outcome conservation(Workspace&) {
  const GridPtr g = disk(128);
  RunOptions o;
  o.control.horizon = 1e3;
  o.control.max_steps = 10'000;
  o.trace_every = 100;
  o.trace_dissipation = false;
  const auto start = Clock::now();
  const auto tr = run(gaussian(g, 0.5 * kCollapseMass, 0.3, Point(0.1, 0)), o);
  const auto mass = tr.traces.column("mass");
  double drift = 0;
  for (double m : mass) drift = std::max(drift, std::abs(m - mass.front()) / mass.front());
  return {tr.final.step_count == 10'000 && drift <= 1e-10,
          fmt("%ld steps at 128², max relative mass drift %.2e (%.0fs)", tr.final.step_count, drift,
              seconds_since(start))};
}

Outcome free_energy_dissipation(Workspace& ws) {
  Outcome o{true, ""};
  for (const auto& name : ws.evolution_configs()) {
    const auto& r = ws.run(name);
    const auto trace = read_trace(r.dir / "trace.csv");
    // the grid scale where the mass sits: the finest radial interval, or the cell width
    const auto mode = parse_config(read_file(ws.configs() / (name + ".json"))).mode;
    const std::string final_text = read_file(r.dir / "final.csv");
    const double h = mode == RunMode::radial ? read_radial_snapshot(final_text).grid->spacing(0)
                                             : read_cartesian_snapshot(final_text).u.grid->h_min();
    const auto F = trace.column("free_energy"), sup = trace.column("max_u");
    std::size_t checked = 0, bad = 0;
    double worst = -INFINITY;
    for (std::size_t k = 0; k + 1 < F.size(); ++k) {
      if (sup[k] * h * h >= 1) break;
      const double excess = (F[k + 1] - F[k]) / (1 + std::abs(F[k]));
      worst = std::max(worst, excess);
      bad += excess > 1e-8;
      ++checked;
    }
    o.pass = o.pass && bad == 0 && checked > 0;
    o.detail += fmt("%s %zu/%zu ok (max rel. rise %.1e); ", name.c_str(), checked - bad, checked, worst);
  }
  return o;
}

Outcome poisson_order(Workspace&) {
  auto exact = [](const Point& x) { return std::sin(kPi * x.x()) * std::sin(kPi * x.y()); };
  std::vector<double> errors;
  for (int n : {64, 128, 256}) {
    const GridPtr g = std::make_shared<CartesianGrid>(make_cartesian_grid(1, 1, n, n));
    const auto v = solve_poisson_dirichlet(sample(g, [&](const Point& x) { return 2 * kPi * kPi * exact(x); }));
    double e = 0;
    for (auto c : g->active_cells()) e = std::max(e, std::abs(v.values[c] - exact(g->center(c))));
    errors.push_back(e);
  }
  const double r1 = errors[0] / errors[1], r2 = errors[1] / errors[2];
  return {r1 >= 3.5 && r2 >= 3.5,
          fmt("L∞ errors %.3e %.3e %.3e, ratios %.3f %.3f", errors[0], errors[1], errors[2], r1, r2)};
}

// −Δw = e^w from w(0) = c: returns w(1) and ∫_{r<1} e^w. By scaling, v = w − w(1)
// solves the mean-field problem with λ = ∫e^w and v(0) = c − w(1).
std::array<double, 2> shoot(double c) {
  using State = std::array<double, 3>;
  const double r0 = 1e-6, s = std::exp(c);
  State x{c - s * r0 * r0 / 4, -s * r0 / 2, kPi * s * r0 * r0};
  auto rhs = [](const State& y, State& dy, double r) {
    const double e = std::exp(y[0]);
    dy[0] = y[1];
    dy[1] = -y[1] / r - e;
    dy[2] = 2 * kPi * r * e;
  };
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-13, 1e-13), rhs, x, r0, 1.0,
                          1e-4);
  return {x[0], x[2]};
}

// v(0) on the minimal branch by bisection in c; λ(c) increases there.
double shooting_v0(double lambda) {
  double lo = -30, hi = 0;
  while (shoot(hi)[1] < lambda) hi += 1;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    (shoot(mid)[1] < lambda ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  return c - shoot(c)[0];
}

Outcome meanfield_oracle(Workspace&) {
  const auto g = std::make_shared<RadialGrid>(make_radial_grid(1, 1024, 1.0));
  Outcome o{true, ""};
  double start = 0.1;
  std::optional<RadialField> guess;
  for (double lambda : {2 * kPi, 4 * kPi, 6 * kPi}) {
    const auto b = continue_branch(g, start, lambda, 40, {}, guess ? &*guess : nullptr);
    if (!b.completed || b.states.back().lambda != lambda) {
      o.pass = false;
      o.detail += fmt("λ=%.0fπ branch incomplete; ", lambda / kPi);
      break;
    }
    const auto& s = b.states.back();
    double err = 0;
    for (int k = 0; k <= g->intervals(); ++k)
      err = std::max(err, std::abs(s.v.values[k] - closed_form_potential(lambda, g->node(k))));
    const double v0 = closed_form_potential(lambda, 0);
    const double shot = shooting_v0(lambda);
    const bool ok = err <= 1e-6 && std::abs(shot - v0) <= 1e-8 && std::abs(s.v.values[0] - shot) <= 1e-6;
    o.pass = o.pass && ok;
    o.detail += fmt("λ=%.0fπ sup err %.1e, v(0)=%.9f shooting %.9f closed form %.9f; ", lambda / kPi, err,
                    s.v.values[0], shot, v0);
    start = lambda;
    guess = s.v;
  }
  return o;
}

Outcome stationarity_loop(Workspace&) {
  const GridPtr g = disk(256);
  const auto start = Clock::now();
  const auto s = solve_meanfield(g, 4 * kPi);
  const auto u0 = to_density(s);
  RunOptions o;
  o.evolver.scheme = Evolver2d::Scheme::semi_implicit;
  o.control.horizon = 1.0;
  o.control.dt_max = 0.02;
  o.control.cfl_safety = 0.9;
  o.trace_every = 1'000'000;
  o.trace_dissipation = false;
  const auto tr = run(u0, o);
  const double change = sup_difference(tr.final.u, u0);
  return {tr.halt == HaltReason::horizon && tr.final.t >= 1.0 && change <= 1e-3,
          fmt("λ=4π at 256², t=%.3f after %ld semi-implicit steps, sup change %.2e of max %.3f (%.0fs)",
              tr.final.t, tr.final.step_count, change, max_value(u0), seconds_since(start))};
}

// Weak-form residual near t_star from three snapshots `stride` fixed steps apart.
// dt ∝ h², so the centred difference error falls faster than the spatial one.
std::vector<double> weak_residuals(int n, double t_star, const std::vector<TestFunction>& probes,
                                   const CartesianField& (*initial)(int)) {
  const GridPtr g = disk(n);
  const Evolver2d ev(g);
  const double dt = 1e-5 * (128.0 / n) * (128.0 / n);
  SimState st = ev.initial_state(initial(n));
  const int stride = 8;
  const long steps = std::lround(t_star / dt) - stride;
  for (long k = 0; k < steps; ++k) st = ev.step(st, dt);
  std::vector<CartesianField> window;
  for (int k = 0; k < 3; ++k) {
    window.push_back(st.u);
    window.back().time = st.t;
    for (int j = 0; j < stride; ++j) st = ev.step(st, dt);
  }
  const auto kernel = GreenKernel::for_grid(*g);
  std::vector<double> out;
  for (const auto& phi : probes) out.push_back(weak_form_residual(window, phi, kernel).at(0).residual);
  return out;
}

const CartesianField& subcritical_initial(int n) {
  static std::map<int, CartesianField> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gaussian(disk(n), 0.5 * kCollapseMass, 0.3, Point(0.1, 0))).first;
  return it->second;
}

Outcome weak_form(Workspace& ws) {
  const auto c = parse_config(read_file(ws.configs() / "disk_subcritical.json"));
  std::vector<TestFunction> probes;
  for (const auto& p : c.probes) probes.push_back(p.build());
  const auto start = Clock::now();
  const double t_star = 0.002;
  const auto coarse = weak_residuals(128, t_star, probes, subcritical_initial);
  const auto fine = weak_residuals(256, t_star, probes, subcritical_initial);
  Outcome o{true, ""};
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const bool constant = c.probes[k].kind == TestFunction::Kind::constant;
    const bool ok = constant ? coarse[k] <= 1e-12 && fine[k] <= 1e-12 : fine[k] <= coarse[k] / 3;
    o.pass = o.pass && ok;
    o.detail += constant ? fmt("φ≡1 residual %.1e/%.1e; ", coarse[k], fine[k])
                         : fmt("probe %zu residual 128² %.3e 256² %.3e (ratio %.2f); ", k, coarse[k], fine[k],
                               coarse[k] / fine[k]);
  }
  o.detail += fmt("t=%.3g, %.0fs", t_star, seconds_since(start));
  return o;
}

double profile(double mu, double rho2) { return 8 * mu / ((1 + mu * rho2) * (1 + mu * rho2)); }

Outcome bubble_decomposition(Workspace&) {
  const auto start = Clock::now();
  const auto g = std::make_shared<CartesianGrid>(DomainKind::rectangle, Point(-40, -20), 80, 40, 800, 400);
  const auto u = sample(g, [](const Point& y) {
    return profile(1.0, (y - Point(-20, 0)).squaredNorm()) + profile(1.0, (y - Point(20, 0)).squaredNorm());
  });
  const auto set = detect_bubbles(backward_rescale(u, Point::Zero(), 1.0, 1e9));
  const double s = seconds_since(start);
  bool ok = set.count() == 2 && set.exterior_sup <= 0.5 && s <= 5;
  std::string masses;
  for (const auto& b : set.bubbles) {
    ok = ok && std::abs(b.mass - kCollapseMass) <= 0.5;
    masses += fmt(" %.4f", b.mass);
  }
  return {ok, fmt("%zu bubbles, masses%s (8π=%.4f), exterior sup %.3g, %.2fs", set.count(), masses.c_str(),
                  kCollapseMass, set.exterior_sup, s)};
}

Outcome second_moment_trend(Workspace& ws) {
  const auto& r = ws.run("radial_12pi");
  const auto e = read_json(r.dir / "collapse_estimate.json");
  if (!e["blowup"].get<bool>() || e["fit"]["T_est"].is_null()) return {false, "no blowup verdict"};
  const double T = e["fit"]["T_est"].get<double>();
  std::vector<RadialMassProfile> snaps;
  for (const auto& f : fs::directory_iterator(r.dir / "snapshots")) snaps.push_back(read_radial_snapshot(read_file(f.path())));
  std::sort(snaps.begin(), snaps.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  const double last = T - snaps.back().time;
  std::vector<std::pair<double, double>> I;
  for (const auto& p : snaps)
    if (p.time < T && T - p.time <= 10 * last) I.emplace_back(T - p.time, rescaled_second_moment(backward_rescale(p, T, 16), 16));
  if (I.size() < 2) return {false, "fewer than two snapshots in the final decade"};
  const double ratio = I.back().second / I.front().second;
  return {ratio <= 0.2, fmt("I_16: %.4f at T−t=%.2e → %.4f at T−t=%.2e, ratio %.3f (%zu snapshots)",
                            I.front().second, I.front().first, I.back().second, I.back().first, ratio, I.size())};
}

Outcome eps_regularity(Workspace&) {
  auto smooth = [](int n) {
    RunOptions o;
    o.control.horizon = 0.1;
    o.trace_every = 1000;
    o.snapshot_every = 5 * (n / 32) * (n / 32);
    return run(gaussian(disk(n), 0.5 * kCollapseMass, 0.3, Point(0.1, 0)), o).snapshots;
  };
  const auto coarse = smooth(32), fine = smooth(64);
  std::vector<EpsBall> balls;
  for (const auto& b : random_balls(make_disk_grid(1, 32), 200, 11, 0.05, 0.3, 0.03, 0.07))
    if (balls.size() < 20 && check_eps_regularity(coarse, b).premise) balls.push_back(b);
  const auto sweep = eps_regularity_sweep(coarse, fine, balls);
  const double ratio = sweep.constant_fine / sweep.constant_coarse;
  return {balls.size() == 20 && sweep.violations == 0 && ratio <= 2 && ratio >= 0.5,
          fmt("%zu premise-true balls (%zu on both grids), constant 32² %.4f 64² %.4f (ratio %.3f), %zu violations",
              balls.size(), sweep.premise_true, sweep.constant_coarse, sweep.constant_fine, ratio,
              sweep.violations)};
}

Outcome determinism(Workspace& ws) {
  Outcome o{true, ""};
  std::size_t compared = 0;
  for (const auto& name : ws.runnable_configs()) {
    const auto& a = ws.run(name, "a");
    const auto& b = ws.run(name, "b");
    for (const auto& e : fs::recursive_directory_iterator(a.dir)) {
      if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
      const auto rel = fs::relative(e.path(), a.dir);
      ++compared;
      if (!fs::exists(b.dir / rel) || read_file(e.path()) != read_file(b.dir / rel)) {
        o.pass = false;
        o.detail += name + "/" + rel.string() + " differs; ";
      }
    }
  }
  o.detail += fmt("%zu configs run twice, %zu output files compared byte for byte", ws.runnable_configs().size(),
                  compared);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(Workspace&)> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "collapse mass quantization", collapse_quantization},
      {2, "subcritical boundedness", subcritical_boundedness},
      {3, "mass conservation", conservation},
      {4, "free-energy dissipation", free_energy_dissipation},
      {5, "Poisson order", poisson_order},
      {6, "mean-field oracle", meanfield_oracle},
      {7, "stationarity loop", stationarity_loop},
      {8, "weak-form residual", weak_form},
      {9, "bubble decomposition", bubble_decomposition},
      {10, "rescaled second moment trend", second_moment_trend},
      {11, "epsilon-regularity sweep", eps_regularity},
      {12, "determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collapse-lab acceptance checks"};
  std::vector<int> only;
  std::string configs = COLLAPSE_SOURCE_DIR "/configs";
  app.add_option("--criterion", only, "run only these criteria (1-12)")->check(CLI::Range(1, 12));
  app.add_option("--configs", configs, "directory of shipped configs")->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);

  Workspace ws(configs);
  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.check(ws);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
