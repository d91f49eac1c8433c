#include "doctest.h"

#include "collapse/cli_io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <regex>
#include <sstream>

#include <unistd.h>

using namespace collapse;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(COLLAPSE_SOURCE_DIR) / "configs";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("collapse-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Cli {
  int code;
  std::string out;
  std::string err;
};

Cli cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> violations(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

const char* kMinimalRadial =
    R"({"mode": "radial", "domain": {"radius": 1}, "grid": {"n": 256}, "initial": {"kind": "gaussian", "mass": 30, "width": 0.1}})";

}  // namespace

TEST_CASE("minimal radial config") {
  const auto c = parse_config(kMinimalRadial);
  CHECK(c.mode == RunMode::radial);
  CHECK(c.grid.n == 256);
  CHECK(c.grid.grading == 1.0);
  CHECK(c.initial.kind == InitialSpec::Kind::gaussian);
  CHECK(c.initial.mass == 30);
  CHECK(c.initial.width == 0.1);
  CHECK(c.domain.radius == 1);
  CHECK(c.diagnostics.ladder == std::vector<double>{1, 2, 4, 8, 16});
  CHECK(c.output.directory.empty());
}

TEST_CASE("negative mass names the field") {
  const auto v = violations(
      R"({"mode": "radial", "grid": {"n": 256}, "initial": {"kind": "gaussian", "mass": -1, "width": 0.1}})");
  REQUIRE(v.size() == 1);
  CHECK(v[0].rfind("initial.mass:", 0) == 0);
  CHECK(v[0].find("positive") != std::string::npos);
}

TEST_CASE("misspelt lambda gets a suggestion") {
  const auto v = violations(
      R"({"mode": "radial", "grid": {"n": 256}, "initial": {"kind": "gaussian", "lamda": 30, "width": 0.1}})");
  CHECK(mentions(v, "initial.lamda: unknown key"));
  CHECK(mentions(v, "λ/mass"));
  CHECK(mentions(v, "initial.mass: missing"));
  // near misses of real keys name the key
  CHECK(mentions(violations(R"({"mode": "radial", "grdi": {"n": 256}})"), "did you mean \"grid\""));
}

TEST_CASE("all violations are reported together") {
  const auto v = violations(R"({
    "mode": "evolve2d",
    "grid": {"n": 4},
    "initial": {"kind": "gaussian", "mass": 0, "width": "wide"},
    "step": {"cfl_safety": 2, "dt_min": -1},
    "output": {"snapshot_growth": 1.5},
    "colour": "blue"
  })");
  CHECK(v.size() == 7);
  for (const char* field : {"grid.n", "initial.mass", "initial.width", "step.cfl_safety", "step.dt_min",
                            "output.snapshot_growth", "colour"})
    CHECK_MESSAGE(mentions(v, std::string(field) + ":"), field);
}

TEST_CASE("mode requirements") {
  CHECK(mentions(violations(R"({"grid": {"n": 64}})"), "mode: missing"));
  CHECK(mentions(violations(R"({"mode": "sideways"})"), "mode: \"sideways\" is not one of"));
  CHECK(mentions(violations(R"({"mode": "radial"})"), "grid: missing"));
  CHECK(mentions(violations(R"({"mode": "radial"})"), "initial: missing"));
  CHECK(mentions(violations(R"({"mode": "meanfield", "grid": {"n": 64}})"), "meanfield: missing"));
  CHECK(mentions(violations(R"({"mode": "diagnose"})"), "input: missing"));
  // keys that exist but mean nothing in this mode are not silently ignored
  const auto v = violations(std::string(kMinimalRadial).insert(1, R"("probes": [], "scheme": "explicit", )"));
  CHECK(mentions(v, "probes: not used in radial mode"));
  CHECK(mentions(v, "scheme: not used in radial mode"));
  CHECK(mentions(violations(R"({"mode": "radial", "domain": {"kind": "rectangle", "lx": 1, "ly": 1},
                               "grid": {"n": 64}, "initial": {"kind": "uniform", "mass": 1}})"),
                 "domain.kind: must be disk"));
  CHECK(mentions(violations(R"({"mode": "radial", "grid": {"n": 64, "grading": 0.9},
                               "initial": {"kind": "meanfield", "lambda": 10}})"),
                 "uniform radial grid"));
  CHECK(mentions(violations(R"({"mode": "evolve2d", "grid": {"n": 64}, "initial": {"kind": "file", "path": "x.csv"}})"),
                 "grid: not allowed with file initial data"));
  CHECK(mentions(violations(R"({"mode": "meanfield", "grid": {"n": 64},
                               "meanfield": {"lambda_start": 1, "lambda_end": 30}})"),
                 "meanfield.lambda_end: must lie in (0, 8π)"));
}

TEST_CASE("types and syntax") {
  CHECK(mentions(violations("{not json"), "not valid JSON"));
  CHECK(mentions(violations("[1, 2]"), "must be an object"));
  CHECK(mentions(violations(R"({"mode": "radial", "grid": {"n": 64.5}, "initial": {"kind": "uniform", "mass": 1}})"),
                 "grid.n: must be an integer"));
  CHECK(mentions(violations(R"({"mode": "evolve2d", "grid": {"n": 64}, "initial": {"kind": "uniform", "mass": 1},
                               "probes": [{"kind": "bump", "center": [0], "radius": 0.5}]})"),
                 "probes[0].center"));
  CHECK(mentions(violations(R"({"mode": "radial", "grid": {"n": 64}, "initial": {"kind": "uniform", "mass": 1},
                               "diagnostics": {"ladder": [1, 4, 2]}})"),
                 "diagnostics.ladder"));
}

TEST_CASE("shipped configs validate") {
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".json") continue;
    ++count;
    CHECK_NOTHROW(parse_config(read_file(e.path())));
  }
  CHECK(count >= 8);
}

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("snapshots round-trip exactly") {
  SUBCASE("cartesian") {
    const auto g = std::make_shared<CartesianGrid>(make_disk_grid(1.3, 24));
    SimState s{sample(g, [](const Point& x) { return std::exp(x.x()) / 3 + 1e-310; }),
               sample(g, [](const Point& x) { return std::sin(7 * x.y()); }), 0.1 + 0.2, 17};
    const auto back = read_cartesian_snapshot(snapshot_csv(s));
    CHECK(back.u.grid->same_layout(*g));
    CHECK(back.t == s.t);
    CHECK(back.step_count == 17);
    CHECK((back.u.values == s.u.values).all());
    CHECK((back.v.values == s.v.values).all());
    CHECK(snapshot_csv(back) == snapshot_csv(s));
  }
  SUBCASE("rectangle") {
    const auto g = std::make_shared<CartesianGrid>(DomainKind::rectangle, Point(-0.5, 2), 1.5, 0.7, 12, 9);
    SimState s{sample(g, [](const Point& x) { return x.squaredNorm(); }), zero_field<double>(g), 2.0, 3};
    const auto back = read_cartesian_snapshot(snapshot_csv(s));
    CHECK(back.u.grid->same_layout(*g));
    CHECK((back.u.values == s.u.values).all());
  }
  SUBCASE("radial") {
    const auto g = std::make_shared<RadialGrid>(make_radial_grid(1, 300, 0.93));
    auto p = gaussian_mass_profile(g, 31.0, 0.07);
    p.time = 1.0 / 3;
    const auto back = read_radial_snapshot(snapshot_csv(p));
    CHECK(back.time == p.time);
    CHECK((back.grid->nodes() == g->nodes()).all());
    CHECK((back.m == p.m).all());
  }
}

TEST_CASE("snapshot readers reject damage") {
  const auto g = std::make_shared<CartesianGrid>(make_disk_grid(1, 16));
  const std::string good = snapshot_csv(SimState{sample(g, [](const Point&) { return 1.0; }), zero_field<double>(g), 0, 0});
  CHECK_THROWS_AS(read_cartesian_snapshot(good.substr(0, good.size() / 2)), PreconditionError);
  CHECK_THROWS_AS(read_cartesian_snapshot(std::regex_replace(good, std::regex("# cells,16,16"), "# cells,17,16")),
                  PreconditionError);
  CHECK_THROWS_AS(read_cartesian_snapshot(std::regex_replace(good, std::regex(",1,0\n"), ",abc,0\n")),
                  PreconditionError);
  CHECK_THROWS_AS(read_radial_snapshot(good), PreconditionError);
  const auto rg = std::make_shared<RadialGrid>(make_radial_grid(1, 64, 1.0));
  const std::string radial = snapshot_csv(gaussian_mass_profile(rg, 1.0, 0.3));
  CHECK_THROWS_AS(read_radial_snapshot(std::regex_replace(radial, std::regex("# grading,1"), "# grading,0.9")),
                  PreconditionError);
}

TEST_CASE("manifest lists and verifies every file") {
  TempDir tmp;
  write_atomic(tmp.path / "a.csv", "1,2\n");
  write_atomic(tmp.path / "sub" / "b.txt", "hello");
  RunManifest m;
  m.code_version = "test";
  m.mode = "radial";
  m.config = R"({"mode": "radial"})";
  const auto written = write_manifest(tmp.path, m);
  REQUIRE(written.files.size() == 2);
  CHECK(written.files[0].path == "a.csv");
  CHECK(written.files[1].path == "sub/b.txt");
  CHECK(written.files[1].sha256 == sha256_hex("hello"));
  CHECK(written.files[1].bytes == 5);
  CHECK(verify_manifest(tmp.path).empty());
  const auto back = read_manifest(tmp.path);
  CHECK(back.files.size() == 2);
  CHECK(back.mode == "radial");

  write_atomic(tmp.path / "a.csv", "1,3\n");
  CHECK(mentions(verify_manifest(tmp.path), "a.csv: digest mismatch"));
  write_atomic(tmp.path / "c.csv", "x");
  CHECK(mentions(verify_manifest(tmp.path), "c.csv: not listed"));
  fs::remove(tmp.path / "sub" / "b.txt");
  CHECK(mentions(verify_manifest(tmp.path), "sub/b.txt: listed but missing"));
}

TEST_CASE("atomic writes leave no temporaries") {
  TempDir tmp;
  write_atomic(tmp.path / "x.txt", "one");
  write_atomic(tmp.path / "x.txt", "two");
  CHECK(read_file(tmp.path / "x.txt") == "two");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) files += e.is_regular_file();
  CHECK(files == 1);
}

TEST_CASE("svg plot") {
  TraceTable t({"t", "free_energy", "max_u"});
  for (int k = 0; k < 20; ++k) t.add_row({0.1 * k, -double(k * k), std::exp(0.3 * k)});
  const auto svg = plot_svg(t, {"t", "free_energy"});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("free_energy vs t") != std::string::npos);
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, std::regex("points=\"([^\"]*)\"")));
  std::istringstream pts(m[1].str());
  std::string pair;
  std::size_t count = 0;
  while (pts >> pair) ++count;
  CHECK(count == 20);
  CHECK_NOTHROW(plot_svg(t, {"t", "max_u", true}));
  CHECK_THROWS_AS(plot_svg(t, {"t", "free_energy", true}), PreconditionError);
  CHECK_THROWS_AS(plot_svg(t, {"t", "nope"}), PreconditionError);
}

TEST_CASE("collapse estimate json") {
  BlowupVerdict v;
  v.blowup = false;
  const auto none = nlohmann::json::parse(collapse_estimate_json(v, std::nullopt, std::nullopt, "horizon"));
  CHECK(none["blowup"] == false);
  CHECK(none["extrapolated_collapse_mass"].is_null());
  CHECK(none["halt_reason"] == "horizon");
}

// --------------------------------------------------------------------------
// Driver

TEST_CASE("validate subcommand") {
  TempDir tmp;
  write_atomic(tmp.path / "bad.json", R"({"mode": "radial", "grid": {"n": 64}, "initial": {"kind": "gaussian", "mass": -2}})");
  const auto bad = cli({"validate", (tmp.path / "bad.json").string()});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("initial.mass") != std::string::npos);
  CHECK(bad.err.find("initial.width: missing") != std::string::npos);
  const auto good = cli({"validate", (kConfigs / "radial_supercritical.json").string()});
  CHECK(good.code == kExitOk);
  CHECK(good.out.find("ok (radial)") != std::string::npos);
  CHECK(cli({"validate", (tmp.path / "missing.json").string()}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("radial supercritical run") {
  TempDir tmp;
  const auto r = cli({"run", (kConfigs / "radial_supercritical.json").string(), "--output", (tmp.path / "run").string()});
  REQUIRE(r.code == kExitOk);
  const auto dir = tmp.path / "run";
  CHECK(verify_manifest(dir).empty());
  const auto m = read_manifest(dir);
  CHECK(m.halt_reason == "blowup_threshold");
  bool listed = false;
  for (const auto& f : m.files) listed = listed || f.path == "collapse_estimate.json";
  CHECK(listed);
  const auto e = nlohmann::json::parse(read_file(dir / "collapse_estimate.json"));
  CHECK(e["blowup"] == true);
  CHECK(e["extrapolated_collapse_mass"].get<double>() == doctest::Approx(kCollapseMass).epsilon(0.05));

  // the free-energy plot decreases: pixel y never moves up
  const auto plot = cli({"plot", (dir / "trace.csv").string(), "--y", "free_energy"});
  REQUIRE(plot.code == kExitOk);
  std::smatch pm;
  REQUIRE(std::regex_search(plot.out, pm, std::regex("points=\"([^\"]*)\"")));
  std::istringstream pts(pm[1].str());
  std::string pair;
  double last_y = -1;
  std::size_t n = 0;
  while (pts >> pair) {
    const double y = std::stod(pair.substr(pair.find(',') + 1));
    CHECK(y >= last_y);
    last_y = y;
    ++n;
  }
  CHECK(n > 100);

  // the output directory is not reused silently
  const auto again = cli({"run", (kConfigs / "radial_supercritical.json").string(), "--output", dir.string()});
  CHECK(again.code == kExitConfig);
  CHECK(again.err.find("--force") != std::string::npos);

  // diagnose the run
  const auto d = cli({"diagnose", dir.string(), "--output", (tmp.path / "diag").string()});
  REQUIRE(d.code == kExitOk);
  CHECK(verify_manifest(tmp.path / "diag").empty());
  const auto b = nlohmann::json::parse(read_file(tmp.path / "diag" / "bubbles.json"));
  CHECK(b["count"] == 1);
  CHECK(b["bubbles"][0]["mass"].get<double>() == doctest::Approx(kCollapseMass).epsilon(0.5 / kCollapseMass));

  // a tampered run directory is refused
  write_atomic(dir / "extra.txt", "x");
  const auto tampered = cli({"diagnose", dir.string(), "--output", (tmp.path / "diag2").string()});
  CHECK(tampered.code == kExitConfig);
  CHECK(tampered.err.find("extra.txt: not listed") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "diag2"));
}

TEST_CASE("output root override") {
  TempDir tmp;
  write_atomic(tmp.path / "cfg.json",
               R"({"mode": "radial", "grid": {"n": 64}, "initial": {"kind": "gaussian", "mass": 5, "width": 0.3},
                   "step": {"horizon": 0.01}, "output": {"directory": "nested/out"}})");
  ::setenv(kOutputRootVariable, (tmp.path / "root").c_str(), 1);
  const auto r = cli({"run", (tmp.path / "cfg.json").string()});
  ::unsetenv(kOutputRootVariable);
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(tmp.path / "root" / "nested" / "out" / "manifest.json"));
  CHECK(verify_manifest(tmp.path / "root" / "nested" / "out").empty());
}

TEST_CASE("file initial data continue a run") {
  TempDir tmp;
  write_atomic(tmp.path / "a.json", R"({"mode": "evolve2d", "grid": {"n": 16}, "initial": {"kind": "gaussian", "mass": 3,
                   "width": 0.4}, "step": {"horizon": 0.01}, "output": {"directory": "a"}})");
  write_atomic(tmp.path / "b.json", R"({"mode": "evolve2d", "initial": {"kind": "file", "path": "a_out/final.csv"},
                   "step": {"horizon": 0.01}, "output": {"directory": "b"}})");
  REQUIRE(cli({"run", (tmp.path / "a.json").string(), "-o", (tmp.path / "a_out").string()}).code == kExitOk);
  REQUIRE(cli({"run", (tmp.path / "b.json").string(), "-o", (tmp.path / "b_out").string()}).code == kExitOk);
  std::istringstream text(read_file(tmp.path / "b_out" / "trace.csv"));
  const auto t = TraceTable::read_csv(text);
  CHECK(t.column("t").front() == doctest::Approx(0.01));
  CHECK(t.column("mass").back() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("numerical failure exits with 2 and leaves a diagnostic") {
  TempDir tmp;
  // a direct Newton solve this close to 8π does not converge without continuation
  write_atomic(tmp.path / "cfg.json", R"({"mode": "evolve2d", "grid": {"n": 32}, "initial": {"kind": "meanfield", "lambda": 25.0}})");
  const auto r = cli({"run", (tmp.path / "cfg.json").string(), "-o", (tmp.path / "out").string()});
  CHECK(r.code == kExitNumerical);
  CHECK(r.err.find("numerical failure") != std::string::npos);
  CHECK(fs::exists(tmp.path / "out" / "error.txt"));
  CHECK(verify_manifest(tmp.path / "out").empty());
  CHECK(read_manifest(tmp.path / "out").halt_reason == "numerical_failure");
}

TEST_CASE("meanfield subcommand") {
  const auto r = cli({"meanfield", "--lambda", "12.566370614359172", "--n", "256"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["v0"].get<double>() == doctest::Approx(j["closed_form_v0"].get<double>()).epsilon(1e-6));
  CHECK(cli({"meanfield"}).code == kExitConfig);
  CHECK(cli({"meanfield", "--lambda", "30"}).code == kExitConfig);

  TempDir tmp;
  write_atomic(tmp.path / "mf.json", R"({"mode": "meanfield", "grid": {"n": 128},
                   "meanfield": {"geometry": "radial", "lambda_start": 1, "lambda_end": 20, "steps": 30}})");
  const auto b = cli({"meanfield", (tmp.path / "mf.json").string(), "-o", (tmp.path / "out").string()});
  REQUIRE(b.code == kExitOk);
  CHECK(read_manifest(tmp.path / "out").halt_reason == "completed");
  std::istringstream text(read_file(tmp.path / "out" / "branch.csv"));
  const auto t = TraceTable::read_csv(text);
  CHECK(t.column("lambda").back() == 20);
  const auto p = read_radial_snapshot(read_file(tmp.path / "out" / "final.csv"));
  CHECK(p.mass() == 20);
}
