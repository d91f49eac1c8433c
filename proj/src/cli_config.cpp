#include "collapse/cli_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace collapse {

using json = nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& x : items) s += (s.empty() ? "" : "\n") + x;
  return s;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// closest allowed key first; anything that looks like "lambda" names the mass parameter
std::string suggest(const std::string& key, const std::vector<std::string>& allowed) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& a : allowed) {
    const std::size_t d = edit_distance(key, a);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  if (!best.empty()) return "; did you mean \"" + best + "\"?";
  std::string lower = key;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "λ" || lower == "lam" || edit_distance(lower, "lambda") <= 2)
    return "; did you mean λ/mass? (\"mass\" for gaussian and uniform data, \"lambda\" for meanfield data)";
  return "";
}

const char* type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::object: return "an object";
    case json::value_t::array: return "an array";
    case json::value_t::string: return "a string";
    case json::value_t::boolean: return "a boolean";
    case json::value_t::null: return "null";
    default: return "a number";
  }
}

// One JSON object under a dotted path. Reads record their key; close()
// reports the rest as unknown.
class Section {
 public:
  Section(std::vector<std::string>& errors, const json* node, std::string path)
      : errors_(errors), node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) {
      fail("", std::string("must be an object, got ") + type_name(*node_));
      node_ = nullptr;
    }
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void fail(const std::string& key, const std::string& message) {
    errors_.push_back((key.empty() ? path_ : at(key)) + ": " + message);
  }

  const json* find(const std::string& key) {
    allowed_.push_back(key);
    if (!node_) return nullptr;
    auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  void missing(const std::string& key, const std::string& why) { fail(key, "missing (" + why + ")"); }

  std::optional<double> number(const std::string& key) {
    const json* j = find(key);
    if (!j) return std::nullopt;
    if (!j->is_number()) {
      fail(key, std::string("must be a number, got ") + type_name(*j));
      return std::nullopt;
    }
    const double x = j->get<double>();
    if (!std::isfinite(x)) {
      fail(key, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const std::string& key) {
    const json* j = find(key);
    if (!j) return std::nullopt;
    if (!j->is_number_integer()) {
      fail(key, std::string("must be an integer, got ") + (j->is_number() ? "a fraction" : type_name(*j)));
      return std::nullopt;
    }
    return j->get<long long>();
  }

  std::optional<std::string> string(const std::string& key) {
    const json* j = find(key);
    if (!j) return std::nullopt;
    if (!j->is_string()) {
      fail(key, std::string("must be a string, got ") + type_name(*j));
      return std::nullopt;
    }
    return j->get<std::string>();
  }

  std::optional<Point> point(const std::string& key) {
    const json* j = find(key);
    if (!j) return std::nullopt;
    if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number()) {
      fail(key, "must be a pair of numbers [x, y]");
      return std::nullopt;
    }
    return Point((*j)[0].get<double>(), (*j)[1].get<double>());
  }

  // value must be one of the choices
  std::optional<std::string> choice(const std::string& key, const std::vector<std::string>& choices) {
    auto s = string(key);
    if (s && std::find(choices.begin(), choices.end(), *s) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      fail(key, "\"" + *s + "\" is not one of " + list);
      return std::nullopt;
    }
    return s;
  }

  void positive(const std::string& key, std::optional<double> x, double& out) {
    if (!x) return;
    if (*x <= 0) fail(key, "must be positive (got " + format_number(*x) + ")");
    else out = *x;
  }

  // unknown keys, plus keys that exist in the schema but not for this mode
  void close(const std::map<std::string, std::string>& misplaced = {}) {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      const std::string& key = it.key();
      if (std::find(allowed_.begin(), allowed_.end(), key) != allowed_.end()) continue;
      auto m = misplaced.find(key);
      if (m != misplaced.end()) fail(key, m->second);
      else fail(key, "unknown key" + suggest(key, allowed_));
    }
  }

 private:
  std::vector<std::string>& errors_;
  const json* node_;
  std::string path_;
  std::vector<std::string> allowed_;
};

void read_domain(Section& s, RunConfig& c, bool disk_only) {
  const auto kind = s.choice("kind", {"disk", "rectangle"});
  if (kind) c.domain.kind = *kind == "disk" ? DomainKind::disk : DomainKind::rectangle;
  if (disk_only && c.domain.kind != DomainKind::disk)
    s.fail("kind", "must be disk in " + to_string(c.mode) + (c.mode == RunMode::meanfield ? " radial geometry" : " mode"));
  if (c.domain.kind == DomainKind::disk) {
    s.positive("radius", s.number("radius"), c.domain.radius);
    s.close({{"origin", "only for rectangles"}, {"lx", "only for rectangles"}, {"ly", "only for rectangles"}});
  } else {
    if (auto o = s.point("origin")) c.domain.origin = *o;
    if (!s.has("lx")) s.missing("lx", "required for rectangles");
    if (!s.has("ly")) s.missing("ly", "required for rectangles");
    s.positive("lx", s.number("lx"), c.domain.lx);
    s.positive("ly", s.number("ly"), c.domain.ly);
    s.close({{"radius", "only for disks"}});
  }
}

void read_cells(Section& s, const std::string& key, int& out) {
  if (auto n = s.integer(key)) {
    if (*n < 8 || *n > 1'000'000) s.fail(key, "must lie in [8, 1000000] (got " + std::to_string(*n) + ")");
    else out = int(*n);
  }
}

void read_grid(Section& s, RunConfig& c, bool radial) {
  if (radial) {
    if (!s.has("n")) s.missing("n", "radial intervals");
    read_cells(s, "n", c.grid.n);
    if (auto g = s.number("grading")) {
      if (*g <= 0 || *g > 1) s.fail("grading", "must lie in (0, 1] (got " + format_number(*g) + ")");
      else c.grid.grading = *g;
    }
    s.close({{"nx", "only for rectangles"}, {"ny", "only for rectangles"}});
  } else if (c.domain.kind == DomainKind::disk) {
    if (!s.has("n")) s.missing("n", "cells per direction");
    read_cells(s, "n", c.grid.n);
    s.close({{"grading", "only for radial grids"}, {"nx", "only for rectangles"}, {"ny", "only for rectangles"}});
  } else {
    read_cells(s, "n", c.grid.n);
    read_cells(s, "nx", c.grid.nx);
    read_cells(s, "ny", c.grid.ny);
    if (!s.has("n") && !(s.has("nx") && s.has("ny"))) s.missing("nx", "give nx and ny, or n for both");
    if (c.grid.nx == 0) c.grid.nx = c.grid.n;
    if (c.grid.ny == 0) c.grid.ny = c.grid.n;
    s.close({{"grading", "only for radial grids"}});
  }
}

void read_initial(Section& s, RunConfig& c) {
  const bool radial = c.mode == RunMode::radial;
  if (!s.has("kind")) s.missing("kind", "one of uniform, gaussian, meanfield, file");
  const auto kind = s.choice("kind", {"uniform", "gaussian", "meanfield", "file"});
  auto& in = c.initial;
  if (!kind) {
    s.close();
    return;
  }
  std::map<std::string, std::string> misplaced;
  auto not_for = [&](const std::string& key) { misplaced[key] = "not used by " + *kind + " data"; };
  if (*kind == "uniform" || *kind == "gaussian") {
    in.kind = *kind == "uniform" ? InitialSpec::Kind::uniform : InitialSpec::Kind::gaussian;
    if (!s.has("mass")) s.missing("mass", "total mass λ");
    s.positive("mass", s.number("mass"), in.mass);
    if (in.kind == InitialSpec::Kind::gaussian) {
      if (!s.has("width")) s.missing("width", "required for gaussian data");
      s.positive("width", s.number("width"), in.width);
      if (auto p = s.point("center")) {
        if (radial && p->norm() != 0) s.fail("center", "radial data are centred at the origin");
        in.center = *p;
      }
    } else {
      not_for("width");
      not_for("center");
    }
    if (auto a = s.number("perturbation")) {
      if (radial) s.fail("perturbation", "radial data cannot be perturbed");
      else if (*a < 0 || *a >= 1) s.fail("perturbation", "must lie in [0, 1) (got " + format_number(*a) + ")");
      else in.perturbation = *a;
    }
    not_for("lambda");
    not_for("path");
  } else if (*kind == "meanfield") {
    in.kind = InitialSpec::Kind::meanfield;
    if (!s.has("lambda")) s.missing("lambda", "required for meanfield data");
    if (auto l = s.number("lambda")) {
      if (*l <= 0 || *l >= kCollapseMass) s.fail("lambda", "must lie in (0, 8π) (got " + format_number(*l) + ")");
      else in.lambda = *l;
    }
    if (radial && c.grid.grading != 1.0)
      s.fail("kind", "meanfield data need a uniform radial grid (grid.grading = 1)");
    for (const char* k : {"mass", "width", "center", "perturbation", "path"}) not_for(k);
  } else {
    in.kind = InitialSpec::Kind::file;
    if (!s.has("path")) s.missing("path", "snapshot file");
    if (auto p = s.string("path")) {
      if (p->empty()) s.fail("path", "must not be empty");
      in.path = *p;
    }
    for (const char* k : {"mass", "width", "center", "perturbation", "lambda"}) not_for(k);
  }
  s.close(misplaced);
}

void read_step(Section& s, StepControl& st) {
  s.positive("dt_max", s.number("dt_max"), st.dt_max);
  if (auto x = s.number("cfl_safety")) {
    if (*x <= 0 || *x > 0.9) s.fail("cfl_safety", "must lie in (0, 0.9] (got " + format_number(*x) + ")");
    else st.cfl_safety = *x;
  }
  double threshold = 0;
  if (s.has("blowup_sup_threshold")) {
    s.positive("blowup_sup_threshold", s.number("blowup_sup_threshold"), threshold);
    if (threshold > 0) st.blowup_sup_threshold = threshold;
  } else {
    s.find("blowup_sup_threshold");
  }
  if (auto n = s.integer("max_steps")) {
    if (*n <= 0) s.fail("max_steps", "must be positive");
    else st.max_steps = long(*n);
  }
  s.positive("horizon", s.number("horizon"), st.horizon);
  if (auto x = s.number("dt_min")) {
    if (*x <= 0) s.fail("dt_min", "must be positive");
    else if (*x >= st.dt_max) s.fail("dt_min", "must be below dt_max");
    else st.dt_min = *x;
  }
  s.close();
}

void read_probes(std::vector<std::string>& errors, const json* node, RunConfig& c) {
  if (!node) return;
  if (!node->is_array()) {
    errors.push_back(std::string("probes: must be an array, got ") + type_name(*node));
    return;
  }
  for (std::size_t i = 0; i < node->size(); ++i) {
    Section s(errors, &(*node)[i], "probes[" + std::to_string(i) + "]");
    if (!s.present()) continue;
    ProbeSpec p;
    if (!s.has("kind")) s.missing("kind", "one of constant, polynomial, bump, cutoff");
    const auto kind = s.choice("kind", {"constant", "polynomial", "bump", "cutoff"});
    if (kind == "constant") {
      p.kind = TestFunction::Kind::constant;
      if (auto v = s.number("value")) p.value = *v;
    } else if (kind == "polynomial") {
      p.kind = TestFunction::Kind::polynomial;
      const json* t = s.find("terms");
      bool ok = t && t->is_array() && !t->empty();
      if (ok)
        for (const auto& term : *t) {
          if (!term.is_array() || term.size() != 3 || !term[0].is_number() || !term[1].is_number_unsigned() ||
              !term[2].is_number_unsigned()) {
            ok = false;
            break;
          }
          p.terms.push_back({term[0].get<double>(), term[1].get<int>(), term[2].get<int>()});
        }
      if (!ok) s.fail("terms", "must be a nonempty array of [coefficient, px, py] with integer powers ≥ 0");
    } else if (kind == "bump" || kind == "cutoff") {
      p.kind = kind == "bump" ? TestFunction::Kind::bump : TestFunction::Kind::cutoff;
      if (auto q = s.point("center")) p.center = *q;
      else if (!s.has("center")) s.missing("center", "required for " + *kind);
      if (!s.has("radius")) s.missing("radius", "required for " + *kind);
      s.positive("radius", s.number("radius"), p.radius);
      if (kind == "bump") {
        if (auto a = s.number("amplitude")) p.amplitude = *a;
      }
    }
    s.close();
    c.probes.push_back(p);
  }
}

void read_diagnostics(Section& s, DiagnosticsSpec& d) {
  if (const json* l = s.find("ladder")) {
    bool ok = l->is_array() && l->size() >= 2;
    std::vector<double> ladder;
    if (ok)
      for (const auto& x : *l) {
        if (!x.is_number() || x.get<double>() <= 0 || (!ladder.empty() && x.get<double>() <= ladder.back())) {
          ok = false;
          break;
        }
        ladder.push_back(x.get<double>());
      }
    if (ok) d.ladder = ladder;
    else s.fail("ladder", "must be an increasing array of at least two positive numbers");
  }
  s.positive("epsilon", s.number("epsilon"), d.epsilon);
  s.positive("epsilon0", s.number("epsilon0"), d.epsilon0);
  s.positive("sigma0", s.number("sigma0"), d.sigma0);
  s.positive("b_window", s.number("b_window"), d.b_window);
  if (auto g = s.number("growth")) {
    if (*g <= 1) s.fail("growth", "must exceed 1");
    else d.growth = *g;
  }
  if (auto n = s.integer("eps_balls")) {
    if (*n < 0 || *n > 10000) s.fail("eps_balls", "must lie in [0, 10000]");
    else d.eps_balls = int(*n);
  }
  s.close();
}

void read_output(Section& s, RunConfig& c) {
  if (auto d = s.string("directory")) {
    if (d->empty()) s.fail("directory", "must not be empty");
    c.output.directory = *d;
  }
  std::map<std::string, std::string> misplaced;
  if (c.mode == RunMode::evolve2d) {
    if (auto n = s.integer("snapshot_every")) {
      if (*n < 0) s.fail("snapshot_every", "must be nonnegative");
      else c.output.snapshot_every = long(*n);
    }
    misplaced["snapshot_growth"] = "only for radial runs (2D runs use snapshot_every)";
  } else if (c.mode == RunMode::radial) {
    if (auto g = s.number("snapshot_growth")) {
      if (*g != 0 && *g <= 1) s.fail("snapshot_growth", "must be 0 (off) or exceed 1");
      else c.output.snapshot_growth = *g;
    }
    misplaced["snapshot_every"] = "only for 2D runs (radial runs use snapshot_growth)";
  } else {
    misplaced["snapshot_every"] = "not used in " + to_string(c.mode) + " mode";
    misplaced["snapshot_growth"] = misplaced["snapshot_every"];
    misplaced["trace_every"] = misplaced["snapshot_every"];
  }
  if (c.mode == RunMode::evolve2d || c.mode == RunMode::radial) {
    if (auto n = s.integer("trace_every")) {
      if (*n < 1) s.fail("trace_every", "must be at least 1");
      else c.output.trace_every = long(*n);
    }
  }
  s.close(misplaced);
}

void read_meanfield(Section& s, RunConfig& c) {
  auto& m = c.meanfield;
  const auto geometry = s.choice("geometry", {"radial", "planar"});
  if (geometry) m.radial = *geometry == "radial";
  if (!s.has("lambda_start")) s.missing("lambda_start", "required in meanfield mode");
  auto in_range = [&](const std::string& key, double& out) {
    if (auto l = s.number(key)) {
      if (*l <= 0 || *l >= kCollapseMass) s.fail(key, "must lie in (0, 8π) (got " + format_number(*l) + ")");
      else out = *l;
    }
  };
  in_range("lambda_start", m.lambda_start);
  m.lambda_end = m.lambda_start;
  in_range("lambda_end", m.lambda_end);
  if (auto n = s.integer("steps")) {
    if (*n < 0 || *n > 100000) s.fail("steps", "must lie in [0, 100000]");
    else m.steps = int(*n);
  }
  s.positive("tolerance", s.number("tolerance"), m.tolerance);
  s.close();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid config:\n" + join(violations)), violations_(std::move(violations)) {}

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::evolve2d: return "evolve2d";
    case RunMode::radial: return "radial";
    case RunMode::meanfield: return "meanfield";
    case RunMode::diagnose: return "diagnose";
  }
  return "unknown";
}

TestFunction ProbeSpec::build() const {
  switch (kind) {
    case TestFunction::Kind::constant: return TestFunction::constant(value);
    case TestFunction::Kind::polynomial: return TestFunction::polynomial(terms);
    case TestFunction::Kind::bump: return TestFunction::bump(center, radius, amplitude);
    case TestFunction::Kind::cutoff: return TestFunction::cutoff(center, radius);
  }
  throw PreconditionError("probe: unknown kind");
}

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: not valid JSON (") + e.what() + ")"});
  }
  std::vector<std::string> errors;
  RunConfig c;
  c.echo = root.dump(2);
  Section top(errors, &root, "");
  if (!top.present()) throw ConfigError(errors);

  const auto mode = top.choice("mode", {"evolve2d", "radial", "meanfield", "diagnose"});
  if (!top.has("mode")) top.missing("mode", "one of evolve2d, radial, meanfield, diagnose");
  if (!mode) {
    // without a mode only the key names can be checked
    for (const char* k : {"domain", "grid", "initial", "step", "scheme", "probes", "diagnostics", "output",
                          "meanfield", "input", "seed"})
      top.find(k);
    top.close();
    throw ConfigError(errors);
  }
  static const std::map<std::string, RunMode> modes = {{"evolve2d", RunMode::evolve2d},
                                                       {"radial", RunMode::radial},
                                                       {"meanfield", RunMode::meanfield},
                                                       {"diagnose", RunMode::diagnose}};
  c.mode = modes.at(*mode);
  const bool evolving = c.mode == RunMode::evolve2d || c.mode == RunMode::radial;
  std::map<std::string, std::string> misplaced;
  auto only = [&](const std::string& key, const std::string& modes_text) {
    misplaced[key] = "not used in " + *mode + " mode (only " + modes_text + ")";
  };

  if (c.mode == RunMode::meanfield) {
    Section m(errors, top.find("meanfield"), "meanfield");
    if (!m.present()) top.missing("meanfield", "required in meanfield mode");
    read_meanfield(m, c);
  } else {
    only("meanfield", "meanfield");
  }

  const bool from_file = [&] {
    const json* i = root.contains("initial") ? &root["initial"] : nullptr;
    return evolving && i && i->is_object() && i->value("kind", "") == "file";
  }();
  const bool radial_grid = c.mode == RunMode::radial || (c.mode == RunMode::meanfield && c.meanfield.radial);

  if (c.mode != RunMode::diagnose) {
    Section d(errors, top.find("domain"), "domain");
    read_domain(d, c, radial_grid);
    Section g(errors, top.find("grid"), "grid");
    if (from_file) {
      if (g.present()) top.fail("grid", "not allowed with file initial data (the snapshot pins the grid)");
      if (d.present()) top.fail("domain", "not allowed with file initial data (the snapshot pins the grid)");
    } else {
      if (!g.present()) top.missing("grid", "required in " + *mode + " mode");
      read_grid(g, c, radial_grid);
      if (c.mode == RunMode::meanfield && c.meanfield.radial && c.grid.grading != 1.0)
        g.fail("grading", "the radial mean-field solver needs a uniform grid (1)");
    }
  } else {
    only("domain", "evolve2d, radial, meanfield");
    only("grid", "evolve2d, radial, meanfield");
  }

  if (evolving) {
    Section i(errors, top.find("initial"), "initial");
    if (!i.present()) top.missing("initial", "required in " + *mode + " mode");
    else read_initial(i, c);
    Section st(errors, top.find("step"), "step");
    read_step(st, c.step);
  } else {
    only("initial", "evolve2d, radial");
    only("step", "evolve2d, radial");
  }
  if (c.mode != RunMode::meanfield) {
    if (auto seed = top.integer("seed")) {
      if (*seed < 0) top.fail("seed", "must be nonnegative");
      else c.seed = std::uint64_t(*seed);
    }
  } else {
    only("seed", "evolve2d, radial, diagnose");
  }

  if (c.mode == RunMode::evolve2d) {
    if (auto s = top.choice("scheme", {"explicit", "semi_implicit"}))
      c.scheme = *s == "explicit" ? Evolver2d::Scheme::explicit_euler : Evolver2d::Scheme::semi_implicit;
    read_probes(errors, top.find("probes"), c);
  } else {
    only("scheme", "evolve2d");
    only("probes", "evolve2d");
  }

  if (c.mode != RunMode::meanfield) {
    Section d(errors, top.find("diagnostics"), "diagnostics");
    read_diagnostics(d, c.diagnostics);
  } else {
    only("diagnostics", "evolve2d, radial, diagnose");
  }

  if (c.mode == RunMode::diagnose) {
    if (!top.has("input")) top.missing("input", "the run directory to diagnose");
    if (auto in = top.string("input")) {
      if (in->empty()) top.fail("input", "must not be empty");
      c.input = *in;
    }
  } else {
    only("input", "diagnose");
  }

  Section out(errors, top.find("output"), "output");
  read_output(out, c);
  top.close(misplaced);

  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

}  // namespace collapse
