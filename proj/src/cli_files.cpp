#include "collapse/cli_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace collapse {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), std::streamsize(content.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// --------------------------------------------------------------------------
// Snapshots

namespace {

constexpr const char* kCartesianTag = "# collapse-lab snapshot cartesian";
constexpr const char* kRadialTag = "# collapse-lab snapshot radial";

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream s(line);
  while (std::getline(s, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(begin, &end);
  require(end != begin && *end == '\0' && std::isfinite(x), "snapshot: bad number \"" + s + "\" in " + what);
  return x;
}

long to_long(const std::string& s, const std::string& what) {
  const double x = to_double(s, what);
  require(x == std::floor(x) && std::abs(x) < 1e15, "snapshot: " + what + " must be an integer");
  return long(x);
}

class Lines {
 public:
  explicit Lines(std::string_view text) : in_(std::string(text)) {}
  std::string next(const std::string& what) {
    std::string line;
    require(bool(std::getline(in_, line)), "snapshot: truncated before " + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  bool more(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  // "# key,a,b" → {a, b}
  std::vector<std::string> header(const std::string& key, std::size_t count) {
    auto f = split(next(key));
    require(f.size() == count + 1 && f[0] == "# " + key, "snapshot: expected header \"# " + key + "\"");
    return {f.begin() + 1, f.end()};
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string snapshot_csv(const SimState& state) {
  const auto& g = *state.u.grid;
  std::ostringstream s;
  s << kCartesianTag << "\n";
  s << "# domain," << (g.kind() == DomainKind::disk ? "disk" : "rectangle") << "\n";
  s << "# origin," << format_number(g.origin().x()) << "," << format_number(g.origin().y()) << "\n";
  s << "# extent," << format_number(g.lx()) << "," << format_number(g.ly()) << "\n";
  s << "# cells," << g.nx() << "," << g.ny() << "\n";
  s << "# t," << format_number(state.t) << "\n";
  s << "# step," << state.step_count << "\n";
  s << "i,j,u,v\n";
  const bool has_v = state.v.grid != nullptr && state.v.values.size() == state.u.values.size();
  for (auto c : g.active_cells())
    s << g.column(c) << "," << g.row(c) << "," << format_number(state.u.values[c]) << ","
      << format_number(has_v ? state.v.values[c] : 0.0) << "\n";
  return s.str();
}

std::string snapshot_csv(const RadialMassProfile& p) {
  const auto& g = *p.grid;
  std::ostringstream s;
  s << kRadialTag << "\n";
  s << "# radius," << format_number(g.radius()) << "\n";
  s << "# intervals," << g.intervals() << "\n";
  s << "# grading," << format_number(g.grading()) << "\n";
  s << "# t," << format_number(p.time) << "\n";
  s << "r,m\n";
  for (int k = 0; k <= g.intervals(); ++k) s << format_number(g.node(k)) << "," << format_number(p.m[k]) << "\n";
  return s.str();
}

SimState read_cartesian_snapshot(std::string_view text) {
  Lines in(text);
  require(in.next("tag") == kCartesianTag, "snapshot: not a cartesian snapshot");
  const auto domain = in.header("domain", 1);
  require(domain[0] == "disk" || domain[0] == "rectangle", "snapshot: unknown domain " + domain[0]);
  const auto origin = in.header("origin", 2);
  const auto extent = in.header("extent", 2);
  const auto cells = in.header("cells", 2);
  const double t = to_double(in.header("t", 1)[0], "t");
  const long step = to_long(in.header("step", 1)[0], "step");
  require(in.next("columns") == "i,j,u,v", "snapshot: expected columns i,j,u,v");
  auto grid = std::make_shared<CartesianGrid>(
      domain[0] == "disk" ? DomainKind::disk : DomainKind::rectangle,
      Point(to_double(origin[0], "origin"), to_double(origin[1], "origin")), to_double(extent[0], "extent"),
      to_double(extent[1], "extent"), int(to_long(cells[0], "cells")), int(to_long(cells[1], "cells")));
  SimState s{zero_field<double>(grid, t), zero_field<double>(grid, t), t, step};
  std::string line;
  std::size_t k = 0;
  const auto& active = grid->active_cells();
  while (in.more(line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    require(f.size() == 4, "snapshot: row " + std::to_string(k) + " needs 4 fields");
    require(k < active.size(), "snapshot: more rows than active cells");
    const Eigen::Index c = active[k];
    require(to_long(f[0], "i") == grid->column(c) && to_long(f[1], "j") == grid->row(c),
            "snapshot: row " + std::to_string(k) + " is not the next active cell");
    s.u.values[c] = to_double(f[2], "u");
    s.v.values[c] = to_double(f[3], "v");
    ++k;
  }
  require(k == active.size(), "snapshot: " + std::to_string(k) + " rows for " + std::to_string(active.size()) +
                                  " active cells");
  return s;
}

RadialMassProfile read_radial_snapshot(std::string_view text) {
  Lines in(text);
  require(in.next("tag") == kRadialTag, "snapshot: not a radial snapshot");
  const double radius = to_double(in.header("radius", 1)[0], "radius");
  const long n = to_long(in.header("intervals", 1)[0], "intervals");
  const double grading = to_double(in.header("grading", 1)[0], "grading");
  const double t = to_double(in.header("t", 1)[0], "t");
  require(in.next("columns") == "r,m", "snapshot: expected columns r,m");
  auto grid = std::make_shared<RadialGrid>(make_radial_grid(radius, int(n), grading));
  RadialMassProfile p{grid, Eigen::ArrayXd::Zero(n + 1), t};
  std::string line;
  long k = 0;
  while (in.more(line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    require(f.size() == 2, "snapshot: row " + std::to_string(k) + " needs 2 fields");
    require(k <= n, "snapshot: more rows than nodes");
    require(to_double(f[0], "r") == grid->node(int(k)), "snapshot: node " + std::to_string(k) + " does not match the grid");
    p.m[k] = to_double(f[1], "m");
    ++k;
  }
  require(k == n + 1, "snapshot: " + std::to_string(k) + " rows for " + std::to_string(n + 1) + " nodes");
  return p;
}

// --------------------------------------------------------------------------
// Manifest

namespace {

constexpr const char* kManifestName = "manifest.json";

bool temporary(const fs::path& p) { return p.filename().string().find(".tmp") != std::string::npos; }

std::vector<ManifestEntry> scan(const fs::path& dir) {
  std::vector<ManifestEntry> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestName || temporary(e.path())) continue;
    const std::string bytes = read_file(e.path());
    files.push_back({rel, bytes.size(), sha256_hex(bytes)});
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return files;
}

}  // namespace

RunManifest write_manifest(const fs::path& dir, RunManifest m) {
  m.files = scan(dir);
  ojson j;
  j["format"] = "collapse-lab/manifest/1";
  j["code_version"] = m.code_version;
  j["mode"] = m.mode;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["halt_reason"] = m.halt_reason;
  j["error"] = m.error.empty() ? ojson(nullptr) : ojson(m.error);
  j["config"] = m.config.empty() ? ojson(nullptr) : ojson::parse(m.config);
  j["files"] = ojson::array();
  for (const auto& f : m.files) j["files"].push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  write_atomic(dir / kManifestName, j.dump(2) + "\n");
  return m;
}

RunManifest read_manifest(const fs::path& dir) {
  const auto j = ojson::parse(read_file(dir / kManifestName));
  require(j.value("format", "") == "collapse-lab/manifest/1", "manifest: unknown format in " + dir.string());
  RunManifest m;
  m.code_version = j.at("code_version").get<std::string>();
  m.mode = j.at("mode").get<std::string>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.halt_reason = j.at("halt_reason").get<std::string>();
  if (!j.at("error").is_null()) m.error = j.at("error").get<std::string>();
  if (!j.at("config").is_null()) m.config = j.at("config").dump(2);
  for (const auto& f : j.at("files"))
    m.files.push_back({f.at("path").get<std::string>(), f.at("bytes").get<std::uintmax_t>(),
                       f.at("sha256").get<std::string>()});
  return m;
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::vector<std::string> problems;
  RunManifest m;
  try {
    m = read_manifest(dir);
  } catch (const std::exception& e) {
    return {std::string("manifest unreadable: ") + e.what()};
  }
  const auto actual = scan(dir);
  for (const auto& f : m.files) {
    auto it = std::find_if(actual.begin(), actual.end(), [&](const auto& a) { return a.path == f.path; });
    if (it == actual.end()) problems.push_back(f.path + ": listed but missing");
    else if (it->sha256 != f.sha256 || it->bytes != f.bytes) problems.push_back(f.path + ": digest mismatch");
  }
  for (const auto& a : actual)
    if (std::none_of(m.files.begin(), m.files.end(), [&](const auto& f) { return f.path == a.path; }))
      problems.push_back(a.path + ": not listed");
  return problems;
}

// --------------------------------------------------------------------------
// Reports

namespace {

ojson number_or_null(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

ojson peel_json(const Peel& p) {
  return {{"kind", to_string(p.kind)},
          {"center", {p.center.x(), p.center.y()}},
          {"radius", p.radius},
          {"mass", p.mass},
          {"disjoint", p.disjoint}};
}

}  // namespace

std::string collapse_estimate_json(const BlowupVerdict& verdict, const std::optional<CollapseEstimate>& e,
                                   const std::optional<Point>& x0, const std::string& halt_reason) {
  ojson j;
  j["format"] = "collapse-lab/collapse-estimate/1";
  j["halt_reason"] = halt_reason;
  j["blowup"] = verdict.blowup;
  j["fit"] = {{"T_est", number_or_null(verdict.fit.T_est)},
              {"slope", number_or_null(verdict.fit.slope)},
              {"intercept", number_or_null(verdict.fit.intercept)},
              {"residual", number_or_null(verdict.fit.residual)},
              {"residual_flag", verdict.fit.residual_flag},
              {"samples", verdict.fit.samples},
              {"dt_trend", number_or_null(verdict.dt_trend)}};
  j["blowup_point"] = x0 ? ojson::array({x0->x(), x0->y()}) : ojson(nullptr);
  if (e) {
    j["T_est"] = e->T_est;
    j["t_final"] = e->t_final;
    j["envelope_radius"] = e->envelope_radius;
    j["mass_at_scales"] = ojson::array();
    for (const auto& s : e->mass_at_scales) j["mass_at_scales"].push_back({{"b", s.b}, {"r", s.r}, {"mass", s.mass}});
    j["extrapolated_collapse_mass"] = e->extrapolated_collapse_mass;
    j["ratio_to_8pi"] = e->extrapolated_collapse_mass / kCollapseMass;
    j["ladder_spread"] = e->ladder_spread;
    j["convergence_flag"] = e->convergence_flag;
    j["residual_mass"] = e->residual_mass;
  } else {
    for (const char* k : {"T_est", "t_final", "envelope_radius", "mass_at_scales", "extrapolated_collapse_mass",
                          "ratio_to_8pi", "ladder_spread", "convergence_flag", "residual_mass"})
      j[k] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string bubbles_json(const BubbleSet& set, double t, double T_est) {
  ojson j;
  j["format"] = "collapse-lab/bubbles/1";
  j["t"] = t;
  j["T_est"] = T_est;
  j["count"] = set.count();
  j["bubbles"] = ojson::array();
  for (const auto& b : set.bubbles) j["bubbles"].push_back(peel_json(b));
  j["peels"] = ojson::array();
  for (const auto& p : set.peels) j["peels"].push_back(peel_json(p));
  j["exterior_sup"] = set.exterior_sup;
  j["remaining_mass"] = set.remaining_mass;
  j["disjoint"] = set.disjoint();
  j["stop_reason"] = set.stop_reason;
  return j.dump(2) + "\n";
}

// --------------------------------------------------------------------------
// SVG

namespace {

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string plot_svg(const TraceTable& table, const PlotOptions& o) {
  require(!o.y.empty(), "plot: no y column given");
  require(table.has_column(o.x), "plot: no column \"" + o.x + "\"");
  require(table.has_column(o.y), "plot: no column \"" + o.y + "\"");
  require(o.width >= 200 && o.height >= 150, "plot: canvas too small");
  const auto xs = table.column(o.x);
  auto ys = table.column(o.y);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double y = ys[k];
    if (o.log_y) {
      require(!(y <= 0), "plot: log scale needs positive values in \"" + o.y + "\"");
      y = std::log10(y);
    }
    if (std::isfinite(xs[k]) && std::isfinite(y)) pts.emplace_back(xs[k], y);
  }
  require(!pts.empty(), "plot: no finite points");
  double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
  for (const auto& [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double left = 80, right = 20, top = 30, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double x) { return left + pw * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return top + ph * (1 - (y - y0) / (y1 - y0)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << o.width / 2 << "\" y=\"18\" text-anchor=\"middle\">" << escape(o.y) << (o.log_y ? " (log10)" : "")
    << " vs " << escape(o.x) << "</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4, fy = y0 + (y1 - y0) * k / 4;
    s << "<text x=\"" << fmt("%.2f", px(fx)) << "\" y=\"" << fmt("%.2f", top + ph + 16)
      << "\" text-anchor=\"middle\">" << fmt("%.4g", fx) << "</text>\n";
    s << "<text x=\"" << fmt("%.2f", left - 6) << "\" y=\"" << fmt("%.2f", py(fy) + 4) << "\" text-anchor=\"end\">"
      << fmt("%.4g", fy) << "</text>\n";
  }
  s << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = 0; k < pts.size(); ++k)
    s << (k ? " " : "") << fmt("%.2f", px(pts[k].first)) << "," << fmt("%.2f", py(pts[k].second));
  s << "\"/>\n</svg>\n";
  return s.str();
}

}  // namespace collapse
