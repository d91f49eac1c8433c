#include "collapse/observables.hpp"

#include "collapse/flux.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace collapse {

TraceTable::TraceTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  require(!columns_.empty(), "trace table: needs at least one column");
}

void TraceTable::add_row(std::vector<double> values) {
  require(values.size() == columns_.size(), "trace table: row width does not match the header");
  if (!rows_.empty())
    require(values[0] > rows_.back()[0], "trace table: time must increase strictly");
  rows_.push_back(std::move(values));
}

bool TraceTable::has_column(const std::string& name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::vector<double> TraceTable::column(const std::string& name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  require(it != columns_.end(), "trace table: no column named '" + name + "'");
  const auto k = std::size_t(it - columns_.begin());
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r[k]);
  return out;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void TraceTable::write_csv(std::ostream& out) const {
  for (std::size_t k = 0; k < columns_.size(); ++k) out << (k ? "," : "") << columns_[k];
  out << '\n';
  for (const auto& r : rows_) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << format_number(r[k]);
    out << '\n';
  }
}

std::string TraceTable::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

TraceTable TraceTable::read_csv(std::istream& in) {
  std::string line;
  require(bool(std::getline(in, line)), "trace table: empty input");
  std::vector<std::string> header;
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) header.push_back(cell);
  }
  TraceTable table(header);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      // strtod, unlike stod, keeps subnormals
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw PreconditionError("trace table: bad number '" + cell + "' on line " +
                                std::to_string(lineno));
      row.push_back(x);
    }
    table.add_row(std::move(row));
  }
  return table;
}

// --------------------------------------------------------------------------

double entropy(const CartesianField& u) {
  CompensatedSum<double> acc;
  for (Eigen::Index c : u.grid->active_cells()) {
    const double x = u.values[c];
    require(x >= 0, "entropy: density must be nonnegative");
    if (x > 0) acc.add(x * (std::log(x) - 1));
  }
  return acc.value() * u.grid->cell_area();
}

double free_energy(const CartesianField& u, const CartesianField& v) {
  require(u.grid && v.grid && u.grid->same_layout(*v.grid), "free_energy: fields on different grids");
  return entropy(u) - 0.5 * pairing(u, v);
}

double free_energy(const CartesianField& u) { return free_energy(u, solve_poisson_dirichlet(u)); }

double dissipation(const CartesianField& u, const CartesianField& v) {
  require(u.grid && v.grid && u.grid->same_layout(*v.grid), "dissipation: fields on different grids");
  constexpr double floor = 1e-300;
  CompensatedSum<double> acc;
  for (const Face& f : interior_faces(*u.grid)) {
    const double ua = u.values[f.a], ub = u.values[f.b];
    if (ua < floor || ub < floor) continue;
    const double va = v.values[f.a], vb = v.values[f.b];
    const double flux = sg_flux(ua, ub, va, vb, f.distance);
    const double dw = (std::log(ua) - va) - (std::log(ub) - vb);
    acc.add(f.length * flux * dw);
  }
  return acc.value();
}

std::vector<WeakFormSample> weak_form_residual(const std::vector<CartesianField>& trajectory,
                                               const TestFunction& phi,
                                               const GreenKernel& kernel, PairSum mode) {
  require(trajectory.size() >= 3, "weak_form_residual: at least three snapshots are required");
  const GridPtr& grid = trajectory.front().grid;
  for (const auto& u : trajectory)
    require(u.grid && u.grid->same_layout(*grid), "weak_form_residual: snapshots on different grids");
  require(phi.admissible(*grid), "weak_form_residual: test function has nonzero normal derivative");

  const CartesianField phi_h = sample(grid, [&](const Point& x) { return phi.value(x); });
  const CartesianField lap_h = sample(grid, [&](const Point& x) { return phi.laplacian(x); });

  std::vector<WeakFormSample> out;
  for (std::size_t k = 1; k + 1 < trajectory.size(); ++k) {
    const auto& prev = trajectory[k - 1];
    const auto& next = trajectory[k + 1];
    const double span = next.time - prev.time;
    require(span > 0, "weak_form_residual: snapshot times must increase");
    CartesianField diff = next;
    diff.values -= prev.values;
    WeakFormSample s;
    s.t = trajectory[k].time;
    s.lhs = pairing(phi_h, diff) / span;
    s.linear = pairing(lap_h, trajectory[k]);
    s.interaction = phi.kind() == TestFunction::Kind::constant
                        ? 0.0
                        : weak_interaction(kernel, phi, trajectory[k], mode);
    s.residual = std::abs(s.lhs - s.linear - s.interaction);
    out.push_back(s);
  }
  return out;
}

double monotonicity_bound(const std::vector<PairingSample>& trace, const TestFunction& phi,
                          const CartesianGrid& grid) {
  require(trace.size() >= 8, "monotonicity_bound: at least 8 samples are required");
  const double norm = phi.gradient_c1_norm(grid);
  if (norm == 0) return 0;
  double worst = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double dt = trace[k].t - trace[k - 1].t;
    require(dt > 0, "monotonicity_bound: times must increase");
    worst = std::max(worst, std::abs(trace[k].value - trace[k - 1].value) / dt);
  }
  return worst / norm;
}

double stationarity_residual(const CartesianField& u, const CartesianField& v) {
  require(u.grid && v.grid && u.grid->same_layout(*v.grid),
          "stationarity_residual: fields on different grids");
  const auto& cells = u.grid->active_cells();
  CompensatedSum<double> mean;
  for (Eigen::Index c : cells) {
    require(u.values[c] > 0, "stationarity_residual: density must be positive");
    mean.add(std::log(u.values[c]) - v.values[c]);
  }
  const double m = mean.value() / double(cells.size());
  CompensatedSum<double> var;
  for (Eigen::Index c : cells) {
    const double d = std::log(u.values[c]) - v.values[c] - m;
    var.add(d * d);
  }
  return var.value() / double(cells.size());
}

}  // namespace collapse
