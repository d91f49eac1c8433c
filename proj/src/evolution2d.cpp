#include "collapse/evolution2d.hpp"

#include "collapse/flux.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace collapse {

struct Evolver2d::Implicit {
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  SparseMatrix pattern;
  // boundary faces: cell and centre-to-boundary distance
  std::vector<std::pair<Eigen::Index, double>> boundary;
};

Evolver2d::Evolver2d(GridPtr grid) : Evolver2d(std::move(grid), Options{}) {}

Evolver2d::Evolver2d(GridPtr grid, Options options)
    : grid_(std::move(grid)), options_(options), poisson_(grid_), faces_(interior_faces(*grid_)) {
  implicit_ = std::make_unique<Implicit>();
  const CartesianGrid& g = *grid_;
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  for (Eigen::Index c : g.active_cells()) {
    const int i = g.column(c), j = g.row(c);
    for (int s = 0; s < 4; ++s)
      if (!g.active(i + di[s], j + dj[s]))
        implicit_->boundary.emplace_back(c, g.boundary_distance(i, j, di[s], dj[s]));
  }
  if (options_.scheme == Scheme::semi_implicit) {
    const Eigen::Index n = g.active_count();
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index k = 0; k < n; ++k) t.emplace_back(k, k, 1.0);
    for (const Face& f : faces_) {
      const Eigen::Index a = g.unknown(f.a), b = g.unknown(f.b);
      t.emplace_back(a, b, 1.0);
      t.emplace_back(b, a, 1.0);
    }
    implicit_->pattern.resize(n, n);
    implicit_->pattern.setFromTriplets(t.begin(), t.end());
    implicit_->pattern.makeCompressed();
    implicit_->solver.analyzePattern(implicit_->pattern);
  }
}

Evolver2d::~Evolver2d() = default;
Evolver2d::Evolver2d(Evolver2d&&) noexcept = default;
Evolver2d& Evolver2d::operator=(Evolver2d&&) noexcept = default;

CartesianField Evolver2d::potential(const CartesianField& u) const {
  if (options_.drift == Drift::none) return zero_field<double>(grid_, u.time);
  return poisson_.solve(u);
}

SimState Evolver2d::initial_state(const CartesianField& u0) const {
  require(u0.grid && u0.grid->same_layout(*grid_), "evolution: initial data on a different grid");
  require(u0.values.size() == grid_->cell_count(), "evolution: initial data has the wrong size");
  double total = 0;
  for (Eigen::Index c : grid_->active_cells()) {
    require(std::isfinite(u0.values[c]), "evolution: initial data must be finite");
    require(u0.values[c] >= 0, "evolution: initial data must be nonnegative");
    total += u0.values[c];
  }
  require(total > 0, "evolution: initial data must not vanish identically");
  SimState s;
  s.u = zero_field<double>(grid_, u0.time);
  for (Eigen::Index c : grid_->active_cells()) s.u.values[c] = u0.values[c];
  s.v = potential(s.u);
  s.t = u0.time;
  return s;
}

Evolver2d::Rates Evolver2d::face_rates(const CartesianField& v) const {
  Rates r{Eigen::ArrayXd(Eigen::Index(faces_.size())), Eigen::ArrayXd(Eigen::Index(faces_.size()))};
  for (std::size_t k = 0; k < faces_.size(); ++k) {
    const double delta = v.values[faces_[k].b] - v.values[faces_[k].a];
    r.forward[Eigen::Index(k)] = bernoulli(-delta);
    r.backward[Eigen::Index(k)] = bernoulli(delta);
  }
  return r;
}

double Evolver2d::adaptive_dt(const SimState& state, const StepControl& ctrl) const {
  if (options_.scheme == Scheme::explicit_euler)
    return adaptive_dt(state, ctrl, face_rates(state.v));
  return adaptive_dt(state, ctrl, Rates{});
}

double Evolver2d::adaptive_dt(const SimState& state, const StepControl& ctrl,
                              const Rates& rates) const {
  const CartesianGrid& g = *grid_;
  const auto& v = state.v.values;
  double grad = 0;
  for (const Face& f : faces_) grad = std::max(grad, std::abs(v[f.b] - v[f.a]) / f.distance);
  for (const auto& [c, d] : implicit_->boundary) grad = std::max(grad, std::abs(v[c]) / d);
  const double h = g.h_min();
  const double umax = max_value(state.u);

  double dt = ctrl.dt_max;
  if (grad > 0) dt = std::min(dt, h / grad);
  if (umax > 0) dt = std::min(dt, 1 / umax);
  if (options_.scheme == Scheme::explicit_euler) {
    dt = std::min(dt, h * h / 4);
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(g.cell_count());
    const double area = g.cell_area();
    for (std::size_t k = 0; k < faces_.size(); ++k) {
      const Face& f = faces_[k];
      const double w = f.length / (f.distance * area);
      out[f.a] += w * rates.forward[Eigen::Index(k)];
      out[f.b] += w * rates.backward[Eigen::Index(k)];
    }
    const double omax = out.maxCoeff();
    if (omax > 0) dt = std::min(dt, 1 / omax);
  }
  return ctrl.cfl_safety * dt;
}

SimState Evolver2d::step(const SimState& state, double dt) const {
  return advance(state, dt,
                 options_.scheme == Scheme::explicit_euler ? face_rates(state.v) : Rates{});
}

SimState Evolver2d::advance(const SimState& state, double dt, const Rates& rates) const {
  require(dt > 0 && std::isfinite(dt), "evolution: dt must be positive and finite");
  require(state.u.grid && state.u.grid->same_layout(*grid_), "evolution: state on a different grid");
  const CartesianGrid& g = *grid_;
  const double area = g.cell_area();
  const auto& u = state.u.values;
  const auto& v = state.v.values;

  SimState next;
  next.u = state.u;
  next.t = state.t + dt;
  next.step_count = state.step_count + 1;
  next.u.time = next.t;

  if (options_.scheme == Scheme::explicit_euler) {
    auto& un = next.u.values;
    for (std::size_t k = 0; k < faces_.size(); ++k) {
      const Face& f = faces_[k];
      const double flux =
          (rates.forward[Eigen::Index(k)] * u[f.a] - rates.backward[Eigen::Index(k)] * u[f.b]) /
          f.distance;
      const double moved = dt * f.length / area * flux;
      un[f.a] -= moved;
      un[f.b] += moved;
    }
  } else {
    const Eigen::Index n = g.active_count();
    const auto& cells = g.active_cells();
    double vmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c : cells) vmax = std::max(vmax, v[c]);
    SparseMatrix a = implicit_->pattern;
    a.coeffs().setZero();
    Eigen::VectorXd rhs(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      a.coeffRef(k, k) = std::exp(v[cells[std::size_t(k)]] - vmax);
      rhs[k] = u[cells[std::size_t(k)]];
    }
    for (const Face& f : faces_) {
      const Eigen::Index ka = g.unknown(f.a), kb = g.unknown(f.b);
      const double delta = v[f.b] - v[f.a];
      // B(δ)e^{v_b} = B(−δ)e^{v_a}; use the form whose exponent is not positive
      const double weight = delta <= 0 ? bernoulli(delta) * std::exp(v[f.b] - vmax)
                                       : bernoulli(-delta) * std::exp(v[f.a] - vmax);
      const double c = dt * f.length / (f.distance * area) * weight;
      a.coeffRef(ka, ka) += c;
      a.coeffRef(kb, kb) += c;
      a.coeffRef(ka, kb) -= c;
      a.coeffRef(kb, ka) -= c;
    }
    implicit_->solver.factorize(a);
    if (implicit_->solver.info() != Eigen::Success)
      throw NumericalError("evolution: semi-implicit factorisation failed");
    const Eigen::VectorXd w = implicit_->solver.solve(rhs);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index c = cells[std::size_t(k)];
      next.u.values[c] = std::exp(v[c] - vmax) * w[k];
    }
  }

  for (Eigen::Index c : g.active_cells()) {
    const double x = next.u.values[c];
    if (!(x >= 0) || !std::isfinite(x)) {
      std::ostringstream os;
      os << "evolution: density " << x << " at cell (" << g.column(c) << "," << g.row(c)
         << ") after step " << next.step_count << " (t = " << next.t << ", dt = " << dt << ")";
      throw NumericalError(os.str());
    }
  }
  next.v = potential(next.u);
  return next;
}

SimState Evolver2d::step(const SimState& state, const StepControl& ctrl) const {
  if (options_.scheme == Scheme::semi_implicit) return step(state, adaptive_dt(state, ctrl));
  const Rates rates = face_rates(state.v);
  return advance(state, adaptive_dt(state, ctrl, rates), rates);
}

// --------------------------------------------------------------------------

Trajectory run(const CartesianField& u0, const RunOptions& options,
               const std::vector<TestFunction>& probes) {
  const StepControl& ctrl = options.control;
  ctrl.validate();
  require(options.snapshot_every >= 0, "run: snapshot_every must be nonnegative");
  require(options.trace_every >= 1, "run: trace_every must be at least 1");
  require(u0.grid != nullptr, "run: initial data has no grid");
  const Evolver2d evolver(u0.grid, options.evolver);
  const CartesianGrid& g = *u0.grid;

  std::vector<std::string> columns = {"t", "dt", "mass", "free_energy", "dissipation", "max_u"};
  std::vector<CartesianField> probe_fields;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    columns.push_back("pair:" + std::to_string(i));
    probe_fields.push_back(sample(u0.grid, [&](const Point& x) { return probes[i].value(x); }));
  }

  Trajectory out;
  out.traces = TraceTable(columns);
  SimState state = evolver.initial_state(u0);

  auto record = [&](const SimState& s, double dt) {
    std::vector<double> row = {s.t,
                               dt,
                               integrate(s.u),
                               free_energy(s.u, s.v),
                               options.trace_dissipation ? dissipation(s.u, s.v) : 0.0,
                               max_value(s.u)};
    for (const auto& p : probe_fields) row.push_back(pairing(p, s.u));
    out.traces.add_row(std::move(row));
  };

  record(state, 0.0);
  out.snapshots.push_back(state);
  const double t_end = state.t + ctrl.horizon;
  double last_dt = 0;
  bool traced = true, snapped = true;
  for (;;) {
    const double umax = max_value(state.u);
    if (state.t >= t_end - 1e-15 * std::abs(t_end)) {
      out.halt = HaltReason::horizon;
      break;
    }
    if (ctrl.blowup_sup_threshold ? umax >= *ctrl.blowup_sup_threshold : umax * g.cell_area() >= 1) {
      out.halt = HaltReason::blowup_threshold;
      break;
    }
    if (state.step_count >= ctrl.max_steps) {
      out.halt = HaltReason::max_steps;
      break;
    }
    const auto rates = options.evolver.scheme == Evolver2d::Scheme::explicit_euler
                           ? evolver.face_rates(state.v)
                           : Evolver2d::Rates{};
    double dt = evolver.adaptive_dt(state, ctrl, rates);
    if (dt < ctrl.dt_min) {
      out.halt = HaltReason::dt_underflow;
      break;
    }
    dt = std::min(dt, t_end - state.t);
    if (!(dt > 0)) {
      out.halt = HaltReason::horizon;
      break;
    }
    try {
      state = evolver.advance(state, dt, rates);
    } catch (const NumericalError& e) {
      throw RunFailure(e.what(), state);
    }
    last_dt = dt;
    traced = state.step_count % options.trace_every == 0;
    if (traced) record(state, dt);
    snapped = options.snapshot_every > 0 && state.step_count % options.snapshot_every == 0;
    if (snapped) out.snapshots.push_back(state);
  }
  if (!traced) record(state, last_dt);
  if (!snapped && state.step_count > 0) out.snapshots.push_back(state);
  out.final = state;
  return out;
}

}  // namespace collapse
