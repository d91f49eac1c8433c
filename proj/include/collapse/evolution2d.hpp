#pragma once

#include "collapse/grid_fields.hpp"
#include "collapse/observables.hpp"
#include "collapse/poisson_green.hpp"
#include "collapse/step_control.hpp"
#include "collapse/test_function.hpp"

#include <memory>
#include <string>
#include <vector>

namespace collapse {

struct SimState {
  CartesianField u;
  CartesianField v;
  double t = 0;
  long step_count = 0;
};

/// Finite-volume integrator for u_t = Δu − ∇·(u∇v), −Δv = u, null flux for u
/// and v = 0 on the boundary.
///
/// Face fluxes are exponentially fitted (Scharfetter–Gummel). For a frozen v the
/// explicit step is a reversible Markov step with stationary density ∝ e^v, so
/// mass is conserved by telescoping, positivity holds whenever dt·outflow ≤ 1,
/// and states with log u − v constant are reproduced exactly. Because the
/// quadratic part of 𝓕 is concave in u, refreshing v after the step keeps 𝓕
/// nonincreasing.
///
/// The semi-implicit option takes the same flux implicitly in u with v frozen
/// over the step, which gives an SPD system in w = u e^{−v}.
class Evolver2d {
 public:
  enum class Scheme { explicit_euler, semi_implicit };
  enum class Drift {
    coupled,  // v from the Poisson solve
    none      // test hook: v ≡ 0, pure heat flow with null flux
  };
  struct Options {
    Scheme scheme = Scheme::explicit_euler;
    Drift drift = Drift::coupled;
  };

  explicit Evolver2d(GridPtr grid);
  Evolver2d(GridPtr grid, Options options);
  ~Evolver2d();
  Evolver2d(Evolver2d&&) noexcept;
  Evolver2d& operator=(Evolver2d&&) noexcept;

  const GridPtr& grid() const { return grid_; }
  const Options& options() const { return options_; }
  const DirichletPoisson& poisson() const { return poisson_; }

  /// (u0, v(u0)) at t = u0.time. Rejects negative or identically zero data.
  SimState initial_state(const CartesianField& u0) const;
  CartesianField potential(const CartesianField& u) const;

  /// Explicit: cfl·min(h²/4, h/max|∇v|, 1/max u, 1/max outflow, dt_max), where the
  /// outflow rate Σ_faces ℓB(−δ)/(d·|cell|) is what positivity needs.
  /// Semi-implicit: cfl·min(h/max|∇v|, 1/max u, dt_max).
  double adaptive_dt(const SimState& state, const StepControl& ctrl) const;

  /// One step of size dt followed by the Poisson refresh. Throws NumericalError
  /// on a negative density.
  SimState step(const SimState& state, double dt) const;
  SimState step(const SimState& state, const StepControl& ctrl) const;

 private:
  friend struct Trajectory run(const CartesianField&, const struct RunOptions&,
                               const std::vector<TestFunction>&);
  struct Implicit;
  struct Rates {
    Eigen::ArrayXd forward;   // B(−δ) per face, a → b
    Eigen::ArrayXd backward;  // B(δ) per face, b → a
  };
  Rates face_rates(const CartesianField& v) const;
  double adaptive_dt(const SimState& state, const StepControl& ctrl, const Rates& rates) const;
  SimState advance(const SimState& state, double dt, const Rates& rates) const;

  GridPtr grid_;
  Options options_;
  DirichletPoisson poisson_;
  std::vector<Face> faces_;
  std::unique_ptr<Implicit> implicit_;
};

struct RunOptions {
  StepControl control;
  /// Keep a snapshot every this many steps (0: first and last only).
  long snapshot_every = 0;
  /// Append a trace row every this many steps (first and last always).
  long trace_every = 1;
  /// Include the dissipation column (one extra pass over faces per row).
  bool trace_dissipation = true;
  Evolver2d::Options evolver;
};

struct Trajectory {
  std::vector<SimState> snapshots;
  TraceTable traces;
  HaltReason halt = HaltReason::horizon;
  SimState final;
};

/// Trace columns: t, dt, mass, free_energy, dissipation, max_u, then one
/// "pair:<i>" column per probe holding ⟨φᵢ,u⟩.
/// Thrown by run when a step fails; carries the last good state.
class RunFailure : public NumericalError {
 public:
  RunFailure(const std::string& what, SimState last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const SimState& last_good() const { return last_good_; }

 private:
  SimState last_good_;
};

Trajectory run(const CartesianField& u0, const RunOptions& options,
               const std::vector<TestFunction>& probes = {});

}  // namespace collapse
