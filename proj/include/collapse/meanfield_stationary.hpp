#pragma once

#include "collapse/grid_fields.hpp"
#include "collapse/observables.hpp"

#include <vector>

namespace collapse {

/// Stationary states: −Δv = λe^v/∫e^v in Ω, v = 0 on ∂Ω.
///
/// Newton runs on the pair (v, c) with u = e^{v+c}:
///   A v − e^{v+c} = 0,   ∫e^{v+c} − λ = 0,
/// where A is the discrete −Δ. The Jacobian is sparse apart from one dense
/// border row and column, and it stays regular where the Gelfand block
/// A − diag(u) alone turns singular (on the unit disk at λ = 4π). Continuation
/// adds λ as an unknown and a pseudo-arclength row.
template <typename Field>
struct BasicMeanFieldState {
  Field v;
  double lambda = 0;
  /// ‖A v − λe^v/∫e^v‖∞ at acceptance.
  double newton_residual = 0;
  /// Arclength coordinate along a branch (0 for a single solve).
  double branch_parameter = 0;
  int iterations = 0;
};

using MeanFieldState = BasicMeanFieldState<CartesianField>;
using RadialMeanFieldState = BasicMeanFieldState<RadialField>;

/// Converged when the residual is at most tolerance·(1 + max u), or when the
/// Newton update has reached round-off.
struct MeanFieldOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// 2D problem with the same five-point matrix as the Poisson solver, so that
/// to_density(state) is an exact discrete fixed point of the evolution scheme.
/// guess: nullptr means v = 0.
MeanFieldState solve_meanfield(GridPtr grid, double lambda, const CartesianField* guess = nullptr,
                               const MeanFieldOptions& options = {});

/// Radially symmetric problem on a uniform radial grid: fourth-order stencils for
/// v″ + v′/r with the mirror condition v(−r) = v(r) at the origin, and the
/// grid's Simpson weights for ∫e^v.
RadialMeanFieldState solve_meanfield(RadialGridPtr grid, double lambda,
                                     const RadialField* guess = nullptr,
                                     const MeanFieldOptions& options = {});

struct BranchOptions {
  MeanFieldOptions newton;
  /// Halve the arclength step at most this many times per step before giving up.
  int max_halvings = 12;
};

template <typename State>
struct Branch {
  std::vector<State> states;
  /// False when a step could not be completed within max_halvings.
  bool completed = true;
  std::string report;
};

/// Pseudo-arclength continuation from λ_start towards λ_end in at most `steps`
/// steps, secant predictor after the first natural-parameter step. The step
/// starts at |λ_end − λ_start|/steps, grows by 1.5 after easy corrections and halves on failure. The branch
/// ends at λ_end (solved exactly there) or when the step size underflows.
Branch<MeanFieldState> continue_branch(GridPtr grid, double lambda_start, double lambda_end,
                                       int steps, const BranchOptions& options = {},
                                       const CartesianField* guess = nullptr);
Branch<RadialMeanFieldState> continue_branch(RadialGridPtr grid, double lambda_start,
                                             double lambda_end, int steps,
                                             const BranchOptions& options = {},
                                             const RadialField* guess = nullptr);

/// u = λe^v/∫e^v with the discretisation's own quadrature, so ∫u = λ to round-off.
CartesianField to_density(const MeanFieldState& state);
RadialField to_density(const RadialMeanFieldState& state);

/// Closed-form radial family on the disk of radius R:
/// v = 2 log((1+μ)/(1+μr²/R²)), λ = 8πμ/(1+μ).
double closed_form_mu(double lambda);
double closed_form_potential(double lambda, double r, double R = 1.0);

/// Columns: arclength, lambda, v_max, residual, free_energy.
TraceTable branch_table(const Branch<MeanFieldState>& branch);
TraceTable branch_table(const Branch<RadialMeanFieldState>& branch);

}  // namespace collapse
