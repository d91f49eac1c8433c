#pragma once

#include "collapse/grid_fields.hpp"
#include "collapse/step_control.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace collapse {

/// Cumulative mass m(r_k, t) = ∫_{B(0,r_k)} u. With m the radial system reads
///   m_t = m_rr − m_r/r + m·m_r/(2πr),   m(0) = 0,   m(R) = λ,
/// and the Dirichlet value of the potential never enters.
struct RadialMassProfile {
  RadialGridPtr grid;
  Eigen::ArrayXd m;
  double time = 0;

  double mass() const { return m[m.size() - 1]; }
};

/// m from a nodal density (quadratic quadrature of 2πru).
RadialMassProfile mass_profile(const RadialField& u);
/// m(r) = λ(1 − e^{−r²/w²})/(1 − e^{−R²/w²}): a Gaussian of width w truncated to the disk.
RadialMassProfile gaussian_mass_profile(RadialGridPtr grid, double mass, double width);

/// Spatial operator L[m] = m_rr + a·m_r with a = (m/2π − 1)/r at the interior
/// nodes, central differences on the nonuniform grid. Entries 0 and n are zero.
Eigen::ArrayXd radial_operator(const RadialMassProfile& p);

/// One linearly implicit step: coefficients frozen at the current profile,
/// three-point operator solved implicitly (tridiagonal). Where the central
/// drift stencil would lose an M-matrix sign the node falls back to upwinding.
/// Throws NumericalError if m loses monotonicity.
RadialMassProfile step_radial(const RadialMassProfile& p, double dt);

/// u(r_k) = m_r/(2πr); u(0) from the fit m ≈ c₁r² + c₂r⁴ at r_1, r_2.
RadialField reconstruct_density(const RadialMassProfile& p);
/// u(0) alone, cheaper than the full reconstruction.
double central_density(const RadialMassProfile& p);

/// 𝓕 = ∫u(log u − 1) − ∫ m²/(4πr) dr.
double radial_free_energy(const RadialMassProfile& p);
/// D = ∫ m_t²/m_r dr with m_t = L[m].
double radial_dissipation(const RadialMassProfile& p);

/// dt = cfl·min(dt_max, 1/u(0)). The implicit diffusion needs no h² bound.
double radial_adaptive_dt(const RadialMassProfile& p, const StepControl& ctrl);

struct RadialSample {
  double t;
  double dt;
  double sup_u;
  double mass;
  /// NaN unless the run traces the free energy.
  double free_energy = std::numeric_limits<double>::quiet_NaN();
};

struct RadialRunOptions {
  StepControl control;
  /// Record one sample every this many steps (the first and last are always kept).
  long sample_every = 1;
  /// Also keep the profile whenever sup u has grown by this factor since the last kept one.
  double snapshot_growth = 0;
  bool trace_free_energy = false;
};

struct RadialRun {
  RadialMassProfile final;
  std::vector<RadialSample> samples;
  std::vector<RadialMassProfile> snapshots;
  HaltReason halt = HaltReason::horizon;
  long steps = 0;
};

/// Thrown by run_radial when a step fails; carries the last good profile.
class RadialRunFailure : public NumericalError {
 public:
  RadialRunFailure(const std::string& what, RadialMassProfile last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const RadialMassProfile& last_good() const { return last_good_; }

 private:
  RadialMassProfile last_good_;
};

RadialRun run_radial(const RadialMassProfile& initial, const RadialRunOptions& options);

// --------------------------------------------------------------------------
// Blowup time

struct SupSample {
  double t;
  double sup;
};

struct BlowupFit {
  /// False when the window is not increasing or the fit does not extrapolate past it.
  bool blowup = false;
  double T_est = 0;
  double slope = 0;
  double intercept = 0;
  /// max |fit residual| of 1/sup over the window, relative to the range of 1/sup.
  double residual = 0;
  /// Raised when residual exceeds the threshold: the 1/(T−t) model does not fit.
  bool residual_flag = false;
  std::size_t samples = 0;
};

inline constexpr double kBlowupResidualThreshold = 1e-2;

/// Least-squares fit 1/sup = α + βt over the given samples; T_est = −α/β.
/// Needs at least 8 samples.
BlowupFit estimate_blowup_time(const std::vector<SupSample>& window);

/// The trailing samples over which sup grows by the given factor (at least 8 kept).
std::vector<SupSample> final_window(const std::vector<RadialSample>& samples, double growth);

struct BlowupVerdict {
  bool blowup = false;
  BlowupFit fit;
  /// Ratio of the last dt to the first dt over the window; blowup needs < 1.
  double dt_trend = 1;
};

/// Blowup needs both a good 1/sup fit (residual below threshold) and shrinking steps.
BlowupVerdict blowup_verdict(const std::vector<RadialSample>& samples, double growth = 1.5);

// --------------------------------------------------------------------------
// Collapse mass

struct CollapseEstimate {
  double T_est = 0;
  double t_final = 0;
  /// R(t_final) = (T_est − t_final)^{1/2}.
  double envelope_radius = 0;
  struct Scale {
    double b;
    double r;
    double mass;
  };
  std::vector<Scale> mass_at_scales;
  /// Richardson over the last two rungs, (4 m(b_{k−1}) − m(b_k))/3 for a
  /// doubling: removes the b² growth of the regular part's contribution.
  double extrapolated_collapse_mass = 0;
  /// |m(b_last) − m(b_prev)| / m(b_prev).
  double ladder_spread = 0;
  bool convergence_flag = false;
  /// Mass left outside the largest ball, λ − m(b_last·R).
  double residual_mass = 0;
};

inline constexpr double kLadderTolerance = 0.02;

/// Ball masses at r = b·R for each rung, R = (T_est − t_final)^{1/2}, and the
/// Richardson limit (q·m_prev − m_last)/(q − 1), q = (b_last/b_prev)².
/// Throws PreconditionError when T_est does not lie past t_final.
CollapseEstimate ladder_estimate(double t_final, double T_est, double total_mass,
                                 const std::vector<double>& ladder,
                                 const std::function<double(double)>& mass_within_radius);

/// The ladder on the mass profile, centred at the origin.
CollapseEstimate extract_collapse_mass(const RadialMassProfile& p_final, double T_est,
                                       const std::vector<double>& ladder = {1, 2, 4, 8, 16});

/// Richardson extrapolation in the grid: (2^p·fine − coarse)/(2^p − 1).
double richardson_resolution(double coarse, double fine, double order = 2.0);

}  // namespace collapse
