#pragma once

#include "collapse/evolution2d.hpp"
#include "collapse/radial_core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace collapse {

/// z(y,s) = (T−t)·u(x,t) with y = (x−x₀)/R(t), R(t) = (T−t)^{1/2}, s = −log(T−t).
/// z lives on the image of the grid under x ↦ y (same index layout, spacing h/R);
/// cells whose y lies outside the window |y| ≤ b_window carry zero.
struct RescaledSnapshot {
  CartesianField z;
  double t = 0;
  double T_est = 0;
  double s = 0;
  Point x0 = Point::Zero();
  double b_window = 0;

  double envelope_radius() const { return std::sqrt(T_est - t); }
  /// ∫_{|y|≤b} z dy.
  double mass(double b) const;
};

/// Radial counterpart: the mass profile in y, M(y) = m(yR).
struct RadialRescaledSnapshot {
  RadialMassProfile profile;
  double T_est = 0;
  double s = 0;
  double b_window = 0;

  double t() const { return profile.time; }
  double envelope_radius() const { return std::sqrt(T_est - profile.time); }
  double mass(double b) const;
  /// z at the nodes with |y| ≤ b_window, as (y, z) pairs.
  std::vector<std::pair<double, double>> samples() const;
};

/// Throws PreconditionError when t ≥ T_est, x0 lies outside the domain or b_window ≤ 0.
RescaledSnapshot backward_rescale(const CartesianField& u, const Point& x0, double T_est,
                                  double b_window);
RadialRescaledSnapshot backward_rescale(const RadialMassProfile& p, double T_est, double b_window);

// --------------------------------------------------------------------------
// Parabolic envelope

struct EnvelopeSample {
  double t;
  double envelope_radius;
  double mass;
};

/// Local mass in B(x0, bR(t)) per snapshot with t < T_est.
std::vector<EnvelopeSample> envelope_mass_trace(const std::vector<SimState>& snapshots,
                                                const Point& x0, double T_est, double b);
std::vector<EnvelopeSample> envelope_mass_trace(const std::vector<RadialMassProfile>& snapshots,
                                                double T_est, double b);

struct EnvelopeLadder {
  std::vector<double> ladder;
  /// One trace per rung, same order as the ladder.
  std::vector<std::vector<EnvelopeSample>> traces;
  /// |m(b_last) − m(b_prev)| / m(b_prev) at the last snapshot.
  double flatness = 0;
};

EnvelopeLadder envelope_ladder(const std::vector<RadialMassProfile>& snapshots, double T_est,
                               const std::vector<double>& ladder = {1, 2, 4, 8, 16});

/// Times t′ with R(t′) = f·R(t): t′ = T − f²(T − t). Factors above 1 look back in time.
std::vector<double> time_ladder(double t, double T_est, const std::vector<double>& factors = {2, 4, 8});

/// Blowup-time fit on a 2D trace (columns t and max_u), final window where
/// max_u grows by the given factor.
BlowupFit fit_blowup_time(const TraceTable& traces, double growth = 1.5);
BlowupVerdict blowup_verdict(const TraceTable& traces, double growth = 1.5);

/// Centre of the cell holding max u (lowest index on ties).
Point blowup_point(const CartesianField& u);

/// The b-ladder on B(x0, bR) for a 2D field at time u.time.
CollapseEstimate extract_collapse_mass(const CartesianField& u, const Point& x0, double T_est,
                                       const std::vector<double>& ladder = {1, 2, 4, 8, 16});

// --------------------------------------------------------------------------
// Rescaled moments

/// I_b(s) = ∫_{|y|≤b} |y|² z(y,s) dy.
double rescaled_second_moment(const RescaledSnapshot& snapshot, double b);
/// Radial form by parts: b²M(b) − 2∫_0^b yM(y) dy.
double rescaled_second_moment(const RadialRescaledSnapshot& snapshot, double b);

/// Limit value m²/2π − 4m of the rescaled second moment for collapse mass m.
double second_moment_target(double collapse_mass);

/// Cutoffs in closed piecewise-polynomial form.
///  c-moment: c(α) = α − 1 on [0, 1/4], a quintic-smoothstep primitive on
///    [1/4, 7/4], 0 from 7/4 on; C³, −1 ≤ c ≤ 0, 0 ≤ c′ ≤ 1.
///  phi-annulus: φ(ρ) = 1 on [0, r/2], 0 from r on, 1 − S(2ρ/r − 1) between.
class Cutoff {
 public:
  enum class Kind { c_moment, phi_annulus };

  Kind kind() const { return kind_; }
  double radius() const { return radius_; }
  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;

 private:
  friend Cutoff make_cutoff(Kind kind, double radius);
  Kind kind_ = Kind::c_moment;
  double radius_ = 0;
};

/// radius is ignored for c_moment and must be positive for phi_annulus.
Cutoff make_cutoff(Cutoff::Kind kind, double radius = 0);

/// ⟨c(β⁻²|x−x0|²) + 1, u⟩ for a c-moment cutoff.
double local_second_moment(const CartesianField& u, const Point& x0, const Cutoff& c, double beta);
double local_second_moment(const RescaledSnapshot& z, const Cutoff& c, double beta);

// --------------------------------------------------------------------------
// Bubbles

enum class PeelKind { compact, vanishing, dichotomy };
std::string to_string(PeelKind k);

struct Peel {
  PeelKind kind = PeelKind::compact;
  Point center = Point::Zero();
  /// Ball radius in y units.
  double radius = 0;
  double mass = 0;
  /// Whether the ball misses every earlier one.
  bool disjoint = true;
};

struct BubbleOptions {
  /// Plateau tolerance and the ±band around 8π for a compact bubble.
  double epsilon = 0.5;
  /// Stop once the unpeeled mass falls below this.
  double epsilon0 = 1.0;
  int max_peels = 16;
};

struct BubbleSet {
  /// Compact peels whose mass lies within ε of 8π.
  std::vector<Peel> bubbles;
  /// Every peel in order, bubbles included.
  std::vector<Peel> peels;
  /// max z outside all peeled balls.
  double exterior_sup = 0;
  double remaining_mass = 0;
  /// How the peeling stopped: vanishing (sup z ≤ ε), mass (remaining < ε0) or peel_limit.
  std::string stop_reason;
  std::size_t count() const { return bubbles.size(); }
  bool disjoint() const;
};

/// Greedy peeling: take the largest unpeeled z (lowest cell index on ties),
/// grow dyadic balls (only those inside the data) until the mass changes by less than ε over one doubling
/// (once the ball holds at least ε0),
/// record the outer ball, mask it and repeat.
BubbleSet detect_bubbles(const RescaledSnapshot& z, const BubbleOptions& options = {});
/// Radial snapshots can only hold a bubble at the origin.
BubbleSet detect_bubbles(const RadialRescaledSnapshot& z, const BubbleOptions& options = {});

// --------------------------------------------------------------------------
// ε-regularity

struct EpsBall {
  Point center;
  double radius;
  double t0;
};

struct EpsRegularityReport {
  EpsBall ball;
  /// ‖u(t0)‖_{L¹(B(x0,R))}.
  double premise_mass = 0;
  bool premise = false;
  /// sup over the window of R²·max u on B(x0,R/2): a candidate for C₅.
  double scaled_sup = 0;
  /// Snapshots do not cover [t0 − σ0R², t0 + σ0R²].
  bool inconclusive = false;
  std::size_t snapshots_used = 0;
};

/// Premise from the snapshot nearest t0; the window must lie inside the
/// snapshot times, otherwise the report is inconclusive.
EpsRegularityReport check_eps_regularity(const std::vector<SimState>& snapshots, const EpsBall& ball,
                                         double epsilon0 = 1.0, double sigma0 = 0.25);

/// Random balls with centres inside the domain (at least R from its edge),
/// radii in [r_min, r_max] and t0 in [t_min, t_max]. Deterministic in seed.
std::vector<EpsBall> random_balls(const CartesianGrid& grid, std::size_t count, std::uint64_t seed,
                                  double r_min, double r_max, double t_min, double t_max);

struct EpsSweep {
  std::vector<EpsRegularityReport> coarse;
  std::vector<EpsRegularityReport> fine;
  /// max scaled_sup over premise-true conclusive balls.
  double constant_coarse = 0;
  double constant_fine = 0;
  /// Premise true on both grids and the fine scaled sup above twice the coarse one.
  std::size_t violations = 0;
  std::size_t premise_true = 0;
};

EpsSweep eps_regularity_sweep(const std::vector<SimState>& coarse, const std::vector<SimState>& fine,
                              const std::vector<EpsBall>& balls, double epsilon0 = 1.0,
                              double sigma0 = 0.25);

}  // namespace collapse
