#pragma once

#include "collapse/grid_fields.hpp"
#include "collapse/poisson_green.hpp"
#include "collapse/test_function.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace collapse {

/// Named columns of doubles, one row per cadence step. The first column is time.
class TraceTable {
 public:
  TraceTable() = default;
  explicit TraceTable(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<double>& row(std::size_t i) const { return rows_[i]; }

  /// Appends a row; time must increase strictly.
  void add_row(std::vector<double> values);
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  /// Header line, then one line per row, every value printed with 17 significant digits.
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
  static TraceTable read_csv(std::istream& in);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

/// Number → text with 17 significant digits (round-trips any double).
std::string format_number(double x);

/// 𝓕 = ∫u(log u − 1) − ½⟨v,u⟩ with 0·log 0 = 0 and v the given potential.
double free_energy(const CartesianField& u, const CartesianField& v);
/// Same, with v = (−Δ)⁻¹u solved here.
double free_energy(const CartesianField& u);
/// Entropy part ∫u(log u − 1) alone.
double entropy(const CartesianField& u);

/// D = Σ_faces (ℓ/d)[B(−δ)uᵢ − B(δ)uⱼ](wᵢ − wⱼ), w = log u − v: the discrete
/// form of ∫u|∇(log u − v)|² matched to the exponentially fitted flux, so that
/// D = −d𝓕/dt for the semi-discrete scheme. Faces touching u < 1e−300 are skipped.
double dissipation(const CartesianField& u, const CartesianField& v);

struct WeakFormSample {
  double t;
  /// centred difference of ⟨φ,u⟩
  double lhs;
  double linear;       // ⟨Δφ,u⟩
  double interaction;  // ½∬ρ_φ u⊗u
  double residual;     // |lhs − linear − interaction|
};

/// Residual of d/dt⟨φ,u⟩ = ⟨Δφ,u⟩ + ½∬ρ_φ u⊗u at every interior snapshot,
/// the derivative by centred differences. Rejects φ without zero normal derivative.
std::vector<WeakFormSample> weak_form_residual(const std::vector<CartesianField>& trajectory,
                                               const TestFunction& phi,
                                               const GreenKernel& kernel,
                                               PairSum mode = PairSum::automatic);

struct PairingSample {
  double t;
  double value;
};

/// sup_t |Δ⟨φ,u⟩/Δt| / ‖∇φ‖_{C¹}; 0 when ∇φ ≡ 0.
double monotonicity_bound(const std::vector<PairingSample>& trace, const TestFunction& phi,
                          const CartesianGrid& grid);

/// Area-weighted variance of log u − v over the active cells. Needs u > 0.
double stationarity_residual(const CartesianField& u, const CartesianField& v);

}  // namespace collapse
