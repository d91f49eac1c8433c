#pragma once

#include "collapse/grid_fields.hpp"
#include "collapse/test_function.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>

namespace collapse {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Discrete −Δ with homogeneous Dirichlet data on a cell-centred grid.
///
/// Interior faces use the 5-point stencil. A face whose neighbour lies outside
/// the domain contributes 1/(h·d) to the diagonal, d being the axis distance from
/// the cell centre to the boundary (d = h/2 on rectangles, the exact circle
/// intercept on disks). The matrix stays symmetric and an M-matrix, which gives
/// the discrete maximum principle and makes ½⟨v,u⟩ a genuine quadratic form.
///
/// Up to 512² unknowns the matrix is factorised once with a sparse LDLᵀ; larger
/// systems use incomplete-Cholesky preconditioned CG. The factorisation is
/// read-only after construction, so concurrent solves are fine.
class DirichletPoisson {
 public:
  struct Options {
    Eigen::Index direct_limit = 512 * 512;
    double cg_tolerance = 1e-12;
    int cg_max_iterations = 10000;
  };

  explicit DirichletPoisson(GridPtr grid);
  DirichletPoisson(GridPtr grid, Options options);
  ~DirichletPoisson();
  DirichletPoisson(DirichletPoisson&&) noexcept;
  DirichletPoisson& operator=(DirichletPoisson&&) noexcept;

  const GridPtr& grid() const { return grid_; }
  /// −Δ_h on the active unknowns.
  const SparseMatrix& matrix() const { return matrix_; }
  bool direct() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  CartesianField solve(const CartesianField& u) const;

  Eigen::VectorXd gather(const CartesianField& f) const;
  CartesianField scatter(const Eigen::VectorXd& x, double time) const;

 private:
  struct Factorization;
  GridPtr grid_;
  SparseMatrix matrix_;
  std::unique_ptr<Factorization> factor_;
};

/// v = (−Δ)⁻¹u with v = 0 on the boundary.
CartesianField solve_poisson_dirichlet(const CartesianField& u);

/// Radial path: m(r) from u assumed linear between nodes, then
/// v(r) = ∫_r^R m(s)/(2πs) ds by 5-point Gauss–Legendre per interval. Exact
/// whenever u is piecewise linear in r.
RadialField solve_poisson_dirichlet(const RadialField& u);

/// ⟨(−Δ)⁻¹u, u⟩.
double quadratic_form(const CartesianField& u, const DirichletPoisson& solver);
double quadratic_form(const CartesianField& u);
/// Radial ⟨v,u⟩ = ∫_0^R m(r)²/(2πr) dr.
double quadratic_form(const RadialField& u);

/// Dirichlet Green's function G = Γ + K for a disk or a rectangle, with
/// Γ(x) = (1/2π) log(1/|x|).
///
/// Disk: G(x,x′) = (1/4π) log((|x|²|x′|² − 2x·x′ + 1)/|x−x′|²) in units of the
/// radius. Rectangle: the y-direction sine series summed in closed form per
/// x-image, images added until their contribution drops below 1e−14.
class GreenKernel {
 public:
  static GreenKernel disk(const Point& center, double radius);
  static GreenKernel rectangle(const Point& origin, double lx, double ly);
  static GreenKernel for_grid(const CartesianGrid& grid);

  DomainKind kind() const { return kind_; }
  /// Disk centre or rectangle corner.
  const Point& origin() const { return origin_; }
  /// Disk radius; 1 for rectangles.
  double scale() const { return kind_ == DomainKind::disk ? radius_ : 1.0; }

  double value(const Point& x, const Point& xp) const;
  static double free_space(const Point& d);
  static Eigen::Vector2d free_space_gradient(const Point& d);
  /// K = G − Γ; finite on the diagonal.
  double regular(const Point& x, const Point& xp) const;
  /// ∇ with respect to the first argument.
  Eigen::Vector2d gradient(const Point& x, const Point& xp) const;
  Eigen::Vector2d regular_gradient(const Point& x, const Point& xp) const;

 private:
  GreenKernel() = default;
  // rectangle: value/gradient of G (or of K when drop_singular) in local coordinates
  void rectangle_eval(const Point& x, const Point& xp, bool drop_singular, double* value,
                      Eigen::Vector2d* grad) const;

  DomainKind kind_ = DomainKind::disk;
  Point origin_ = Point::Zero();
  double lx_ = 1, ly_ = 1;
  double radius_ = 1;
};

/// G(x,x′); coincident points are rejected.
double green_eval(const GreenKernel& kernel, const Point& x, const Point& xp);

/// ρ_φ(x,x′) = ∇φ(x)·∇ₓG(x,x′) + ∇φ(x′)·∇ₓ′G(x,x′). On the diagonal the
/// direction-averaged limit −Δφ/(4π) of the free-space part is used.
double rho_phi(const GreenKernel& kernel, const TestFunction& phi, const Point& x,
               const Point& xp);
double rho_phi_diagonal(const GreenKernel& kernel, const TestFunction& phi, const Point& x);
/// Free-space part (∇φ(x) − ∇φ(x′))·∇Γ(x − x′).
double rho_phi_free(const TestFunction& phi, const Point& x, const Point& xp);

enum class PairSum {
  automatic,  // full below 128² active cells, restricted above
  full,       // every ordered cell pair
  restricted  // Σ_i u_i ∇φ(x_i)·Σ_j ∇ₓG(x_i,x_j) u_j over cells where ∇φ ≠ 0
};

/// ½ ∬ ρ_φ(x,x′) u(x) u(x′) by cell-pair quadrature. The restricted form is
/// the same sum regrouped with the symmetry of G; it skips pairs whose first
/// cell sees ∇φ = 0 and is exact, not a truncation.
double weak_interaction(const GreenKernel& kernel, const TestFunction& phi,
                        const CartesianField& u, PairSum mode = PairSum::automatic);

}  // namespace collapse
