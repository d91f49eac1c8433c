#pragma once

#include "collapse/grid_fields.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace collapse {

/// Quintic smoothstep S(t) = 10t³ − 15t⁴ + 6t⁵ on [0,1], clamped outside.
/// C² with S(0)=0, S(1)=1 and vanishing first and second derivatives at both ends.
struct Smoothstep {
  static double value(double t);
  static double d1(double t);
  static double d2(double t);
};

/// Smooth test functions with analytic value, gradient and Hessian. The
/// admissible class for the weak form has zero normal derivative on the boundary.
class TestFunction {
 public:
  enum class Kind { constant, polynomial, bump, cutoff };

  struct Monomial {
    double coefficient;
    int px;
    int py;
  };

  /// φ ≡ value.
  static TestFunction constant(double value = 1.0);
  /// φ = Σ c x^px y^py in absolute coordinates.
  static TestFunction polynomial(std::vector<Monomial> terms);
  /// φ = A (1 − |x−c|²/r²)⁴ inside B(c,r), 0 outside. C³.
  static TestFunction bump(const Point& center, double radius, double amplitude = 1.0);
  /// φ = 1 on B(c,r/2), 0 outside B(c,r), quintic smoothstep in between. C².
  static TestFunction cutoff(const Point& center, double radius);

  Kind kind() const { return kind_; }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }
  double amplitude() const { return amplitude_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  std::string describe() const;

  double value(const Point& x) const;
  Eigen::Vector2d gradient(const Point& x) const;
  Eigen::Matrix2d hessian(const Point& x) const;
  double laplacian(const Point& x) const { return hessian(x).trace(); }

  /// False where ∇φ vanishes identically in a neighbourhood of x.
  bool moves(const Point& x) const;

  /// ‖∇φ‖_{C¹} = sup|∇φ| + sup‖D²φ‖ from closed forms of the profile; for
  /// polynomials, a bound from monomial maxima over the grid's bounding box.
  double gradient_c1_norm(const CartesianGrid& grid) const;

  /// Whether ∂φ/∂ν vanishes on the boundary of the grid's domain (sampled).
  bool admissible(const CartesianGrid& grid) const;

  TestFunction scaled(double factor) const;

 private:
  TestFunction(Kind kind) : kind_(kind) {}
  // radial profile f(ρ) and derivatives for bump/cutoff
  void profile(double rho, double& f, double& f1, double& f2) const;

  Kind kind_;
  Point center_ = Point::Zero();
  double radius_ = 0;
  double amplitude_ = 1;
  std::vector<Monomial> terms_;
};

}  // namespace collapse
