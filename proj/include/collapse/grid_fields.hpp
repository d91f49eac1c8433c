#pragma once

#include "collapse/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace collapse {

enum class DomainKind { rectangle, disk };

/// Uniform cell-centred grid over an axis-aligned box. Disk domains use the
/// bounding square with a cell-centre mask; masked cells carry no unknowns.
class CartesianGrid {
 public:
  CartesianGrid(DomainKind kind, Point origin, double lx, double ly, int nx, int ny);

  DomainKind kind() const { return kind_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double h_min() const { return std::min(hx_, hy_); }
  double cell_area() const { return hx_ * hy_; }
  const Point& origin() const { return origin_; }

  /// Disk centre and radius; for rectangles, the box centre and half-diagonal.
  Point disk_center() const { return origin_ + Point(lx_ / 2, ly_ / 2); }
  double disk_radius() const { return radius_; }

  Eigen::Index cell_count() const { return Eigen::Index(nx_) * ny_; }
  Eigen::Index index(int i, int j) const { return Eigen::Index(j) * nx_ + i; }
  int column(Eigen::Index c) const { return int(c % nx_); }
  int row(Eigen::Index c) const { return int(c / nx_); }
  Point center(int i, int j) const {
    return origin_ + Point((i + 0.5) * hx_, (j + 0.5) * hy_);
  }
  Point center(Eigen::Index c) const { return center(column(c), row(c)); }

  bool in_range(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
  bool active(Eigen::Index c) const { return unknown_[c] >= 0; }
  bool active(int i, int j) const { return in_range(i, j) && active(index(i, j)); }

  /// Number of active cells; unknown k lives in cell active_cells()[k].
  Eigen::Index active_count() const { return Eigen::Index(active_.size()); }
  const std::vector<Eigen::Index>& active_cells() const { return active_; }
  Eigen::Index unknown(Eigen::Index c) const { return unknown_[c]; }

  /// True when x lies inside the continuous domain (closed box or open disk).
  bool contains(const Point& x) const;

  /// Distance from the centre of active cell (i,j) to the domain boundary along
  /// the axis direction (di,dj), used where that neighbour is not active.
  double boundary_distance(int i, int j, int di, int dj) const;

  /// Domain area of the continuous domain (not of the mask).
  double domain_area() const;

  bool same_layout(const CartesianGrid& other) const;

 private:
  DomainKind kind_;
  Point origin_;
  double lx_, ly_;
  int nx_, ny_;
  double hx_, hy_;
  double radius_;
  std::vector<Eigen::Index> active_;
  std::vector<Eigen::Index> unknown_;
};

using GridPtr = std::shared_ptr<const CartesianGrid>;

/// Face between two active cells, a before b in storage order. The flux
/// through it is scaled by length/distance.
struct Face {
  Eigen::Index a;
  Eigen::Index b;
  double length;
  double distance;
};

/// Interior faces in a fixed order: for each active cell, its +x then +y face.
std::vector<Face> interior_faces(const CartesianGrid& grid);

/// Rectangle [0,lx]×[0,ly] with nx×ny cells (nx, ny ≥ 8).
CartesianGrid make_cartesian_grid(double lx, double ly, int nx, int ny);
/// Disk of the given radius centred at the origin, masked on an n×n grid.
CartesianGrid make_disk_grid(double radius, int n);

/// Radial nodes 0 = r_0 < … < r_n = R. With grading < 1 the spacing grows
/// geometrically (ratio 1/grading) out of the origin until it reaches the
/// uniform outer spacing; the graded zone spans up to six decades of spacing.
class RadialGrid {
 public:
  RadialGrid(double radius, Eigen::ArrayXd nodes, double grading);

  double radius() const { return radius_; }
  double grading() const { return grading_; }
  /// Number of intervals n; there are n+1 nodes.
  int intervals() const { return int(nodes_.size()) - 1; }
  const Eigen::ArrayXd& nodes() const { return nodes_; }
  double node(int k) const { return nodes_[k]; }
  double spacing(int k) const { return nodes_[k + 1] - nodes_[k]; }
  bool uniform() const { return grading_ == 1.0; }

 private:
  double radius_;
  double grading_;
  Eigen::ArrayXd nodes_;
};

using RadialGridPtr = std::shared_ptr<const RadialGrid>;

RadialGrid make_radial_grid(double radius, int n, double grading);

/// Cell-centred samples of a density or potential. Masked cells hold zero.
template <typename Scalar = double>
struct BasicCartesianField {
  GridPtr grid;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values;
  Scalar time{0};
};

/// Node samples of a radially symmetric density or potential.
template <typename Scalar = double>
struct BasicRadialField {
  RadialGridPtr grid;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values;
  Scalar time{0};
};

using CartesianField = BasicCartesianField<double>;
using RadialField = BasicRadialField<double>;

/// Atoms plus an absolutely continuous remainder.
struct MeasureSnapshot {
  struct Atom {
    Point point;
    double mass;
  };
  std::vector<Atom> atoms;
  std::optional<CartesianField> density;
};

double total_mass(const MeasureSnapshot& measure);

// --------------------------------------------------------------------------
// Summation with a fixed order and Neumaier compensation. Every reduction in
// the library goes through here so repeated runs reproduce bit for bit.

template <typename Scalar>
class CompensatedSum {
 public:
  void add(Scalar x) {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  Scalar value() const { return sum_ + carry_; }

 private:
  Scalar sum_{0};
  Scalar carry_{0};
};

template <typename Scalar>
BasicCartesianField<Scalar> zero_field(GridPtr grid, Scalar time = Scalar(0)) {
  BasicCartesianField<Scalar> f{grid, {}, time};
  f.values.setZero(grid->cell_count());
  return f;
}

/// Samples fn(x) at every active cell centre.
template <typename Fn>
CartesianField sample(GridPtr grid, Fn&& fn, double time = 0.0) {
  CartesianField f = zero_field<double>(grid, time);
  for (Eigen::Index c : grid->active_cells()) f.values[c] = fn(grid->center(c));
  return f;
}

template <typename Fn>
RadialField sample(RadialGridPtr grid, Fn&& fn, double time = 0.0) {
  RadialField f{grid, Eigen::ArrayXd(grid->nodes().size()), time};
  for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values[k] = fn(grid->node(int(k)));
  return f;
}

/// ∫ f over the active cells (cell-sum quadrature).
template <typename Scalar>
Scalar integrate(const BasicCartesianField<Scalar>& f) {
  CompensatedSum<Scalar> acc;
  for (Eigen::Index c : f.grid->active_cells()) acc.add(f.values[c]);
  return acc.value() * Scalar(f.grid->cell_area());
}

/// Weighted pairing ⟨g, f⟩ over active cells.
template <typename Scalar>
Scalar pairing(const BasicCartesianField<Scalar>& f, const BasicCartesianField<Scalar>& g) {
  CompensatedSum<Scalar> acc;
  for (Eigen::Index c : f.grid->active_cells()) acc.add(f.values[c] * g.values[c]);
  return acc.value() * Scalar(f.grid->cell_area());
}

/// Mass of the cells whose centres lie in the closed ball B(center, radius).
template <typename Scalar>
Scalar local_mass(const BasicCartesianField<Scalar>& f, const Point& center, double radius) {
  require(radius > 0, "local_mass: radius must be positive");
  const double r2 = radius * radius;
  CompensatedSum<Scalar> acc;
  for (Eigen::Index c : f.grid->active_cells())
    if ((f.grid->center(c) - center).squaredNorm() <= r2) acc.add(f.values[c]);
  return acc.value() * Scalar(f.grid->cell_area());
}

template <typename Scalar>
Scalar max_value(const BasicCartesianField<Scalar>& f) {
  Scalar m = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index c : f.grid->active_cells()) m = std::max(m, f.values[c]);
  return m;
}

template <typename Scalar>
Scalar min_value(const BasicCartesianField<Scalar>& f) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index c : f.grid->active_cells()) m = std::min(m, f.values[c]);
  return m;
}

// Radial quadrature. Interval integrals use the quadratic through three
// neighbouring nodes, so smooth integrands converge at third order or better.

/// ∫_{r_k}^{r_{k+1}} g(r) dr for each interval, g sampled at nodes.
Eigen::ArrayXd interval_integrals(const RadialGrid& grid, const Eigen::ArrayXd& g);

/// ∫_0^R g(r) dr (nonuniform composite Simpson).
double integrate_nodes(const RadialGrid& grid, const Eigen::ArrayXd& g);

/// ∫_{disk} u = 2π ∫ r u(r) dr.
double integrate(const RadialField& u);

/// m(r_k) = ∫_{B(0,r_k)} u, one entry per node.
Eigen::ArrayXd cumulative_mass(const RadialField& u);

/// Mass in B(0, radius), linear interpolation of the cumulative mass between nodes.
double local_mass(const RadialField& u, double radius);

double max_value(const RadialField& f);

}  // namespace collapse
