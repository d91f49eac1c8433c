#include "collapse/grid_fields.hpp"

#include <algorithm>
#include <cmath>

namespace collapse {

CartesianGrid::CartesianGrid(DomainKind kind, Point origin, double lx, double ly, int nx, int ny)
    : kind_(kind), origin_(std::move(origin)), lx_(lx), ly_(ly), nx_(nx), ny_(ny) {
  require(lx > 0 && ly > 0, "grid: domain lengths must be positive");
  require(nx >= 8 && ny >= 8, "grid: at least 8 cells per direction are required");
  hx_ = lx / nx;
  hy_ = ly / ny;
  radius_ = kind == DomainKind::disk ? std::min(lx, ly) / 2 : 0.5 * std::hypot(lx, ly);
  unknown_.assign(std::size_t(cell_count()), -1);
  const Point c0 = disk_center();
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const bool inside =
          kind_ == DomainKind::rectangle || (center(i, j) - c0).norm() < radius_;
      if (inside) {
        unknown_[std::size_t(index(i, j))] = Eigen::Index(active_.size());
        active_.push_back(index(i, j));
      }
    }
  require(!active_.empty(), "grid: mask has no active cells");
}

bool CartesianGrid::contains(const Point& x) const {
  if (kind_ == DomainKind::disk) return (x - disk_center()).norm() < radius_;
  const Point d = x - origin_;
  return d.x() >= 0 && d.y() >= 0 && d.x() <= lx_ && d.y() <= ly_;
}

double CartesianGrid::boundary_distance(int i, int j, int di, int dj) const {
  const double h = di != 0 ? hx_ : hy_;
  if (kind_ == DomainKind::rectangle) return 0.5 * h;
  // Ray from the cell centre along the axis until it leaves the disk.
  const Point p = center(i, j) - disk_center();
  const double along = di != 0 ? p.x() * di : p.y() * dj;
  const double across = di != 0 ? p.y() : p.x();
  const double reach = std::sqrt(std::max(0.0, radius_ * radius_ - across * across)) - along;
  return std::clamp(reach, 1e-6 * h, h);
}

double CartesianGrid::domain_area() const {
  return kind_ == DomainKind::disk ? kPi * radius_ * radius_ : lx_ * ly_;
}

bool CartesianGrid::same_layout(const CartesianGrid& o) const {
  return kind_ == o.kind_ && nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_ &&
         origin_ == o.origin_;
}

std::vector<Face> interior_faces(const CartesianGrid& grid) {
  std::vector<Face> faces;
  faces.reserve(std::size_t(2 * grid.active_count()));
  for (Eigen::Index c : grid.active_cells()) {
    const int i = grid.column(c), j = grid.row(c);
    if (grid.active(i + 1, j)) faces.push_back({c, grid.index(i + 1, j), grid.hy(), grid.hx()});
    if (grid.active(i, j + 1)) faces.push_back({c, grid.index(i, j + 1), grid.hx(), grid.hy()});
  }
  return faces;
}

CartesianGrid make_cartesian_grid(double lx, double ly, int nx, int ny) {
  return CartesianGrid(DomainKind::rectangle, Point::Zero(), lx, ly, nx, ny);
}

CartesianGrid make_disk_grid(double radius, int n) {
  require(radius > 0, "disk grid: radius must be positive");
  return CartesianGrid(DomainKind::disk, Point(-radius, -radius), 2 * radius, 2 * radius, n, n);
}

double total_mass(const MeasureSnapshot& measure) {
  CompensatedSum<double> acc;
  for (const auto& atom : measure.atoms) acc.add(atom.mass);
  if (measure.density) acc.add(integrate(*measure.density));
  return acc.value();
}

// --------------------------------------------------------------------------

RadialGrid::RadialGrid(double radius, Eigen::ArrayXd nodes, double grading)
    : radius_(radius), grading_(grading), nodes_(std::move(nodes)) {
  require(nodes_.size() >= 33, "radial grid: at least 32 intervals are required");
  require(nodes_[0] == 0.0, "radial grid: first node must be the origin");
  for (Eigen::Index k = 1; k < nodes_.size(); ++k)
    require(nodes_[k] > nodes_[k - 1], "radial grid: nodes must increase strictly");
}

RadialGrid make_radial_grid(double radius, int n, double grading) {
  require(radius > 0, "radial grid: radius must be positive");
  require(n >= 32, "radial grid: at least 32 intervals are required");
  require(grading > 0 && grading <= 1, "radial grid: grading must lie in (0,1]");
  Eigen::ArrayXd nodes(n + 1);
  if (grading == 1.0) {
    for (int k = 0; k <= n; ++k) nodes[k] = radius * k / n;
    return RadialGrid(radius, std::move(nodes), grading);
  }
  const double q = 1.0 / grading;
  const int graded = std::min(n / 2, int(std::ceil(std::log(1e6) / std::log(q))));
  const double geometric = (1.0 - std::pow(q, -graded)) / (q - 1.0);
  const double outer = radius / (geometric + (n - graded));
  nodes[0] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double dr = k < graded ? outer * std::pow(q, k - graded) : outer;
    nodes[k + 1] = nodes[k] + dr;
  }
  nodes[n] = radius;
  return RadialGrid(radius, std::move(nodes), grading);
}

namespace {

// ∫_{x0}^{x1} of the quadratic through (a,fa),(b,fb),(c,fc).
double quadratic_integral(double a, double b, double c, double fa, double fb, double fc,
                          double x0, double x1) {
  // Newton form p(x) = fa + d1 (x-a) + d2 (x-a)(x-b).
  const double d1 = (fb - fa) / (b - a);
  const double d2 = ((fc - fb) / (c - b) - d1) / (c - a);
  auto antiderivative = [&](double x) {
    const double s = x - a;
    // (x-a)(x-b) = s^2 - (b-a) s
    return fa * s + d1 * s * s / 2 + d2 * (s * s * s / 3 - (b - a) * s * s / 2);
  };
  return antiderivative(x1) - antiderivative(x0);
}

}  // namespace

Eigen::ArrayXd interval_integrals(const RadialGrid& grid, const Eigen::ArrayXd& g) {
  const int n = grid.intervals();
  const auto& r = grid.nodes();
  Eigen::ArrayXd out(n);
  for (int k = 0; k < n; ++k) {
    // Average the two quadratics that share this interval, when both exist.
    double sum = 0;
    int count = 0;
    if (k >= 1) {
      sum += quadratic_integral(r[k - 1], r[k], r[k + 1], g[k - 1], g[k], g[k + 1], r[k], r[k + 1]);
      ++count;
    }
    if (k + 2 <= n) {
      sum += quadratic_integral(r[k], r[k + 1], r[k + 2], g[k], g[k + 1], g[k + 2], r[k], r[k + 1]);
      ++count;
    }
    out[k] = sum / count;
  }
  return out;
}

double integrate_nodes(const RadialGrid& grid, const Eigen::ArrayXd& g) {
  const int n = grid.intervals();
  const auto& r = grid.nodes();
  CompensatedSum<double> acc;
  int k = 0;
  for (; k + 2 <= n; k += 2)
    acc.add(quadratic_integral(r[k], r[k + 1], r[k + 2], g[k], g[k + 1], g[k + 2], r[k], r[k + 2]));
  if (k < n)
    acc.add(quadratic_integral(r[k - 1], r[k], r[k + 1], g[k - 1], g[k], g[k + 1], r[k], r[k + 1]));
  return acc.value();
}

double integrate(const RadialField& u) {
  const Eigen::ArrayXd g = 2 * kPi * u.grid->nodes() * u.values;
  return integrate_nodes(*u.grid, g);
}

Eigen::ArrayXd cumulative_mass(const RadialField& u) {
  const Eigen::ArrayXd g = 2 * kPi * u.grid->nodes() * u.values;
  const Eigen::ArrayXd pieces = interval_integrals(*u.grid, g);
  Eigen::ArrayXd m(pieces.size() + 1);
  CompensatedSum<double> acc;
  m[0] = 0;
  for (Eigen::Index k = 0; k < pieces.size(); ++k) {
    acc.add(pieces[k]);
    m[k + 1] = acc.value();
  }
  return m;
}

double local_mass(const RadialField& u, double radius) {
  require(radius > 0, "local_mass: radius must be positive");
  const Eigen::ArrayXd m = cumulative_mass(u);
  const auto& r = u.grid->nodes();
  if (radius >= r[r.size() - 1]) return m[m.size() - 1];
  const auto it = std::upper_bound(r.data(), r.data() + r.size(), radius);
  const Eigen::Index k = (it - r.data()) - 1;
  const double w = (radius - r[k]) / (r[k + 1] - r[k]);
  return (1 - w) * m[k] + w * m[k + 1];
}

double max_value(const RadialField& f) { return f.values.maxCoeff(); }

}  // namespace collapse
