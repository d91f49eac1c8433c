#include "collapse/poisson_green.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <variant>

namespace collapse {

using Complex = std::complex<double>;

struct DirichletPoisson::Factorization {
  using Direct = Eigen::SimplicialLDLT<SparseMatrix>;
  using Iterative =
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>>;
  std::variant<std::unique_ptr<Direct>, std::unique_ptr<Iterative>> solver;
};

DirichletPoisson::DirichletPoisson(GridPtr grid) : DirichletPoisson(std::move(grid), Options{}) {}

DirichletPoisson::DirichletPoisson(GridPtr grid, Options options) : grid_(std::move(grid)) {
  require(grid_ != nullptr, "poisson: grid is null");
  const CartesianGrid& g = *grid_;
  const Eigen::Index n = g.active_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(std::size_t(5 * n));
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index c = g.active_cells()[std::size_t(k)];
    const int i = g.column(c), j = g.row(c);
    double diag = 0;
    for (int s = 0; s < 4; ++s) {
      const double h = di[s] != 0 ? g.hx() : g.hy();
      const int ni = i + di[s], nj = j + dj[s];
      if (g.active(ni, nj)) {
        const double w = 1.0 / (h * h);
        diag += w;
        triplets.emplace_back(k, g.unknown(g.index(ni, nj)), -w);
      } else {
        diag += 1.0 / (h * g.boundary_distance(i, j, di[s], dj[s]));
      }
    }
    triplets.emplace_back(k, k, diag);
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();

  factor_ = std::make_unique<Factorization>();
  if (n <= options.direct_limit) {
    auto direct = std::make_unique<Factorization::Direct>(matrix_);
    if (direct->info() != Eigen::Success) throw NumericalError("poisson: LDLT factorisation failed");
    factor_->solver = std::move(direct);
  } else {
    auto cg = std::make_unique<Factorization::Iterative>();
    cg->setTolerance(options.cg_tolerance);
    cg->setMaxIterations(options.cg_max_iterations);
    cg->compute(matrix_);
    if (cg->info() != Eigen::Success)
      throw NumericalError("poisson: incomplete Cholesky preconditioner failed");
    factor_->solver = std::move(cg);
  }
}

DirichletPoisson::~DirichletPoisson() = default;
DirichletPoisson::DirichletPoisson(DirichletPoisson&&) noexcept = default;
DirichletPoisson& DirichletPoisson::operator=(DirichletPoisson&&) noexcept = default;

bool DirichletPoisson::direct() const {
  return std::holds_alternative<std::unique_ptr<Factorization::Direct>>(factor_->solver);
}

Eigen::VectorXd DirichletPoisson::solve(const Eigen::VectorXd& rhs) const {
  require(rhs.size() == matrix_.rows(), "poisson: right-hand side has the wrong size");
  if (direct()) {
    const auto& s = *std::get<std::unique_ptr<Factorization::Direct>>(factor_->solver);
    Eigen::VectorXd x = s.solve(rhs);
    if (s.info() != Eigen::Success) throw NumericalError("poisson: direct solve failed");
    return x;
  }
  const auto& s = *std::get<std::unique_ptr<Factorization::Iterative>>(factor_->solver);
  Eigen::VectorXd x = s.solve(rhs);
  if (s.info() != Eigen::Success) {
    const double res = (matrix_ * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
    std::ostringstream os;
    os << "poisson: CG did not converge after " << s.iterations()
       << " iterations, relative residual " << res;
    throw NumericalError(os.str());
  }
  return x;
}

Eigen::VectorXd DirichletPoisson::gather(const CartesianField& f) const {
  require(f.grid && f.grid->same_layout(*grid_), "poisson: field lives on a different grid");
  const auto& cells = grid_->active_cells();
  Eigen::VectorXd x(Eigen::Index(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) x[Eigen::Index(k)] = f.values[cells[k]];
  return x;
}

CartesianField DirichletPoisson::scatter(const Eigen::VectorXd& x, double time) const {
  require(x.size() == grid_->active_count(), "poisson: vector has the wrong size");
  CartesianField f = zero_field<double>(grid_, time);
  const auto& cells = grid_->active_cells();
  for (std::size_t k = 0; k < cells.size(); ++k) f.values[cells[k]] = x[Eigen::Index(k)];
  return f;
}

CartesianField DirichletPoisson::solve(const CartesianField& u) const {
  return scatter(solve(gather(u)), u.time);
}

CartesianField solve_poisson_dirichlet(const CartesianField& u) {
  require(u.grid != nullptr, "poisson: field has no grid");
  return DirichletPoisson(u.grid).solve(u);
}

double quadratic_form(const CartesianField& u, const DirichletPoisson& solver) {
  return pairing(solver.solve(u), u);
}

double quadratic_form(const CartesianField& u) {
  require(u.grid != nullptr, "poisson: field has no grid");
  return quadratic_form(u, DirichletPoisson(u.grid));
}

// --------------------------------------------------------------------------
// Radial potential

namespace {

constexpr std::array<double, 5> kGaussNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                               0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights = {0.2369268850561891, 0.4786286704993665,
                                                 0.5688888888888889, 0.4786286704993665,
                                                 0.2369268850561891};

// Mass inside radius s ∈ [a,b] when u is linear on [a,b] and m(a) = ma.
double linear_mass(double a, double b, double ua, double ub, double ma, double s) {
  const double slope = (ub - ua) / (b - a);
  const double s2 = s * s - a * a;
  return ma + 2 * kPi * (ua * s2 / 2 + slope * ((s * s * s - a * a * a) / 3 - a * s2 / 2));
}

// ∫_a^b g(m(s), s) ds over each interval, with m from piecewise-linear u.
template <typename Fn>
Eigen::ArrayXd radial_pieces(const RadialField& u, Fn&& g) {
  require(u.grid != nullptr && u.values.size() == u.grid->nodes().size(),
          "radial poisson: field does not match its grid");
  const auto& r = u.grid->nodes();
  const int n = u.grid->intervals();
  Eigen::ArrayXd out(n);
  double ma = 0;
  for (int k = 0; k < n; ++k) {
    const double a = r[k], b = r[k + 1];
    CompensatedSum<double> acc;
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      const double s = 0.5 * (a + b) + 0.5 * (b - a) * kGaussNodes[q];
      acc.add(kGaussWeights[q] * g(linear_mass(a, b, u.values[k], u.values[k + 1], ma, s), s));
    }
    out[k] = 0.5 * (b - a) * acc.value();
    ma = linear_mass(a, b, u.values[k], u.values[k + 1], ma, b);
  }
  return out;
}

}  // namespace

RadialField solve_poisson_dirichlet(const RadialField& u) {
  const Eigen::ArrayXd pieces =
      radial_pieces(u, [](double m, double s) { return m / (2 * kPi * s); });
  RadialField v{u.grid, Eigen::ArrayXd::Zero(u.values.size()), u.time};
  CompensatedSum<double> acc;
  for (Eigen::Index k = pieces.size() - 1; k >= 0; --k) {
    acc.add(pieces[k]);
    v.values[k] = acc.value();
  }
  return v;
}

double quadratic_form(const RadialField& u) {
  const Eigen::ArrayXd pieces =
      radial_pieces(u, [](double m, double s) { return m * m / (2 * kPi * s); });
  CompensatedSum<double> acc;
  for (Eigen::Index k = 0; k < pieces.size(); ++k) acc.add(pieces[k]);
  return acc.value();
}

// --------------------------------------------------------------------------
// Green's function

GreenKernel GreenKernel::disk(const Point& center, double radius) {
  require(radius > 0, "green: disk radius must be positive");
  GreenKernel k;
  k.kind_ = DomainKind::disk;
  k.origin_ = center;
  k.radius_ = radius;
  return k;
}

GreenKernel GreenKernel::rectangle(const Point& origin, double lx, double ly) {
  require(lx > 0 && ly > 0, "green: rectangle sides must be positive");
  GreenKernel k;
  k.kind_ = DomainKind::rectangle;
  k.origin_ = origin;
  k.lx_ = lx;
  k.ly_ = ly;
  return k;
}

GreenKernel GreenKernel::for_grid(const CartesianGrid& grid) {
  if (grid.kind() == DomainKind::disk) return disk(grid.disk_center(), grid.disk_radius());
  return rectangle(grid.origin(), grid.lx(), grid.ly());
}

double GreenKernel::free_space(const Point& d) { return -std::log(d.norm()) / (2 * kPi); }

Eigen::Vector2d GreenKernel::free_space_gradient(const Point& d) {
  return -d / (2 * kPi * d.squaredNorm());
}

namespace {

// p(w) = (e^w − 1)/w and p′(w), by series for small |w|.
void expm1_ratio(Complex w, Complex& p, Complex& dp) {
  if (std::abs(w) >= 0.5) {
    const Complex e = std::exp(w);
    p = (e - 1.0) / w;
    dp = (e * w - (e - 1.0)) / (w * w);
    return;
  }
  p = 0;
  dp = 0;
  Complex wk = 1;  // w^k
  Complex wk1 = 0;  // w^{k-1}
  double fact = 1;  // (k+1)!
  for (int k = 0; k <= 18; ++k) {
    fact *= (k + 1);
    p += wk / fact;
    dp += double(k) * wk1 / fact;
    wk1 = wk;
    wk *= w;
  }
}

// One term of the closed-form strip series: value and derivatives of Re log(1 − e^w),
// w = −π|c|/L + iθ, with respect to c and θ.
struct LogTerm {
  double value;
  double dc;
  double dtheta;
};

LogTerm log_term(double c, double theta, double L) {
  const Complex w(-kPi * std::abs(c) / L, theta);
  const Complex e = std::exp(w);
  const Complex one_minus = 1.0 - e;
  const Complex ratio = e / one_minus;
  const double sgn = c > 0 ? 1.0 : (c < 0 ? -1.0 : 0.0);
  return {std::log(std::abs(one_minus)), (kPi * sgn / L) * ratio.real(), ratio.imag()};
}

// Same term with log|w| removed (finite as w → 0).
LogTerm log_term_regular(double c, double theta, double L) {
  const Complex w(-kPi * std::abs(c) / L, theta);
  Complex p, dp;
  expm1_ratio(w, p, dp);
  // log(1 − e^w) = log(−w) + log p(w)
  const Complex g = dp / p;  // d/dw log p
  const double sgn = c > 0 ? 1.0 : (c < 0 ? -1.0 : 0.0);
  const Complex dwdc(-kPi * sgn / L, 0);
  return {std::log(std::abs(p)), (g * dwdc).real(), (g * Complex(0, 1)).real()};
}

}  // namespace

void GreenKernel::rectangle_eval(const Point& x, const Point& xp, bool drop_singular, double* value,
                                 Eigen::Vector2d* grad) const {
  const Point a = x - origin_, b = xp - origin_;
  const double L = ly_;
  const double tp = kPi * (a.y() + b.y()) / L;
  const double tm = kPi * (a.y() - b.y()) / L;
  const double dtheta = kPi / L;
  CompensatedSum<double> val, gx, gy;
  // S(c) = (1/2π)[Re log(1 − e^{w₊}) − Re log(1 − e^{w₋})]
  auto add_strip = [&](double c, double sign, bool regular) {
    const LogTerm plus = log_term(c, tp, L);
    const LogTerm minus = regular ? log_term_regular(c, tm, L) : log_term(c, tm, L);
    const double f = sign / (2 * kPi);
    val.add(f * (plus.value - minus.value));
    gx.add(f * (plus.dc - minus.dc));
    gy.add(f * dtheta * (plus.dtheta - minus.dtheta));
    return std::abs(f * (plus.value - minus.value));
  };
  add_strip(a.x() - b.x(), 1.0, drop_singular);
  add_strip(a.x() + b.x(), -1.0, false);
  for (int j = 1; j < 1000; ++j) {
    const double shift = 2 * j * lx_;
    double size = 0;
    size += add_strip(a.x() - b.x() + shift, 1.0, false);
    size += add_strip(a.x() - b.x() - shift, 1.0, false);
    size += add_strip(a.x() + b.x() + shift, -1.0, false);
    size += add_strip(a.x() + b.x() - shift, -1.0, false);
    // image terms decay like e^{−2πj lx/ly}
    if (std::exp(-kPi * (2 * j - 1) * lx_ / L) < 1e-14 && size < 1e-14) break;
  }
  double v = val.value();
  if (drop_singular) v += -std::log(kPi / L) / (2 * kPi);
  if (value) *value = v;
  if (grad) *grad = Eigen::Vector2d(gx.value(), gy.value());
}

double GreenKernel::value(const Point& x, const Point& xp) const {
  if (kind_ == DomainKind::disk) {
    const Point a = (x - origin_) / radius_, b = (xp - origin_) / radius_;
    const double d = a.squaredNorm() * b.squaredNorm() - 2 * a.dot(b) + 1;
    return std::log(d / (a - b).squaredNorm()) / (4 * kPi);
  }
  double v;
  rectangle_eval(x, xp, false, &v, nullptr);
  return v;
}

double GreenKernel::regular(const Point& x, const Point& xp) const {
  if (kind_ == DomainKind::disk) {
    const Point a = (x - origin_) / radius_, b = (xp - origin_) / radius_;
    const double d = a.squaredNorm() * b.squaredNorm() - 2 * a.dot(b) + 1;
    return std::log(d) / (4 * kPi) + std::log(radius_) / (2 * kPi);
  }
  double v;
  rectangle_eval(x, xp, true, &v, nullptr);
  return v;
}

Eigen::Vector2d GreenKernel::regular_gradient(const Point& x, const Point& xp) const {
  if (kind_ == DomainKind::disk) {
    const Point a = (x - origin_) / radius_, b = (xp - origin_) / radius_;
    const double d = a.squaredNorm() * b.squaredNorm() - 2 * a.dot(b) + 1;
    const Eigen::Vector2d dd = 2 * b.squaredNorm() * a - 2 * b;
    return dd / (4 * kPi * d * radius_);
  }
  Eigen::Vector2d g;
  rectangle_eval(x, xp, true, nullptr, &g);
  return g;
}

Eigen::Vector2d GreenKernel::gradient(const Point& x, const Point& xp) const {
  if (kind_ == DomainKind::disk) return free_space_gradient(x - xp) + regular_gradient(x, xp);
  Eigen::Vector2d g;
  rectangle_eval(x, xp, false, nullptr, &g);
  return g;
}

double green_eval(const GreenKernel& kernel, const Point& x, const Point& xp) {
  require((x - xp).norm() > 0, "green: coincident points");
  return kernel.value(x, xp);
}

// --------------------------------------------------------------------------
// ρ_φ

double rho_phi_free(const TestFunction& phi, const Point& x, const Point& xp) {
  const Point d = x - xp;
  if (d.squaredNorm() == 0) return -phi.laplacian(x) / (4 * kPi);
  return (phi.gradient(x) - phi.gradient(xp)).dot(GreenKernel::free_space_gradient(d));
}

double rho_phi_diagonal(const GreenKernel& kernel, const TestFunction& phi, const Point& x) {
  return -phi.laplacian(x) / (4 * kPi) + 2 * phi.gradient(x).dot(kernel.regular_gradient(x, x));
}

double rho_phi(const GreenKernel& kernel, const TestFunction& phi, const Point& x,
               const Point& xp) {
  if ((x - xp).squaredNorm() == 0) return rho_phi_diagonal(kernel, phi, x);
  return phi.gradient(x).dot(kernel.gradient(x, xp)) + phi.gradient(xp).dot(kernel.gradient(xp, x));
}

namespace {

// Sources in a flat layout for the pair loops. Disk coordinates are scaled to
// the unit disk so the inner loop needs no kernel object.
struct Sources {
  std::vector<double> x, y, u;
};

Sources gather_sources(const CartesianGrid& g, const CartesianField& u, const Point& origin,
                       double scale) {
  Sources s;
  for (Eigen::Index c : g.active_cells()) {
    const Point p = (g.center(c) - origin) / scale;
    s.x.push_back(p.x());
    s.y.push_back(p.y());
    s.u.push_back(u.values[c]);
  }
  return s;
}

// Σ_{q∈[lo,hi)} ∇ₓG(a, b_q) u_q for the unit disk, times 4π. Plain sums inside
// fixed chunks, compensated across chunks, so the order never depends on data.
void disk_field(const Sources& s, std::size_t lo, std::size_t hi, double ax, double ay,
                CompensatedSum<double>& ex, CompensatedSum<double>& ey) {
  constexpr std::size_t chunk = 512;
  const double a2 = ax * ax + ay * ay;
  for (std::size_t start = lo; start < hi; start += chunk) {
    const std::size_t stop = std::min(hi, start + chunk);
    double sx = 0, sy = 0;
    for (std::size_t q = start; q < stop; ++q) {
      const double bx = s.x[q], by = s.y[q], w = s.u[q];
      const double dx = ax - bx, dy = ay - by;
      const double r2 = dx * dx + dy * dy;
      const double b2 = bx * bx + by * by;
      const double d = a2 * b2 - 2 * (ax * bx + ay * by) + 1;
      // −2(a−b)/|a−b|² + (2|b|²a − 2b)/D
      const double f = 2 * w / r2, k = 2 * w / d;
      sx += k * (b2 * ax - bx) - f * dx;
      sy += k * (b2 * ay - by) - f * dy;
    }
    ex.add(sx);
    ey.add(sy);
  }
}

// 4πR Σ_{q>p} ρ_φ(x_p, x_q) u_q for a disk of radius R, positions scaled to the unit disk.
double disk_rho_row(const Sources& s, const std::vector<double>& gx, const std::vector<double>& gy,
                    std::size_t p) {
  constexpr std::size_t chunk = 512;
  const double ax = s.x[p], ay = s.y[p], a2 = ax * ax + ay * ay;
  CompensatedSum<double> acc;
  for (std::size_t start = p + 1; start < s.x.size(); start += chunk) {
    const std::size_t stop = std::min(s.x.size(), start + chunk);
    double sum = 0;
    for (std::size_t q = start; q < stop; ++q) {
      const double bx = s.x[q], by = s.y[q];
      const double dx = ax - bx, dy = ay - by;
      const double r2 = dx * dx + dy * dy;
      const double b2 = bx * bx + by * by;
      const double d = a2 * b2 - 2 * (ax * bx + ay * by) + 1;
      // free part (∇φ_p − ∇φ_q)·(−2(a−b)/r²), regular part from both gradients
      const double free = -2 * ((gx[p] - gx[q]) * dx + (gy[p] - gy[q]) * dy) / r2;
      const double reg = 2 * (gx[p] * (b2 * ax - bx) + gy[p] * (b2 * ay - by) +
                              gx[q] * (a2 * bx - ax) + gy[q] * (a2 * by - ay)) / d;
      sum += (free + reg) * s.u[q];
    }
    acc.add(sum);
  }
  return acc.value();
}

// Σ_q ∇ₓG(x_p, x_q) u_q over q ≠ p.
Eigen::Vector2d pair_field(const GreenKernel& kernel, const CartesianGrid& g, const Sources& s,
                           std::size_t p) {
  CompensatedSum<double> ex, ey;
  if (kernel.kind() == DomainKind::disk) {
    disk_field(s, 0, p, s.x[p], s.y[p], ex, ey);
    disk_field(s, p + 1, s.x.size(), s.x[p], s.y[p], ex, ey);
    return Eigen::Vector2d(ex.value(), ey.value()) / (4 * kPi * kernel.scale());
  }
  const auto& cells = g.active_cells();
  const Point xp = g.center(cells[p]);
  for (std::size_t q = 0; q < cells.size(); ++q) {
    if (q == p || s.u[q] == 0) continue;
    const Eigen::Vector2d k = kernel.gradient(xp, g.center(cells[q]));
    ex.add(k.x() * s.u[q]);
    ey.add(k.y() * s.u[q]);
  }
  return {ex.value(), ey.value()};
}

}  // namespace

double weak_interaction(const GreenKernel& kernel, const TestFunction& phi,
                        const CartesianField& u, PairSum mode) {
  require(u.grid != nullptr, "weak_interaction: field has no grid");
  const CartesianGrid& g = *u.grid;
  const double area = g.cell_area();
  const auto& cells = g.active_cells();
  if (mode == PairSum::automatic)
    mode = g.active_count() < 128 * 128 ? PairSum::full : PairSum::restricted;

  const Sources src = gather_sources(g, u, kernel.origin(), kernel.scale());
  CompensatedSum<double> acc;
  if (mode == PairSum::full) {
    // ½ΣΣ ρ u u = Σ_{p<q} ρ(x_p,x_q) u_p u_q + ½Σ_p ρ(x_p,x_p) u_p²
    std::vector<Eigen::Vector2d> grad(cells.size());
    for (std::size_t p = 0; p < cells.size(); ++p) grad[p] = phi.gradient(g.center(cells[p]));
    std::vector<double> gx, gy;
    if (kernel.kind() == DomainKind::disk)
      for (const auto& v : grad) {
        gx.push_back(v.x());
        gy.push_back(v.y());
      }
    for (std::size_t p = 0; p < cells.size(); ++p) {
      const double up = src.u[p];
      if (up == 0) continue;
      const Point xp = g.center(cells[p]);
      acc.add(0.5 * rho_phi_diagonal(kernel, phi, xp) * up * up * area * area);
      if (kernel.kind() == DomainKind::disk) {
        const double row = disk_rho_row(src, gx, gy, p) / (4 * kPi * kernel.scale());
        acc.add(row * up * area * area);
        continue;
      }
      CompensatedSum<double> row;
      for (std::size_t q = p + 1; q < cells.size(); ++q) {
        const double uq = src.u[q];
        if (uq == 0) continue;
        const Point xq = g.center(cells[q]);
        const double r = grad[p].dot(kernel.gradient(xp, xq)) + grad[q].dot(kernel.gradient(xq, xp));
        row.add(r * uq);
      }
      acc.add(row.value() * up * area * area);
    }
    return acc.value();
  }

  for (std::size_t p = 0; p < cells.size(); ++p) {
    const double up = src.u[p];
    const Point xp = g.center(cells[p]);
    if (up == 0 || !phi.moves(xp)) continue;
    const Eigen::Vector2d field = pair_field(kernel, g, src, p);
    acc.add(up * phi.gradient(xp).dot(field) * area * area);
    acc.add(0.5 * rho_phi_diagonal(kernel, phi, xp) * up * up * area * area);
  }
  return acc.value();
}

}  // namespace collapse
