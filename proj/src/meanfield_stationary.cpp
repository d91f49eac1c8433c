#include "collapse/meanfield_stationary.hpp"

#include "collapse/poisson_green.hpp"
#include "collapse/radial_core.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace collapse {

namespace {

// −Δ on the unknowns plus quadrature weights for ∫e^v. Nodes pinned at v = 0
// (the radial boundary node) contribute boundary_weight·e^0.
struct Discrete {
  SparseMatrix A;
  Eigen::VectorXd w;
  double boundary_weight = 0;
  double total_weight = 0;
};

double exp_integral(const Discrete& d, const Eigen::VectorXd& v) {
  return d.w.dot(v.array().exp().matrix()) + d.boundary_weight;
}

// ‖A v − λe^v/∫e^v‖∞ with c eliminated.
double certificate(const Discrete& d, const Eigen::VectorXd& v, double lambda) {
  const Eigen::VectorXd u = (lambda / exp_integral(d, v)) * v.array().exp().matrix();
  return (d.A * v - u).lpNorm<Eigen::Infinity>();
}

// Fornberg's recursion: weights of derivatives 0..m at z for the nodes x.
Eigen::MatrixXd fornberg(double z, const std::vector<double>& x, int m) {
  const int n = int(x.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, m + 1);
  double c1 = 1, c4 = x[0] - z;
  c(0, 0) = 1;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1;
    const double c5 = c4;
    c4 = x[std::size_t(i)] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[std::size_t(i)] - x[std::size_t(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c;
}

Discrete discretise(const CartesianGrid& grid, const DirichletPoisson& poisson) {
  Discrete d;
  d.A = poisson.matrix();
  d.w = Eigen::VectorXd::Constant(d.A.rows(), grid.cell_area());
  d.total_weight = d.w.sum();
  return d;
}

Discrete discretise(const RadialGridPtr& grid) {
  require(grid->grading() == 1.0, "meanfield: the radial solver needs a uniform grid");
  const int n = grid->intervals();
  const double h = grid->radius() / n;
  std::vector<Eigen::Triplet<double>> triplets;
  auto add_row = [&](int k, int first, int last, double factor_d2, double factor_d1) {
    std::vector<double> x;
    for (int j = first; j <= last; ++j) x.push_back(j * h);
    const Eigen::MatrixXd c = fornberg(k * h, x, 2);
    for (int j = first; j <= last; ++j) {
      const int col = std::abs(j);  // v is even in r
      if (col >= n) continue;       // v(R) = 0
      const double weight = factor_d2 * c(j - first, 2) + factor_d1 * c(j - first, 1);
      triplets.emplace_back(k, col, -weight);
    }
  };
  add_row(0, -2, 2, 2.0, 0.0);  // Δv(0) = 2v″(0)
  for (int k = 1; k <= n - 2; ++k) add_row(k, k - 2, k + 2, 1.0, 1.0 / (k * h));
  add_row(n - 1, n - 5, n, 1.0, 1.0 / ((n - 1) * h));
  Discrete d;
  d.A.resize(n, n);
  d.A.setFromTriplets(triplets.begin(), triplets.end());

  // weights of the grid's own quadrature, read off unit vectors
  RadialField e{grid, Eigen::ArrayXd::Zero(n + 1), 0.0};
  d.w.resize(n);
  for (int k = 0; k <= n; ++k) {
    e.values.setZero();
    e.values[k] = 1;
    const double wk = integrate(e);
    if (k < n)
      d.w[k] = wk;
    else
      d.boundary_weight = wk;
  }
  d.total_weight = d.w.sum() + d.boundary_weight;
  return d;
}

// Arclength constraint ⟨τ, X − X_pred⟩ = 0 in the weighted norm, with X = (v, λ).
struct Arclength {
  Eigen::VectorXd tv;
  double tlambda = 0;
  Eigen::VectorXd pv;
  double plambda = 0;
};

struct Point3 {
  Eigen::VectorXd v;
  double lambda = 0;
};

double weighted_dot(const Discrete& d, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return d.w.dot(a.cwiseProduct(b)) / d.total_weight;
}

double row_sum_norm(const SparseMatrix& A) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator e(A, k); e; ++e) rows[e.row()] += std::abs(e.value());
  return rows.maxCoeff();
}

struct NewtonResult {
  bool converged = false;
  Eigen::VectorXd v;
  double lambda = 0;
  double residual = 0;
  int iterations = 0;
  std::string failure;
};

// Newton on (v, c) at fixed λ, or on (v, c, λ) with the arclength row.
NewtonResult newton(const Discrete& d, Eigen::VectorXd v, double lambda, const Arclength* arc,
                    const MeanFieldOptions& opt) {
  const Eigen::Index N = d.A.rows();
  const Eigen::Index size = N + 1 + (arc ? 1 : 0);
  double c = std::log(lambda / exp_integral(d, v));
  NewtonResult out;
  double residual = certificate(d, v, lambda);
  // A v cancels to round-off: the residual cannot go below about ε‖A‖‖v‖
  const double norm_A = row_sum_norm(d.A);
  auto target = [&] {
    const double umax = (lambda / exp_integral(d, v)) * v.array().exp().maxCoeff();
    return opt.tolerance * (1 + umax) +
           2 * std::numeric_limits<double>::epsilon() * norm_A * v.lpNorm<Eigen::Infinity>();
  };

  for (int it = 0;; ++it) {
    out.iterations = it;
    if (!std::isfinite(residual)) {
      out.failure = "non-finite iterate";
      break;
    }
    if (residual <= target()) {
      out.converged = true;
      break;
    }
    if (it == opt.max_iterations) {
      out.failure = "no convergence";
      break;
    }

    const Eigen::VectorXd u = (v.array() + c).exp().matrix();
    Eigen::VectorXd F(size);
    F.head(N) = d.A * v - u;
    F[N] = d.w.dot(u) + d.boundary_weight * std::exp(c) - lambda;
    if (arc) F[N + 1] = weighted_dot(d, arc->tv, v - arc->pv) + arc->tlambda * (lambda - arc->plambda);

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(std::size_t(d.A.nonZeros() + 4 * N + 4));
    for (int k = 0; k < d.A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator e(d.A, k); e; ++e) t.emplace_back(e.row(), e.col(), e.value());
    for (Eigen::Index k = 0; k < N; ++k) {
      t.emplace_back(k, k, -u[k]);
      t.emplace_back(k, N, -u[k]);
      t.emplace_back(N, k, d.w[k] * u[k]);
    }
    t.emplace_back(N, N, d.w.dot(u) + d.boundary_weight * std::exp(c));
    if (arc) {
      t.emplace_back(N, N + 1, -1.0);
      for (Eigen::Index k = 0; k < N; ++k)
        t.emplace_back(N + 1, k, d.w[k] * arc->tv[k] / d.total_weight);
      t.emplace_back(N + 1, N + 1, arc->tlambda);
    }
    SparseMatrix J(size, size);
    J.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      out.failure = "singular Jacobian";
      break;
    }
    const Eigen::VectorXd dx = lu.solve(F);
    if (lu.info() != Eigen::Success || !dx.allFinite()) {
      out.failure = "singular Jacobian";
      break;
    }

    // backtrack on the certificate; on a branch the arclength row is linear and
    // is kept by any full step, so only fixed-λ solves are damped
    double step = 1;
    Eigen::VectorXd vn;
    double cn = c, ln = lambda, rn = residual;
    for (int halving = 0; halving <= (arc ? 0 : 10); ++halving, step *= 0.5) {
      vn = v - step * dx.head(N);
      cn = c - step * dx[N];
      ln = arc ? lambda - step * dx[N + 1] : lambda;
      rn = ln > 0 ? certificate(d, vn, ln) : std::numeric_limits<double>::infinity();
      if (rn < residual || arc) break;
    }
    const double update = step * dx.head(N).lpNorm<Eigen::Infinity>();
    v = std::move(vn);
    c = cn;
    lambda = ln;
    residual = rn;
    // round-off floor: the update no longer moves v
    if (std::isfinite(residual) && update <= 1e-13 * (1 + v.lpNorm<Eigen::Infinity>()) && it >= 1) {
      out.iterations = it + 1;
      out.converged = true;
      break;
    }
  }
  out.v = std::move(v);
  out.lambda = lambda;
  out.residual = residual;
  return out;
}

[[noreturn]] void fail(const NewtonResult& r, double lambda) {
  std::ostringstream msg;
  msg << "meanfield: " << r.failure << " at lambda = " << lambda << " after " << r.iterations
      << " iterations, residual " << r.residual;
  if (r.failure == "singular Jacobian") msg << "; follow the branch with continue_branch";
  throw NumericalError(msg.str());
}

// Everything that differs between the planar and the radial problem.
struct PlanarProblem {
  GridPtr grid;
  DirichletPoisson poisson;
  Discrete d;
  explicit PlanarProblem(GridPtr g) : grid(g), poisson(g), d(discretise(*g, poisson)) {}
  Eigen::VectorXd unknowns(const CartesianField& f) const {
    require(f.grid == grid || f.grid->cell_count() == grid->cell_count(),
            "meanfield: initial guess lives on another grid");
    return poisson.gather(f);
  }
  CartesianField field(const Eigen::VectorXd& v) const { return poisson.scatter(v, 0.0); }
};

struct RadialProblem {
  RadialGridPtr grid;
  Discrete d;
  explicit RadialProblem(RadialGridPtr g) : grid(g), d(discretise(g)) {}
  Eigen::VectorXd unknowns(const RadialField& f) const {
    require(f.values.size() == grid->intervals() + 1, "meanfield: initial guess lives on another grid");
    return f.values.head(grid->intervals()).matrix();
  }
  RadialField field(const Eigen::VectorXd& v) const {
    RadialField f{grid, Eigen::ArrayXd::Zero(grid->intervals() + 1), 0.0};
    f.values.head(grid->intervals()) = v.array();
    return f;
  }
};

template <typename Problem, typename Field>
BasicMeanFieldState<Field> make_state(const Problem& p, const NewtonResult& r, double s) {
  BasicMeanFieldState<Field> st;
  st.v = p.field(r.v);
  st.lambda = r.lambda;
  st.newton_residual = r.residual;
  st.branch_parameter = s;
  st.iterations = r.iterations;
  return st;
}

template <typename Problem, typename Field>
BasicMeanFieldState<Field> solve(const Problem& p, double lambda, const Field* guess,
                                 const MeanFieldOptions& opt) {
  require(std::isfinite(lambda) && lambda > 0, "meanfield: lambda must be positive");
  require(opt.tolerance > 0 && opt.max_iterations > 0, "meanfield: bad Newton options");
  const Eigen::VectorXd v0 = guess ? p.unknowns(*guess) : Eigen::VectorXd::Zero(p.d.A.rows());
  const auto r = newton(p.d, v0, lambda, nullptr, opt);
  if (!r.converged) fail(r, lambda);
  return make_state<Problem, Field>(p, r, 0.0);
}

template <typename Problem, typename Field>
Branch<BasicMeanFieldState<Field>> follow(const Problem& p, double lambda_start, double lambda_end,
                                          int steps, const BranchOptions& opt, const Field* guess) {
  require(steps >= 0, "continue_branch: steps must be nonnegative");
  require(lambda_end > 0, "continue_branch: lambda_end must be positive");
  require(opt.max_halvings >= 0, "continue_branch: max_halvings must be nonnegative");
  const Discrete& d = p.d;
  Branch<BasicMeanFieldState<Field>> out;
  out.states.push_back(solve(p, lambda_start, guess, opt.newton));
  if (steps == 0 || lambda_end == lambda_start) return out;

  auto norm = [&](const Eigen::VectorXd& dv, double dl) { return std::sqrt(weighted_dot(d, dv, dv) + dl * dl); };
  const double direction = lambda_end > lambda_start ? 1 : -1;
  double ds = std::abs(lambda_end - lambda_start) / steps;
  double s = 0;
  Point3 prev{p.unknowns(out.states.back().v), lambda_start};
  Point3 before_prev;
  bool have_secant = false;

  for (int step = 0; step < steps; ++step) {
    bool accepted = false;
    for (int halving = 0; halving <= opt.max_halvings && !accepted; ++halving, ds *= 0.5) {
      NewtonResult r;
      if (!have_secant) {
        // first step in the natural parameter
        const double target = prev.lambda + direction * std::min(ds, std::abs(lambda_end - prev.lambda));
        r = newton(d, prev.v, target, nullptr, opt.newton);
      } else {
        Arclength arc;
        const double len = norm(prev.v - before_prev.v, prev.lambda - before_prev.lambda);
        arc.tv = (prev.v - before_prev.v) / len;
        arc.tlambda = (prev.lambda - before_prev.lambda) / len;
        arc.pv = prev.v + ds * arc.tv;
        arc.plambda = prev.lambda + ds * arc.tlambda;
        if (arc.plambda <= 0) continue;
        r = newton(d, arc.pv, arc.plambda, &arc, opt.newton);
        if (r.converged && (r.lambda - lambda_end) * direction > 0) {
          // overshoot: land on λ_end from the secant interpolant
          const double theta = (lambda_end - prev.lambda) / (r.lambda - prev.lambda);
          const Eigen::VectorXd g = prev.v + theta * (r.v - prev.v);
          r = newton(d, g, lambda_end, nullptr, opt.newton);
        }
      }
      if (!r.converged) continue;
      s += norm(r.v - prev.v, r.lambda - prev.lambda);
      before_prev = prev;
      prev = {r.v, r.lambda};
      have_secant = true;
      out.states.push_back(make_state<Problem, Field>(p, r, s));
      accepted = true;
      ds *= 2;  // undo the loop's halving
      if (r.iterations <= 4) ds *= 1.5;
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "continuation stalled at lambda = " << prev.lambda << " after " << out.states.size()
          << " states";
      out.completed = false;
      out.report = msg.str();
      return out;
    }
    if (prev.lambda == lambda_end) break;
  }
  return out;
}

template <typename Field>
Field density(const BasicMeanFieldState<Field>& st) {
  Field u = st.v;
  u.values = st.v.values.exp();
  if constexpr (std::is_same_v<Field, CartesianField>) {
    for (Eigen::Index c = 0; c < u.values.size(); ++c)
      if (!st.v.grid->active(c)) u.values[c] = 0;
  }
  u.values *= st.lambda / integrate(u);
  return u;
}

}  // namespace

MeanFieldState solve_meanfield(GridPtr grid, double lambda, const CartesianField* guess,
                               const MeanFieldOptions& options) {
  require(grid != nullptr, "meanfield: grid is null");
  return solve(PlanarProblem(std::move(grid)), lambda, guess, options);
}

RadialMeanFieldState solve_meanfield(RadialGridPtr grid, double lambda, const RadialField* guess,
                                     const MeanFieldOptions& options) {
  require(grid != nullptr, "meanfield: grid is null");
  return solve(RadialProblem(std::move(grid)), lambda, guess, options);
}

Branch<MeanFieldState> continue_branch(GridPtr grid, double lambda_start, double lambda_end, int steps,
                                       const BranchOptions& options, const CartesianField* guess) {
  require(grid != nullptr, "continue_branch: grid is null");
  return follow(PlanarProblem(std::move(grid)), lambda_start, lambda_end, steps, options, guess);
}

Branch<RadialMeanFieldState> continue_branch(RadialGridPtr grid, double lambda_start, double lambda_end,
                                             int steps, const BranchOptions& options,
                                             const RadialField* guess) {
  require(grid != nullptr, "continue_branch: grid is null");
  return follow(RadialProblem(std::move(grid)), lambda_start, lambda_end, steps, options, guess);
}

CartesianField to_density(const MeanFieldState& state) { return density(state); }
RadialField to_density(const RadialMeanFieldState& state) { return density(state); }

double closed_form_mu(double lambda) {
  require(lambda >= 0 && lambda < kCollapseMass, "closed form: lambda must lie in [0, 8π)");
  return lambda / (kCollapseMass - lambda);
}

double closed_form_potential(double lambda, double r, double R) {
  const double mu = closed_form_mu(lambda);
  const double x = r / R;
  return 2 * std::log((1 + mu) / (1 + mu * x * x));
}

TraceTable branch_table(const Branch<MeanFieldState>& branch) {
  TraceTable t({"arclength", "lambda", "v_max", "residual", "free_energy"});
  for (const auto& s : branch.states)
    t.add_row({s.branch_parameter, s.lambda, max_value(s.v), s.newton_residual,
               free_energy(to_density(s), s.v)});
  return t;
}

TraceTable branch_table(const Branch<RadialMeanFieldState>& branch) {
  TraceTable t({"arclength", "lambda", "v_max", "residual", "free_energy"});
  for (const auto& s : branch.states)
    t.add_row({s.branch_parameter, s.lambda, max_value(s.v), s.newton_residual,
               radial_free_energy(mass_profile(to_density(s)))});
  return t;
}

}  // namespace collapse
