#include "doctest.h"

#include "collapse/evolution2d.hpp"
#include "collapse/observables.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace collapse;

namespace {

GridPtr disk(int n) { return std::make_shared<CartesianGrid>(make_disk_grid(1, n)); }
GridPtr square(int n) { return std::make_shared<CartesianGrid>(make_cartesian_grid(1, 1, n, n)); }

CartesianField gaussian(const GridPtr& g, double mass, double width) {
  auto u = sample(g, [&](const Point& x) { return std::exp(-x.squaredNorm() / (width * width)); });
  u.values *= mass / integrate(u);
  return u;
}

}  // namespace

TEST_CASE("trace table round trip") {
  TraceTable t({"t", "mass", "free_energy"});
  t.add_row({0.0, 1.0 / 3.0, -2.164624});
  t.add_row({1e-7, std::nextafter(1.0 / 3.0, 1.0), -1e300});
  t.add_row({0.25, 12.566370614359172, 4.9e-324});
  std::istringstream in(t.to_csv());
  const auto back = TraceTable::read_csv(in);
  REQUIRE(back.rows() == 3);
  CHECK(back.columns() == t.columns());
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(back.row(r)[c] == t.row(r)[c]);
  CHECK(back.to_csv() == t.to_csv());
  CHECK(t.to_csv().substr(0, 21) == "t,mass,free_energy\n0,");
}

TEST_CASE("trace table rejects malformed input") {
  TraceTable t({"t", "x"});
  t.add_row({1.0, 2.0});
  CHECK_THROWS_AS(t.add_row({1.0, 3.0}), PreconditionError);
  CHECK_THROWS_AS(t.add_row({0.5, 3.0}), PreconditionError);
  CHECK_THROWS_AS(t.add_row({2.0}), PreconditionError);
  CHECK_THROWS_AS(t.column("y"), PreconditionError);
  CHECK(t.has_column("x"));
  std::istringstream bad("t,x\n0,1\n1,abc\n");
  CHECK_THROWS_AS(TraceTable::read_csv(bad), PreconditionError);
  std::istringstream empty("");
  CHECK_THROWS_AS(TraceTable::read_csv(empty), PreconditionError);
}

TEST_CASE("free energy of the uniform density on the disk") {
  const GridPtr g = disk(256);
  const auto u = sample(g, [](const Point&) { return 1 / kPi; });
  // −log π − 1 = −2.144729..., ½⟨v,u⟩ = 1/(16π)
  CHECK(entropy(u) == doctest::Approx(-2.144729).epsilon(1e-2));
  CHECK(0.5 * quadratic_form(u) == doctest::Approx(0.0198944).epsilon(2e-2));
  CHECK(free_energy(u) == doctest::Approx(-2.164624).epsilon(1e-2));
  // the mask only changes the area; per unit of masked area the entropy is exact
  const double area = double(g->active_count()) * g->cell_area();
  CHECK(entropy(u) / area == doctest::Approx((-std::log(kPi) - 1) / kPi).epsilon(1e-14));
  CHECK(free_energy(zero_field<double>(g)) == 0.0);
}

TEST_CASE("free energy scales with mass as the formula says") {
  // independent quadrature: 𝓕(2u) = 2∫u(log u − 1) + 2 log 2 ∫u − 4·½⟨v,u⟩
  const GridPtr g = disk(64);
  const auto u = gaussian(g, 5.0, 0.4);
  auto u2 = u;
  u2.values *= 2;
  const auto v = solve_poisson_dirichlet(u);
  double ent = 0, pot = 0, mass = 0;
  for (auto c : g->active_cells()) {
    const double x = u.values[c];
    ent += x * (std::log(x) - 1) * g->cell_area();
    pot += x * v.values[c] * g->cell_area();
    mass += x * g->cell_area();
  }
  CHECK(free_energy(u) == doctest::Approx(ent - 0.5 * pot).epsilon(1e-10));
  CHECK(free_energy(u2) == doctest::Approx(2 * ent + 2 * std::log(2.0) * mass - 2 * pot).epsilon(1e-8));
}

TEST_CASE("dissipation vanishes exactly on Boltzmann states") {
  const GridPtr g = square(32);
  const auto v = sample(g, [](const Point& x) { return std::sin(4 * x.x()) + x.y() * x.y(); });
  auto u = v;
  u.values = 3 * v.values.exp();
  CHECK(std::abs(dissipation(u, v)) <= 1e-10);
  CHECK(stationarity_residual(u, v) <= 1e-28);
}

TEST_CASE("dissipation is positive away from equilibrium") {
  const GridPtr g = disk(48);
  const auto u = sample(g, [](const Point&) { return 2.0; });
  CHECK(dissipation(u, solve_poisson_dirichlet(u)) > 0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(0.1, 3);
  for (int k = 0; k < 20; ++k) {
    const auto w = sample(g, [&](const Point&) { return uni(rng); });
    CHECK(dissipation(w, solve_poisson_dirichlet(w)) >= 0);
  }
  // dry cells are skipped, not turned into infinities
  auto dry = u;
  dry.values.head(g->cell_count() / 2).setZero();
  CHECK(std::isfinite(dissipation(dry, solve_poisson_dirichlet(dry))));
}

TEST_CASE("dissipation matches the free-energy decay rate") {
  const GridPtr g = disk(64);
  RunOptions o;
  o.control.horizon = 0.01;
  const auto tr = run(gaussian(g, 4 * kPi, 0.3), o);
  const auto t = tr.traces.column("t");
  const auto F = tr.traces.column("free_energy");
  const auto D = tr.traces.column("dissipation");
  int checked = 0;
  for (std::size_t k = 1; k + 1 < t.size(); k += 15) {
    const double rate = (F[k + 1] - F[k - 1]) / (t[k + 1] - t[k - 1]);
    CHECK(-rate == doctest::Approx(D[k]).epsilon(0.05));
    ++checked;
  }
  CHECK(checked > 5);
}

TEST_CASE("stationarity residual") {
  const GridPtr g = square(16);
  const auto v = sample(g, [](const Point& x) { return x.x() + 2 * x.y() * x.y(); });
  const auto u = sample(g, [](const Point&) { return 0.7; });
  // log u constant: the residual is the variance of v
  double mean = 0, sq = 0;
  const double n = double(g->active_count());
  for (auto c : g->active_cells()) mean += v.values[c] / n;
  for (auto c : g->active_cells()) sq += (v.values[c] - mean) * (v.values[c] - mean) / n;
  CHECK(stationarity_residual(u, v) == doctest::Approx(sq).epsilon(1e-12));
  // multiplying u shifts log u by a constant
  const auto w = sample(g, [](const Point& x) { return 1 + x.x() * x.y(); });
  auto w5 = w;
  w5.values *= 5;
  CHECK(stationarity_residual(w5, v) == doctest::Approx(stationarity_residual(w, v)).epsilon(1e-12));
  CHECK_THROWS_AS(stationarity_residual(zero_field<double>(g), v), PreconditionError);
}

TEST_CASE("weak form with the constant test function is mass conservation") {
  const GridPtr g = disk(48);
  RunOptions o;
  o.control.horizon = 0.005;
  o.snapshot_every = 3;
  o.trace_every = 1000;
  const auto tr = run(gaussian(g, 6 * kPi, 0.3), o);
  std::vector<CartesianField> snaps;
  for (const auto& s : tr.snapshots) snaps.push_back(s.u);
  const auto kernel = GreenKernel::for_grid(*g);
  const auto r = weak_form_residual(snaps, TestFunction::constant(), kernel);
  CHECK(r.size() == snaps.size() - 2);
  for (const auto& s : r) {
    CHECK(s.residual <= 1e-12);
    CHECK(s.linear == 0);
    CHECK(s.interaction == 0);
  }
}

TEST_CASE("weak form of a frozen field reports the right-hand side") {
  const GridPtr g = disk(32);
  auto u = gaussian(g, 3.0, 0.4);
  std::vector<CartesianField> frozen;
  for (double t : {0.0, 0.1, 0.2}) {
    u.time = t;
    frozen.push_back(u);
  }
  const auto kernel = GreenKernel::for_grid(*g);
  const auto phi = TestFunction::bump(Point(0.1, 0.0), 0.5);
  const auto r = weak_form_residual(frozen, phi, kernel);
  REQUIRE(r.size() == 1);
  CHECK(r[0].lhs == 0);
  CHECK(r[0].residual == doctest::Approx(std::abs(r[0].linear + r[0].interaction)).epsilon(1e-15));
  CHECK(r[0].residual > 0);
  CHECK(r[0].interaction == doctest::Approx(weak_interaction(kernel, phi, u)).epsilon(1e-15));
}

TEST_CASE("weak form rejects bad input") {
  const GridPtr g = square(16);
  const auto u = sample(g, [](const Point&) { return 1.0; });
  const auto kernel = GreenKernel::for_grid(*g);
  CHECK_THROWS_AS(weak_form_residual({u, u}, TestFunction::constant(), kernel), PreconditionError);
  auto a = u, b = u, c = u;
  b.time = 1;
  c.time = 2;
  // x² has a nonzero normal derivative on x = 1
  CHECK_THROWS_AS(weak_form_residual({a, b, c}, TestFunction::polynomial({{1.0, 2, 0}}), kernel),
                  PreconditionError);
  CHECK_THROWS_AS(weak_form_residual({c, b, a}, TestFunction::constant(), kernel), PreconditionError);
}

TEST_CASE("monotonicity bound") {
  const auto grid = make_disk_grid(1, 32);
  std::vector<PairingSample> trace;
  for (int k = 0; k < 12; ++k) trace.push_back({0.1 * k, std::sin(0.3 * k)});
  CHECK(monotonicity_bound(trace, TestFunction::constant(), grid) == 0);

  const auto phi = TestFunction::bump(Point::Zero(), 0.5);
  const double c1 = monotonicity_bound(trace, phi, grid);
  // φ → 2φ doubles the pairings and the norm
  auto doubled = trace;
  for (auto& s : doubled) s.value *= 2;
  CHECK(monotonicity_bound(doubled, phi.scaled(2), grid) == doctest::Approx(c1).epsilon(1e-14));
  double worst = 0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    worst = std::max(worst, std::abs(trace[k].value - trace[k - 1].value) / 0.1);
  CHECK(c1 == doctest::Approx(worst / phi.gradient_c1_norm(grid)).epsilon(1e-12));

  trace.resize(7);
  CHECK_THROWS_AS(monotonicity_bound(trace, phi, grid), PreconditionError);
}
