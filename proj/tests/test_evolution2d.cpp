#include "doctest.h"

#include "collapse/evolution2d.hpp"
#include "collapse/radial_core.hpp"

#include <cmath>
#include <random>

using namespace collapse;

namespace {

GridPtr square(int n) { return std::make_shared<CartesianGrid>(make_cartesian_grid(1, 1, n, n)); }
GridPtr disk(int n) { return std::make_shared<CartesianGrid>(make_disk_grid(1, n)); }

CartesianField gaussian(const GridPtr& g, double mass, double width, const Point& c = Point::Zero()) {
  auto u = sample(g, [&](const Point& x) { return std::exp(-(x - c).squaredNorm() / (width * width)); });
  u.values *= mass / integrate(u);
  return u;
}

double sup_distance(const CartesianField& a, const CartesianField& b) {
  double d = 0;
  for (auto c : a.grid->active_cells()) d = std::max(d, std::abs(a.values[c] - b.values[c]));
  return d;
}

}  // namespace

TEST_CASE("without drift one step is the five-point heat stencil") {
  const GridPtr g = square(16);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.5, 2);
  const auto u0 = sample(g, [&](const Point&) { return uni(rng); });
  const Evolver2d ev(g, {Evolver2d::Scheme::explicit_euler, Evolver2d::Drift::none});
  const SimState s = ev.initial_state(u0);
  CHECK(s.v.values.abs().maxCoeff() == 0);
  const double dt = 1e-4, h2 = g->hx() * g->hx();
  const SimState next = ev.step(s, dt);
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) {
      const double ui = u0.values[g->index(i, j)];
      double lap = 0;
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k)
        if (g->in_range(i + di[k], j + dj[k])) lap += u0.values[g->index(i + di[k], j + dj[k])] - ui;
      CHECK(next.u.values[g->index(i, j)] == doctest::Approx(ui + dt * lap / h2).epsilon(1e-14));
    }
  CHECK(next.t == dt);
  CHECK(next.step_count == 1);
}

TEST_CASE("adaptive step examples") {
  StepControl ctrl;
  SUBCASE("no drift, bounded density") {
    const GridPtr g = square(100);  // h = 0.01
    const Evolver2d ev(g, {Evolver2d::Scheme::explicit_euler, Evolver2d::Drift::none});
    const auto s = ev.initial_state(sample(g, [](const Point& x) { return 0.5 + 0.5 * x.x(); }));
    CHECK(ev.adaptive_dt(s, ctrl) == doctest::Approx(ctrl.cfl_safety * 2.5e-5).epsilon(1e-12));
    ctrl.dt_max = 1e-6;
    CHECK(ev.adaptive_dt(s, ctrl) == doctest::Approx(ctrl.cfl_safety * 1e-6).epsilon(1e-12));
  }
  SUBCASE("large density") {
    const GridPtr g = square(16);
    const Evolver2d ev(g);
    auto u = sample(g, [](const Point&) { return 1.0; });
    u.values[g->index(8, 8)] = 1e6;
    const auto s = ev.initial_state(u);
    CHECK(ev.adaptive_dt(s, ctrl) <= ctrl.cfl_safety * 1e-6);
    CHECK(ev.adaptive_dt(s, ctrl) > 0);
  }
  SUBCASE("steeper potential never allows a larger step") {
    const GridPtr g = disk(48);
    const Evolver2d ev(g);
    SimState s = ev.initial_state(gaussian(g, 10, 0.3));
    const CartesianField v0 = s.v;
    double last = std::numeric_limits<double>::infinity();
    for (double scale = 0; scale <= 60; scale += 0.5) {
      s.v.values = scale * v0.values;
      const double dt = ev.adaptive_dt(s, ctrl);
      CHECK(dt <= last);
      last = dt;
    }
  }
}

TEST_CASE("initial data must be nonnegative and nonzero") {
  const GridPtr g = square(8);
  const Evolver2d ev(g);
  CHECK_THROWS_AS(ev.initial_state(zero_field<double>(g)), PreconditionError);
  auto u = sample(g, [](const Point&) { return 1.0; });
  u.values[3] = -1e-3;
  CHECK_THROWS_AS(ev.initial_state(u), PreconditionError);
  RunOptions o;
  CHECK_THROWS_AS(run(zero_field<double>(g), o), PreconditionError);
}

TEST_CASE("mass, positivity and free energy along an explicit run") {
  const GridPtr g = disk(64);
  const auto u0 = gaussian(g, 4 * kPi, 0.3, Point(0.1, -0.05));
  const double lambda = integrate(u0);
  const Evolver2d ev(g);
  SimState s = ev.initial_state(u0);
  StepControl ctrl;
  double F = free_energy(s.u, s.v);
  for (int k = 0; k < 2000; ++k) {
    s = ev.step(s, ctrl);
    REQUIRE(min_value(s.u) >= 0);
    const double Fn = free_energy(s.u, s.v);
    REQUIRE(Fn <= F + 1e-8 * (1 + std::abs(F)));
    F = Fn;
  }
  CHECK(std::abs(integrate(s.u) - lambda) <= 1e-12 * lambda);
}

TEST_CASE("semi-implicit steps keep mass, positivity and free-energy decay") {
  const GridPtr g = disk(48);
  const auto u0 = gaussian(g, 6 * kPi, 0.25);
  const double lambda = integrate(u0);
  const Evolver2d ev(g, {Evolver2d::Scheme::semi_implicit, Evolver2d::Drift::coupled});
  SimState s = ev.initial_state(u0);
  StepControl ctrl;
  ctrl.dt_max = 1e-3;
  double F = free_energy(s.u, s.v);
  const double dt0 = ev.adaptive_dt(s, ctrl);
  // no h² restriction in this mode
  CHECK(dt0 > ctrl.cfl_safety * g->h_min() * g->h_min() / 4);
  for (int k = 0; k < 200; ++k) {
    s = ev.step(s, ctrl);
    REQUIRE(min_value(s.u) >= 0);
    const double Fn = free_energy(s.u, s.v);
    REQUIRE(Fn <= F + 1e-8 * (1 + std::abs(F)));
    F = Fn;
  }
  CHECK(std::abs(integrate(s.u) - lambda) <= 1e-12 * lambda);
}

TEST_CASE("states with log u − v constant do not move") {
  // u ∝ e^v is reproduced exactly by the fitted flux whatever v is
  const GridPtr g = square(24);
  const Evolver2d ev(g);
  SimState s = ev.initial_state(sample(g, [](const Point&) { return 1.0; }));
  s.v = sample(g, [](const Point& x) { return std::sin(3 * x.x()) * std::cos(2 * x.y()); });
  s.u = sample(g, [](const Point& x) { return 2 * std::exp(std::sin(3 * x.x()) * std::cos(2 * x.y())); });
  // the step moves u with the given v and only then refreshes v
  const auto next = ev.step(s, 1e-4);
  CHECK(sup_distance(next.u, s.u) <= 1e-13);
}

TEST_CASE("small uniform mass stays near uniform") {
  // drift scales with λ, so the deviation from uniform is O(λ²)
  const GridPtr g = square(32);
  const double lambda = 0.1;
  const auto u0 = sample(g, [&](const Point&) { return lambda; });
  RunOptions o;
  o.control.horizon = 0.2;
  o.snapshot_every = 200;
  const auto tr = run(u0, o);
  CHECK(tr.halt == HaltReason::horizon);
  for (const auto& s : tr.snapshots) CHECK(sup_distance(s.u, u0) <= lambda * lambda);
}

TEST_CASE("small mass relaxes like the heat equation") {
  const GridPtr g = square(32);
  const double lambda = 0.1;
  const auto u0 = sample(g, [&](const Point& x) {
    return lambda * (1 + 0.5 * std::cos(kPi * x.x()) * std::cos(kPi * x.y()));
  });
  RunOptions coupled, heat;
  coupled.control.horizon = heat.control.horizon = 0.1;
  coupled.snapshot_every = heat.snapshot_every = 100;
  heat.evolver.drift = Evolver2d::Drift::none;
  const auto a = run(u0, coupled), b = run(u0, heat);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  const auto uniform = sample(g, [&](const Point&) { return lambda; });
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const double dev = sup_distance(a.snapshots[k].u, uniform);
    CHECK(dev < last);
    last = dev;
    CHECK(sup_distance(a.snapshots[k].u, b.snapshots[k].u) <= 0.1 * lambda * lambda);
  }
}

TEST_CASE("run halts at the horizon for subcritical data") {
  const GridPtr g = disk(64);
  RunOptions o;
  o.control.horizon = 0.05;
  o.trace_every = 50;
  o.snapshot_every = 100;
  const auto tr = run(gaussian(g, 0.9 * kCollapseMass, 0.3), o, {TestFunction::bump(Point::Zero(), 0.5)});
  CHECK(tr.halt == HaltReason::horizon);
  CHECK(tr.final.t == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(tr.traces.columns() ==
        std::vector<std::string>{"t", "dt", "mass", "free_energy", "dissipation", "max_u", "pair:0"});
  const auto t = tr.traces.column("t");
  CHECK(t.front() == 0);
  CHECK(t.back() == tr.final.t);
  CHECK(tr.snapshots.front().t == 0);
  CHECK(tr.snapshots.back().t == tr.final.t);
  const auto mass = tr.traces.column("mass");
  for (double m : mass) CHECK(m == doctest::Approx(mass.front()).epsilon(1e-13));
}

TEST_CASE("2D and radial sup norms agree before blowup") {
  const double lambda = 0.9 * kCollapseMass, w = 0.3, T = 0.05;
  RunOptions o;
  o.control.horizon = T;
  o.trace_every = 1000;
  const auto tr = run(gaussian(disk(64), lambda, w), o);
  const auto rg = std::make_shared<RadialGrid>(make_radial_grid(1, 1024, 0.97));
  RadialRunOptions ro;
  ro.control.horizon = T;
  ro.control.cfl_safety = 0.2;
  const auto rr = run_radial(gaussian_mass_profile(rg, lambda, w), ro);
  CHECK(max_value(tr.final.u) == doctest::Approx(central_density(rr.final)).epsilon(0.05));
}

TEST_CASE("concentrated supercritical data reach the blowup threshold") {
  RunOptions o;
  o.control.horizon = 1;
  o.trace_every = 10;
  const GridPtr g = disk(128);
  const auto tr = run(gaussian(g, 1.5 * kCollapseMass, 0.1), o);
  CHECK(tr.halt == HaltReason::blowup_threshold);
  CHECK(tr.final.t < 0.01);
  CHECK(max_value(tr.final.u) * g->cell_area() >= 1);
}

TEST_CASE("step rejects bad input") {
  const GridPtr g = square(8);
  const Evolver2d ev(g);
  const auto s = ev.initial_state(sample(g, [](const Point&) { return 1.0; }));
  CHECK_THROWS_AS(ev.step(s, 0.0), PreconditionError);
  CHECK_THROWS_AS(ev.step(s, -1.0), PreconditionError);
  // far beyond the positivity bound the explicit step loses positivity
  SimState bumpy = s;
  bumpy.u.values.setConstant(1e-3);
  bumpy.u.values[g->index(4, 4)] = 1.0;
  CHECK_THROWS_AS(ev.step(bumpy, 10.0), NumericalError);
}
