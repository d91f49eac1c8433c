#include "collapse/blowup_diagnostics.hpp"

#include "collapse/test_function.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace collapse {

namespace {

void require_before(double t, double T_est) {
  require(std::isfinite(T_est), "rescale: T_est must be finite");
  require(t < T_est, "rescale: the snapshot time must lie before T_est");
}

// M(ρ) on the profile by linear interpolation of the node masses.
double profile_mass(const RadialMassProfile& p, double radius) {
  const auto& r = p.grid->nodes();
  if (radius <= 0) return 0;
  if (radius >= r[r.size() - 1]) return p.mass();
  const auto it = std::upper_bound(r.data(), r.data() + r.size(), radius);
  const Eigen::Index k = (it - r.data()) - 1;
  const double w = (radius - r[k]) / (r[k + 1] - r[k]);
  return (1 - w) * p.m[k] + w * p.m[k + 1];
}

}  // namespace

double RescaledSnapshot::mass(double b) const { return local_mass(z, Point::Zero(), b); }

double RadialRescaledSnapshot::mass(double b) const {
  require(b > 0, "rescaled mass: b must be positive");
  return profile_mass(profile, b);
}

std::vector<std::pair<double, double>> RadialRescaledSnapshot::samples() const {
  const RadialField z = reconstruct_density(profile);
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index k = 0; k < z.values.size(); ++k) {
    const double y = profile.grid->node(int(k));
    if (y > b_window) break;
    out.emplace_back(y, z.values[k]);
  }
  return out;
}

RescaledSnapshot backward_rescale(const CartesianField& u, const Point& x0, double T_est,
                                  double b_window) {
  require(b_window > 0, "rescale: b_window must be positive");
  require_before(u.time, T_est);
  const CartesianGrid& g = *u.grid;
  require(g.contains(x0), "rescale: x0 must lie inside the domain");
  const double tau = T_est - u.time;
  const double R = std::sqrt(tau);
  // a plain rectangle in y: cells outside the original mask just carry zero
  auto yg = std::make_shared<CartesianGrid>(DomainKind::rectangle, Point((g.origin() - x0) / R),
                                            g.lx() / R, g.ly() / R, g.nx(), g.ny());
  RescaledSnapshot out;
  out.z = zero_field<double>(yg, u.time);
  const double w2 = b_window * b_window;
  for (Eigen::Index c : g.active_cells()) {
    const Point y = (g.center(c) - x0) / R;
    if (y.squaredNorm() <= w2) out.z.values[c] = tau * u.values[c];
  }
  out.t = u.time;
  out.T_est = T_est;
  out.s = -std::log(tau);
  out.x0 = x0;
  out.b_window = b_window;
  return out;
}

RadialRescaledSnapshot backward_rescale(const RadialMassProfile& p, double T_est, double b_window) {
  require(b_window > 0, "rescale: b_window must be positive");
  require_before(p.time, T_est);
  const double tau = T_est - p.time;
  const double R = std::sqrt(tau);
  auto yg = std::make_shared<RadialGrid>(p.grid->radius() / R, p.grid->nodes() / R, p.grid->grading());
  RadialRescaledSnapshot out;
  out.profile = {yg, p.m, p.time};
  out.T_est = T_est;
  out.s = -std::log(tau);
  out.b_window = b_window;
  return out;
}

// --------------------------------------------------------------------------

std::vector<EnvelopeSample> envelope_mass_trace(const std::vector<SimState>& snapshots,
                                                const Point& x0, double T_est, double b) {
  require(b > 0, "envelope: b must be positive");
  std::vector<EnvelopeSample> out;
  for (const auto& s : snapshots) {
    if (s.t >= T_est) continue;
    const double R = std::sqrt(T_est - s.t);
    out.push_back({s.t, R, local_mass(s.u, x0, b * R)});
  }
  return out;
}

std::vector<EnvelopeSample> envelope_mass_trace(const std::vector<RadialMassProfile>& snapshots,
                                                double T_est, double b) {
  require(b > 0, "envelope: b must be positive");
  std::vector<EnvelopeSample> out;
  for (const auto& p : snapshots) {
    if (p.time >= T_est) continue;
    const double R = std::sqrt(T_est - p.time);
    out.push_back({p.time, R, profile_mass(p, b * R)});
  }
  return out;
}

EnvelopeLadder envelope_ladder(const std::vector<RadialMassProfile>& snapshots, double T_est,
                               const std::vector<double>& ladder) {
  require(ladder.size() >= 2, "envelope: the ladder needs at least two rungs");
  require(std::is_sorted(ladder.begin(), ladder.end()), "envelope: the ladder must increase");
  EnvelopeLadder out;
  out.ladder = ladder;
  for (double b : ladder) out.traces.push_back(envelope_mass_trace(snapshots, T_est, b));
  const auto& last = out.traces.back();
  const auto& prev = out.traces[out.traces.size() - 2];
  if (!last.empty() && prev.back().mass > 0)
    out.flatness = std::abs(last.back().mass - prev.back().mass) / prev.back().mass;
  return out;
}

std::vector<double> time_ladder(double t, double T_est, const std::vector<double>& factors) {
  require_before(t, T_est);
  std::vector<double> out;
  for (double f : factors) {
    require(f > 0, "time ladder: factors must be positive");
    out.push_back(T_est - f * f * (T_est - t));
  }
  return out;
}

namespace {

std::vector<RadialSample> trace_samples(const TraceTable& traces) {
  const auto t = traces.column("t");
  const auto dt = traces.column("dt");
  const auto mass = traces.column("mass");
  const auto sup = traces.column("max_u");
  std::vector<RadialSample> samples;
  for (std::size_t k = 0; k < t.size(); ++k) samples.push_back({t[k], dt[k], sup[k], mass[k]});
  return samples;
}

}  // namespace

BlowupFit fit_blowup_time(const TraceTable& traces, double growth) {
  return estimate_blowup_time(final_window(trace_samples(traces), growth));
}

BlowupVerdict blowup_verdict(const TraceTable& traces, double growth) {
  return blowup_verdict(trace_samples(traces), growth);
}

Point blowup_point(const CartesianField& u) {
  const auto& cells = u.grid->active_cells();
  require(!cells.empty(), "blowup_point: empty grid");
  Eigen::Index best = cells.front();
  for (auto c : cells)
    if (u.values[c] > u.values[best]) best = c;
  return u.grid->center(best);
}

CollapseEstimate extract_collapse_mass(const CartesianField& u, const Point& x0, double T_est,
                                       const std::vector<double>& ladder) {
  return ladder_estimate(u.time, T_est, integrate(u), ladder,
                         [&](double r) { return local_mass(u, x0, r); });
}

// --------------------------------------------------------------------------

double rescaled_second_moment(const RescaledSnapshot& snapshot, double b) {
  require(b > 0, "second moment: b must be positive");
  const auto& g = *snapshot.z.grid;
  CompensatedSum<double> acc;
  for (Eigen::Index c : g.active_cells()) {
    const double y2 = g.center(c).squaredNorm();
    if (y2 <= b * b) acc.add(y2 * snapshot.z.values[c]);
  }
  return acc.value() * g.cell_area();
}

double rescaled_second_moment(const RadialRescaledSnapshot& snapshot, double b) {
  require(b > 0, "second moment: b must be positive");
  const auto& p = snapshot.profile;
  const auto& y = p.grid->nodes();
  // trapezoid for ∫_0^b yM(y) dy, the last interval cut at b
  CompensatedSum<double> acc;
  for (Eigen::Index k = 0; k + 1 < y.size() && y[k] < b; ++k) {
    const double hi = std::min(y[k + 1], b);
    const double m_hi = profile_mass(p, hi);
    acc.add(0.5 * (hi - y[k]) * (y[k] * p.m[k] + hi * m_hi));
  }
  return b * b * snapshot.mass(b) - 2 * acc.value();
}

double second_moment_target(double collapse_mass) {
  return collapse_mass * collapse_mass / (2 * kPi) - 4 * collapse_mass;
}

// --------------------------------------------------------------------------

namespace {

constexpr double kRampStart = 0.25;
constexpr double kRampLength = 1.5;

// ∫_0^t (1 − S) for the quintic smoothstep.
double ramp_primitive(double t) {
  const double t4 = t * t * t * t;
  return t - (2.5 * t4 - 3 * t4 * t + t4 * t * t);
}

}  // namespace

Cutoff make_cutoff(Cutoff::Kind kind, double radius) {
  Cutoff c;
  c.kind_ = kind;
  if (kind == Cutoff::Kind::phi_annulus) {
    require(std::isfinite(radius) && radius > 0, "cutoff: radius must be positive");
    c.radius_ = radius;
  }
  return c;
}

double Cutoff::value(double x) const {
  if (kind_ == Kind::c_moment) {
    if (x <= kRampStart) return x - 1;
    if (x >= kRampStart + kRampLength) return 0;
    return -0.75 + kRampLength * ramp_primitive((x - kRampStart) / kRampLength);
  }
  const double rho = std::abs(x);
  if (rho <= radius_ / 2) return 1;
  if (rho >= radius_) return 0;
  return 1 - Smoothstep::value(2 * rho / radius_ - 1);
}

double Cutoff::d1(double x) const {
  if (kind_ == Kind::c_moment) {
    if (x <= kRampStart) return 1;
    if (x >= kRampStart + kRampLength) return 0;
    return 1 - Smoothstep::value((x - kRampStart) / kRampLength);
  }
  const double rho = std::abs(x);
  if (rho <= radius_ / 2 || rho >= radius_) return 0;
  return -Smoothstep::d1(2 * rho / radius_ - 1) * 2 / radius_ * (x < 0 ? -1 : 1);
}

double Cutoff::d2(double x) const {
  if (kind_ == Kind::c_moment) {
    if (x <= kRampStart || x >= kRampStart + kRampLength) return 0;
    return -Smoothstep::d1((x - kRampStart) / kRampLength) / kRampLength;
  }
  const double rho = std::abs(x);
  if (rho <= radius_ / 2 || rho >= radius_) return 0;
  return -Smoothstep::d2(2 * rho / radius_ - 1) * 4 / (radius_ * radius_);
}

double local_second_moment(const CartesianField& u, const Point& x0, const Cutoff& c, double beta) {
  require(c.kind() == Cutoff::Kind::c_moment, "local second moment: needs the c-moment cutoff");
  require(beta > 0, "local second moment: beta must be positive");
  const auto& g = *u.grid;
  CompensatedSum<double> acc;
  for (Eigen::Index k : g.active_cells())
    acc.add((c.value((g.center(k) - x0).squaredNorm() / (beta * beta)) + 1) * u.values[k]);
  return acc.value() * g.cell_area();
}

double local_second_moment(const RescaledSnapshot& z, const Cutoff& c, double beta) {
  return local_second_moment(z.z, Point::Zero(), c, beta);
}

// --------------------------------------------------------------------------

std::string to_string(PeelKind k) {
  switch (k) {
    case PeelKind::compact: return "compact";
    case PeelKind::vanishing: return "vanishing";
    case PeelKind::dichotomy: return "dichotomy";
  }
  return "?";
}

bool BubbleSet::disjoint() const {
  for (std::size_t i = 0; i < peels.size(); ++i)
    for (std::size_t j = i + 1; j < peels.size(); ++j)
      if ((peels[i].center - peels[j].center).norm() < peels[i].radius + peels[j].radius) return false;
  return true;
}

namespace {

void validate(const BubbleOptions& o) {
  require(o.epsilon > 0 && o.epsilon0 > 0, "bubbles: epsilon and epsilon0 must be positive");
  require(o.max_peels > 0, "bubbles: max_peels must be positive");
}

// Dyadic growth from rho0 while the ball stays inside the data (radius ≤
// reach); a ball poking past the data would look flat for no reason. mass(ρ)
// supplies the ball mass. A plateau only counts once the ball holds ε0: at
// radii below the core every doubling adds little.
template <typename MassFn>
Peel grow(const Point& center, double rho0, double reach, const BubbleOptions& o, MassFn&& mass) {
  std::vector<double> radii{rho0}, masses{mass(rho0)};
  std::size_t first_flat = 0;
  while (2 * radii.back() <= reach) {
    radii.push_back(2 * radii.back());
    masses.push_back(mass(radii.back()));
    const std::size_t k = radii.size() - 1;
    if (masses[k] - masses[k - 1] >= o.epsilon) continue;
    if (first_flat == 0) first_flat = k;
    if (masses[k] >= o.epsilon0) return {PeelKind::compact, center, radii[k], masses[k], true};
  }
  if (masses.back() < o.epsilon0) {
    const std::size_t k = first_flat == 0 ? radii.size() - 1 : first_flat;
    return {PeelKind::vanishing, center, radii[k], masses[k], true};
  }
  // never flat: keep the ball across the smallest doubling, the dominant part
  std::size_t best = radii.size() == 1 ? 0 : 1;
  for (std::size_t k = 2; k < radii.size(); ++k)
    if (masses[k] - masses[k - 1] < masses[best] - masses[best - 1]) best = k;
  return {PeelKind::dichotomy, center, radii[best], masses[best], true};
}

// distance from c to the edge of the data: the rescaled domain cut by the window
double reach(const CartesianGrid& g, double b_window, const Point& c) {
  double d = b_window - c.norm();
  if (g.kind() == DomainKind::disk) {
    d = std::min(d, g.disk_radius() - (c - g.disk_center()).norm());
  } else {
    const Point lo = g.origin(), hi = g.origin() + Point(g.lx(), g.ly());
    d = std::min({d, c.x() - lo.x(), hi.x() - c.x(), c.y() - lo.y(), hi.y() - c.y()});
  }
  return d;
}

bool quantized(const Peel& p, const BubbleOptions& o) {
  return p.kind == PeelKind::compact && std::abs(p.mass - kCollapseMass) < o.epsilon;
}

}  // namespace

BubbleSet detect_bubbles(const RescaledSnapshot& snapshot, const BubbleOptions& options) {
  validate(options);
  const auto& z = snapshot.z;
  const auto& g = *z.grid;
  const auto& cells = g.active_cells();
  std::vector<char> masked(cells.size(), 0);
  const double rho0 = std::max(g.hx(), g.hy());
  BubbleSet out;

  auto unmasked_mass = [&](const Point& c, double rho) {
    CompensatedSum<double> acc;
    const double r2 = rho * rho;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (!masked[k] && (g.center(cells[k]) - c).squaredNorm() <= r2) acc.add(z.values[cells[k]]);
    return acc.value() * g.cell_area();
  };
  auto remaining = [&] {
    CompensatedSum<double> acc;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (!masked[k]) acc.add(z.values[cells[k]]);
    return acc.value() * g.cell_area();
  };

  for (;;) {
    out.remaining_mass = remaining();
    std::size_t arg = cells.size();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (!masked[k] && z.values[cells[k]] > top) {
        top = z.values[cells[k]];
        arg = k;
      }
    out.exterior_sup = arg == cells.size() ? 0.0 : top;
    if (arg == cells.size() || top <= options.epsilon) {
      out.stop_reason = "vanishing";
      break;
    }
    if (out.remaining_mass < options.epsilon0) {
      out.stop_reason = "mass";
      break;
    }
    if (int(out.peels.size()) == options.max_peels) {
      out.stop_reason = "peel_limit";
      break;
    }
    const Point center = g.center(cells[arg]);
    Peel p = grow(center, rho0, reach(g, snapshot.b_window, center), options, [&](double rho) { return unmasked_mass(center, rho); });
    for (const auto& q : out.peels)
      if ((q.center - p.center).norm() < q.radius + p.radius) p.disjoint = false;
    const double r2 = p.radius * p.radius;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if ((g.center(cells[k]) - center).squaredNorm() <= r2) masked[k] = 1;
    out.peels.push_back(p);
    if (quantized(p, options)) out.bubbles.push_back(p);
  }
  return out;
}

BubbleSet detect_bubbles(const RadialRescaledSnapshot& snapshot, const BubbleOptions& options) {
  validate(options);
  const auto& y = snapshot.profile.grid->nodes();
  const double window = std::min(snapshot.b_window, y[y.size() - 1]);
  BubbleSet out;
  const auto z = snapshot.samples();
  const double total = snapshot.mass(window);
  out.remaining_mass = total;
  out.exterior_sup = z.empty() ? 0.0 : z.front().second;
  for (const auto& [yk, zk] : z) out.exterior_sup = std::max(out.exterior_sup, zk);
  if (out.exterior_sup <= options.epsilon) {
    out.stop_reason = "vanishing";
    return out;
  }
  if (total < options.epsilon0) {
    out.stop_reason = "mass";
    return out;
  }
  Peel p = grow(Point::Zero(), y[1], window, options, [&](double rho) { return snapshot.mass(std::min(rho, window)); });
  out.peels.push_back(p);
  if (quantized(p, options)) out.bubbles.push_back(p);
  out.remaining_mass = total - p.mass;
  out.exterior_sup = 0;
  for (const auto& [yk, zk] : z)
    if (yk > p.radius) out.exterior_sup = std::max(out.exterior_sup, zk);
  // a radial field holds no second centre: whatever is left is a ring or spread out
  out.stop_reason = out.exterior_sup <= options.epsilon ? "vanishing"
                    : out.remaining_mass < options.epsilon0 ? "mass"
                                                             : "radial";
  return out;
}

// --------------------------------------------------------------------------

EpsRegularityReport check_eps_regularity(const std::vector<SimState>& snapshots, const EpsBall& ball,
                                         double epsilon0, double sigma0) {
  require(ball.radius > 0, "eps regularity: radius must be positive");
  require(epsilon0 > 0 && sigma0 > 0, "eps regularity: epsilon0 and sigma0 must be positive");
  EpsRegularityReport out;
  out.ball = ball;
  if (snapshots.empty()) {
    out.inconclusive = true;
    return out;
  }
  const SimState* nearest = &snapshots.front();
  for (const auto& s : snapshots)
    if (std::abs(s.t - ball.t0) < std::abs(nearest->t - ball.t0)) nearest = &s;
  out.premise_mass = local_mass(nearest->u, ball.center, ball.radius);
  out.premise = out.premise_mass < epsilon0;

  const double half = sigma0 * ball.radius * ball.radius;
  const double lo = ball.t0 - half, hi = ball.t0 + half;
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (snapshots.front().t > lo + slack || snapshots.back().t < hi - slack) {
    out.inconclusive = true;
    return out;
  }
  const auto& g = *snapshots.front().u.grid;
  const double r2 = 0.25 * ball.radius * ball.radius;
  double sup = 0;
  for (const auto& s : snapshots) {
    if (s.t < lo - slack || s.t > hi + slack) continue;
    ++out.snapshots_used;
    for (Eigen::Index c : g.active_cells())
      if ((g.center(c) - ball.center).squaredNorm() <= r2) sup = std::max(sup, s.u.values[c]);
  }
  if (out.snapshots_used == 0) out.inconclusive = true;
  out.scaled_sup = ball.radius * ball.radius * sup;
  return out;
}

std::vector<EpsBall> random_balls(const CartesianGrid& grid, std::size_t count, std::uint64_t seed,
                                  double r_min, double r_max, double t_min, double t_max) {
  require(r_min > 0 && r_max >= r_min, "random balls: need 0 < r_min ≤ r_max");
  require(t_max >= t_min, "random balls: need t_min ≤ t_max");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(grid.origin().x(), grid.origin().x() + grid.lx());
  std::uniform_real_distribution<double> uy(grid.origin().y(), grid.origin().y() + grid.ly());
  std::uniform_real_distribution<double> ur(r_min, r_max);
  std::uniform_real_distribution<double> ut(t_min, t_max);
  std::vector<EpsBall> out;
  for (std::size_t attempts = 0; out.size() < count; ++attempts) {
    require(attempts < 1000 * (count + 1), "random balls: radii too large for the domain");
    const double r = ur(rng);
    const Point x(ux(rng), uy(rng));
    const double t0 = ut(rng);
    bool inside;
    if (grid.kind() == DomainKind::disk) {
      inside = (x - grid.disk_center()).norm() + r <= grid.disk_radius();
    } else {
      const Point lo = grid.origin(), hi = grid.origin() + Point(grid.lx(), grid.ly());
      inside = x.x() - r >= lo.x() && x.x() + r <= hi.x() && x.y() - r >= lo.y() && x.y() + r <= hi.y();
    }
    if (inside) out.push_back({x, r, t0});
  }
  return out;
}

EpsSweep eps_regularity_sweep(const std::vector<SimState>& coarse, const std::vector<SimState>& fine,
                              const std::vector<EpsBall>& balls, double epsilon0, double sigma0) {
  EpsSweep out;
  for (const auto& b : balls) {
    out.coarse.push_back(check_eps_regularity(coarse, b, epsilon0, sigma0));
    out.fine.push_back(check_eps_regularity(fine, b, epsilon0, sigma0));
    const auto& c = out.coarse.back();
    const auto& f = out.fine.back();
    if (c.premise && !c.inconclusive) out.constant_coarse = std::max(out.constant_coarse, c.scaled_sup);
    if (f.premise && !f.inconclusive) out.constant_fine = std::max(out.constant_fine, f.scaled_sup);
    if (c.premise && f.premise && !c.inconclusive && !f.inconclusive) {
      ++out.premise_true;
      if (f.scaled_sup > 2 * c.scaled_sup) ++out.violations;
    }
  }
  return out;
}

}  // namespace collapse
