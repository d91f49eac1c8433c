#include "collapse/radial_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace collapse {

namespace {

void check_profile(const RadialMassProfile& p) {
  require(p.grid != nullptr, "radial profile: no grid");
  require(p.m.size() == p.grid->nodes().size(), "radial profile: size does not match grid");
}

// m_r at node k, second-order on the nonuniform grid.
double mass_derivative(const Eigen::ArrayXd& r, const Eigen::ArrayXd& m, Eigen::Index k) {
  const Eigen::Index n = r.size() - 1;
  if (k == 0) return 0;
  if (k == n) {
    const double h1 = r[n] - r[n - 1], h2 = r[n - 1] - r[n - 2];
    // backward three-point formula
    const double c0 = (2 * h1 + h2) / (h1 * (h1 + h2));
    const double c1 = -(h1 + h2) / (h1 * h2);
    const double c2 = h1 / (h2 * (h1 + h2));
    return c0 * m[n] + c1 * m[n - 1] + c2 * m[n - 2];
  }
  const double dm = r[k] - r[k - 1], dp = r[k + 1] - r[k];
  // weighted one-sided slopes; both weights positive, so monotone m gives m_r ≥ 0
  return (dp / (dm + dp)) * (m[k] - m[k - 1]) / dm + (dm / (dm + dp)) * (m[k + 1] - m[k]) / dp;
}

struct Stencil {
  double alpha;  // coefficient of m_{k−1}
  double gamma;  // coefficient of m_{k+1}
};

Stencil stencil(const Eigen::ArrayXd& r, const Eigen::ArrayXd& m, Eigen::Index k) {
  const double dm = r[k] - r[k - 1], dp = r[k + 1] - r[k];
  const double a = (m[k] / (2 * kPi) - 1) / r[k];
  double alpha = (2 - a * dp) / (dm * (dm + dp));
  double gamma = (2 + a * dm) / (dp * (dm + dp));
  if (alpha < 0) {
    alpha = 2 / (dm * (dm + dp));
    gamma = 2 / (dp * (dm + dp)) + a / dp;
  } else if (gamma < 0) {
    alpha = 2 / (dm * (dm + dp)) - a / dm;
    gamma = 2 / (dp * (dm + dp));
  }
  return {alpha, gamma};
}

double mass_within(const RadialMassProfile& p, double radius) {
  const auto& r = p.grid->nodes();
  if (radius >= r[r.size() - 1]) return p.mass();
  const auto it = std::upper_bound(r.data(), r.data() + r.size(), radius);
  const Eigen::Index k = (it - r.data()) - 1;
  const double w = (radius - r[k]) / (r[k + 1] - r[k]);
  return (1 - w) * p.m[k] + w * p.m[k + 1];
}

}  // namespace

RadialMassProfile mass_profile(const RadialField& u) {
  require(u.grid != nullptr, "mass_profile: field has no grid");
  require((u.values >= 0).all(), "mass_profile: density must be nonnegative");
  return {u.grid, cumulative_mass(u), u.time};
}

RadialMassProfile gaussian_mass_profile(RadialGridPtr grid, double mass, double width) {
  require(grid != nullptr, "gaussian profile: no grid");
  require(mass > 0 && width > 0, "gaussian profile: mass and width must be positive");
  const double R = grid->radius();
  const double norm = -std::expm1(-R * R / (width * width));
  Eigen::ArrayXd m(grid->nodes().size());
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const double r = grid->nodes()[k];
    m[k] = mass * (-std::expm1(-r * r / (width * width))) / norm;
  }
  m[m.size() - 1] = mass;
  return {std::move(grid), std::move(m), 0.0};
}

Eigen::ArrayXd radial_operator(const RadialMassProfile& p) {
  check_profile(p);
  const auto& r = p.grid->nodes();
  const Eigen::Index n = r.size() - 1;
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n + 1);
  for (Eigen::Index k = 1; k < n; ++k) {
    const Stencil s = stencil(r, p.m, k);
    out[k] = s.alpha * p.m[k - 1] - (s.alpha + s.gamma) * p.m[k] + s.gamma * p.m[k + 1];
  }
  return out;
}

RadialMassProfile step_radial(const RadialMassProfile& p, double dt) {
  check_profile(p);
  require(dt > 0, "step_radial: dt must be positive");
  const auto& r = p.grid->nodes();
  const Eigen::Index n = r.size() - 1;
  const double lambda = p.mass();

  // Thomas algorithm on k = 1..n−1
  Eigen::ArrayXd lower(n), diag(n), upper(n), rhs(n);
  for (Eigen::Index k = 1; k < n; ++k) {
    const Stencil s = stencil(r, p.m, k);
    lower[k] = -dt * s.alpha;
    upper[k] = -dt * s.gamma;
    diag[k] = 1 + dt * (s.alpha + s.gamma);
    rhs[k] = p.m[k];
  }
  rhs[n - 1] -= upper[n - 1] * lambda;
  for (Eigen::Index k = 2; k < n; ++k) {
    const double w = lower[k] / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  RadialMassProfile next{p.grid, Eigen::ArrayXd(n + 1), p.time + dt};
  next.m[0] = 0;
  next.m[n] = lambda;
  next.m[n - 1] = rhs[n - 1] / diag[n - 1];
  for (Eigen::Index k = n - 2; k >= 1; --k) next.m[k] = (rhs[k] - upper[k] * next.m[k + 1]) / diag[k];

  const double tolerance = 1e-12 * std::max(lambda, 1e-300);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double jump = next.m[k + 1] - next.m[k];
    if (jump < -tolerance) {
      std::ostringstream os;
      os << "step_radial: monotonicity lost at r = " << r[k] << " (m drop " << -jump << ")";
      throw NumericalError(os.str());
    }
    // round-off level dips are levelled
    if (jump < 0) next.m[k + 1] = next.m[k];
  }
  next.m[n] = lambda;
  return next;
}

double central_density(const RadialMassProfile& p) {
  check_profile(p);
  const auto& r = p.grid->nodes();
  const double r1 = r[1], r2 = r[2];
  const double q1 = p.m[1] / (r1 * r1), q2 = p.m[2] / (r2 * r2);
  const double c2 = (q2 - q1) / (r2 * r2 - r1 * r1);
  const double c1 = q1 - c2 * r1 * r1;
  return std::max(0.0, c1 / kPi);
}

RadialField reconstruct_density(const RadialMassProfile& p) {
  check_profile(p);
  const auto& r = p.grid->nodes();
  RadialField u{p.grid, Eigen::ArrayXd(r.size()), p.time};
  u.values[0] = central_density(p);
  for (Eigen::Index k = 1; k < r.size(); ++k)
    u.values[k] = std::max(0.0, mass_derivative(r, p.m, k) / (2 * kPi * r[k]));
  return u;
}

double radial_free_energy(const RadialMassProfile& p) {
  const RadialField u = reconstruct_density(p);
  const auto& r = p.grid->nodes();
  Eigen::ArrayXd entropy(r.size()), interaction(r.size());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double uk = u.values[k];
    entropy[k] = uk > 0 ? 2 * kPi * r[k] * uk * (std::log(uk) - 1) : 0.0;
    interaction[k] = k == 0 ? 0.0 : p.m[k] * p.m[k] / (4 * kPi * r[k]);
  }
  return integrate_nodes(*p.grid, entropy) - integrate_nodes(*p.grid, interaction);
}

double radial_dissipation(const RadialMassProfile& p) {
  const Eigen::ArrayXd mt = radial_operator(p);
  const auto& r = p.grid->nodes();
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(r.size());
  for (Eigen::Index k = 1; k + 1 < r.size(); ++k) {
    const double mr = mass_derivative(r, p.m, k);
    if (mr > 0) g[k] = mt[k] * mt[k] / mr;
  }
  return integrate_nodes(*p.grid, g);
}

double radial_adaptive_dt(const RadialMassProfile& p, const StepControl& ctrl) {
  const double sup = central_density(p);
  double dt = ctrl.dt_max;
  if (sup > 0) dt = std::min(dt, 1.0 / sup);
  return ctrl.cfl_safety * dt;
}

RadialRun run_radial(const RadialMassProfile& initial, const RadialRunOptions& options) {
  check_profile(initial);
  const StepControl& ctrl = options.control;
  ctrl.validate();
  require(options.sample_every >= 1, "run_radial: sample_every must be at least 1");
  require(initial.mass() > 0, "run_radial: initial mass must be positive");
  const double threshold = ctrl.blowup_sup_threshold.value_or(1e12);

  auto sample = [&](const RadialMassProfile& p, double dt, double sup) {
    RadialSample s{p.time, dt, sup, p.mass()};
    if (options.trace_free_energy) s.free_energy = radial_free_energy(p);
    return s;
  };
  RadialRun run;
  run.final = initial;
  double sup = central_density(initial);
  run.samples.push_back(sample(initial, 0.0, sup));
  double last_snapshot_sup = sup;
  if (options.snapshot_growth > 1) run.snapshots.push_back(initial);
  bool recorded = true;
  const double t_end = initial.time + ctrl.horizon;

  for (;;) {
    if (run.final.time >= t_end * (1 - 1e-15)) {
      run.halt = HaltReason::horizon;
      break;
    }
    if (sup >= threshold) {
      run.halt = HaltReason::blowup_threshold;
      break;
    }
    if (run.steps >= ctrl.max_steps) {
      run.halt = HaltReason::max_steps;
      break;
    }
    double dt = radial_adaptive_dt(run.final, ctrl);
    if (dt < ctrl.dt_min) {
      run.halt = HaltReason::dt_underflow;
      break;
    }
    dt = std::min(dt, t_end - run.final.time);
    try {
      run.final = step_radial(run.final, dt);
    } catch (const NumericalError& e) {
      throw RadialRunFailure(e.what(), run.final);
    }
    ++run.steps;
    sup = central_density(run.final);
    recorded = run.steps % options.sample_every == 0;
    if (recorded) run.samples.push_back(sample(run.final, dt, sup));
    if (options.snapshot_growth > 1 && sup >= last_snapshot_sup * options.snapshot_growth) {
      run.snapshots.push_back(run.final);
      last_snapshot_sup = sup;
    }
  }
  if (!recorded)
    run.samples.push_back(sample(run.final, run.samples.back().dt, sup));
  return run;
}

// --------------------------------------------------------------------------

BlowupFit estimate_blowup_time(const std::vector<SupSample>& window) {
  require(window.size() >= 8, "estimate_blowup_time: at least 8 samples are required");
  BlowupFit fit;
  fit.samples = window.size();
  bool increasing = true;
  for (std::size_t i = 1; i < window.size(); ++i) {
    require(window[i].t > window[i - 1].t, "estimate_blowup_time: times must increase");
    if (!(window[i].sup > window[i - 1].sup)) increasing = false;
  }
  for (const auto& s : window) require(s.sup > 0, "estimate_blowup_time: sup must be positive");

  const double n = double(window.size());
  CompensatedSum<double> st, sy;
  for (const auto& s : window) {
    st.add(s.t);
    sy.add(1 / s.sup);
  }
  const double tm = st.value() / n, ym = sy.value() / n;
  CompensatedSum<double> stt, sty;
  for (const auto& s : window) {
    stt.add((s.t - tm) * (s.t - tm));
    sty.add((s.t - tm) * (1 / s.sup - ym));
  }
  fit.slope = sty.value() / stt.value();
  fit.intercept = ym - fit.slope * tm;
  double ymin = 1 / window.front().sup, ymax = ymin, worst = 0;
  for (const auto& s : window) {
    const double y = 1 / s.sup;
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    worst = std::max(worst, std::abs(y - (ym + fit.slope * (s.t - tm))));
  }
  fit.residual = ymax > ymin ? worst / (ymax - ymin) : 0.0;
  fit.residual_flag = fit.residual > kBlowupResidualThreshold;
  if (fit.slope < 0) fit.T_est = tm - ym / fit.slope;
  fit.blowup = increasing && fit.slope < 0 && fit.T_est > window.back().t;
  return fit;
}

std::vector<SupSample> final_window(const std::vector<RadialSample>& samples, double growth) {
  require(growth > 1, "final_window: growth factor must exceed 1");
  require(samples.size() >= 8, "final_window: at least 8 samples are required");
  const double floor = samples.back().sup_u / growth;
  std::size_t first = samples.size() - 1;
  while (first > 0 && samples[first - 1].sup_u >= floor) --first;
  first = std::min(first, samples.size() - 8);
  std::vector<SupSample> out;
  for (std::size_t i = first; i < samples.size(); ++i) out.push_back({samples[i].t, samples[i].sup_u});
  return out;
}

BlowupVerdict blowup_verdict(const std::vector<RadialSample>& samples, double growth) {
  BlowupVerdict v;
  const auto window = final_window(samples, growth);
  v.fit = estimate_blowup_time(window);
  const std::size_t first = samples.size() - window.size();
  // the first recorded sample carries no step
  const double dt0 = samples[std::max<std::size_t>(first, 1)].dt;
  v.dt_trend = dt0 > 0 ? samples.back().dt / dt0 : 1.0;
  v.blowup = v.fit.blowup && !v.fit.residual_flag && v.dt_trend < 1;
  return v;
}

CollapseEstimate ladder_estimate(double t_final, double T_est, double total_mass,
                                 const std::vector<double>& ladder,
                                 const std::function<double(double)>& mass_within_radius) {
  require(T_est > t_final, "extract_collapse_mass: no blowup past the profile time");
  require(ladder.size() >= 2, "extract_collapse_mass: ladder needs at least two rungs");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    require(ladder[i] > 0, "extract_collapse_mass: ladder entries must be positive");
    if (i) require(ladder[i] > ladder[i - 1], "extract_collapse_mass: ladder must increase");
  }
  CollapseEstimate e;
  e.T_est = T_est;
  e.t_final = t_final;
  e.envelope_radius = std::sqrt(T_est - t_final);
  for (double b : ladder) {
    const double r = b * e.envelope_radius;
    e.mass_at_scales.push_back({b, r, mass_within_radius(r)});
  }
  const double prev = e.mass_at_scales[ladder.size() - 2].mass;
  const double last = e.mass_at_scales.back().mass;
  const double ratio = ladder.back() / ladder[ladder.size() - 2];
  const double q = ratio * ratio;
  e.extrapolated_collapse_mass = std::clamp((q * prev - last) / (q - 1), 0.0, total_mass);
  e.ladder_spread = prev > 0 ? std::abs(last - prev) / prev : 1.0;
  e.convergence_flag = prev > 0 && e.ladder_spread <= kLadderTolerance;
  e.residual_mass = total_mass - last;
  return e;
}

CollapseEstimate extract_collapse_mass(const RadialMassProfile& p_final, double T_est,
                                       const std::vector<double>& ladder) {
  check_profile(p_final);
  return ladder_estimate(p_final.time, T_est, p_final.mass(), ladder,
                         [&](double r) { return mass_within(p_final, r); });
}

double richardson_resolution(double coarse, double fine, double order) {
  require(order > 0, "richardson: order must be positive");
  const double f = std::pow(2.0, order);
  return (f * fine - coarse) / (f - 1);
}

}  // namespace collapse
