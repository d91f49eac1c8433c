#include "collapse/test_function.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace collapse {

double Smoothstep::value(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return t * t * t * (10 + t * (-15 + 6 * t));
}

double Smoothstep::d1(double t) {
  if (t <= 0 || t >= 1) return 0;
  return 30 * t * t * (1 - t) * (1 - t);
}

double Smoothstep::d2(double t) {
  if (t <= 0 || t >= 1) return 0;
  return 60 * t * (1 - t) * (1 - 2 * t);
}

TestFunction TestFunction::constant(double value) {
  TestFunction f(Kind::constant);
  f.amplitude_ = value;
  return f;
}

TestFunction TestFunction::polynomial(std::vector<Monomial> terms) {
  for (const auto& t : terms) require(t.px >= 0 && t.py >= 0, "polynomial: negative exponent");
  TestFunction f(Kind::polynomial);
  f.terms_ = std::move(terms);
  return f;
}

TestFunction TestFunction::bump(const Point& center, double radius, double amplitude) {
  require(radius > 0, "bump: radius must be positive");
  TestFunction f(Kind::bump);
  f.center_ = center;
  f.radius_ = radius;
  f.amplitude_ = amplitude;
  return f;
}

TestFunction TestFunction::cutoff(const Point& center, double radius) {
  require(radius > 0, "cutoff: radius must be positive");
  TestFunction f(Kind::cutoff);
  f.center_ = center;
  f.radius_ = radius;
  return f;
}

std::string TestFunction::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::constant: os << "constant(" << amplitude_ << ")"; break;
    case Kind::polynomial: {
      os << "polynomial(";
      for (std::size_t i = 0; i < terms_.size(); ++i)
        os << (i ? " + " : "") << terms_[i].coefficient << "*x^" << terms_[i].px << "*y^"
           << terms_[i].py;
      os << ")";
      break;
    }
    case Kind::bump:
      os << "bump(" << center_.x() << "," << center_.y() << ";r=" << radius_
         << ";a=" << amplitude_ << ")";
      break;
    case Kind::cutoff:
      os << "cutoff(" << center_.x() << "," << center_.y() << ";r=" << radius_
         << ";a=" << amplitude_ << ")";
      break;
  }
  return os.str();
}

void TestFunction::profile(double rho, double& f, double& f1, double& f2) const {
  const double r = radius_;
  if (kind_ == Kind::bump) {
    const double s = rho / r;
    if (s >= 1) {
      f = f1 = f2 = 0;
      return;
    }
    const double w = 1 - s * s;
    f = amplitude_ * w * w * w * w;
    f1 = -8 * amplitude_ * s * w * w * w / r;
    f2 = -8 * amplitude_ * w * w * (1 - 7 * s * s) / (r * r);
    return;
  }
  // cutoff: 1 − S(2ρ/r − 1)
  const double t = 2 * rho / r - 1;
  f = amplitude_ * (1 - Smoothstep::value(t));
  f1 = -2 * amplitude_ * Smoothstep::d1(t) / r;
  f2 = -4 * amplitude_ * Smoothstep::d2(t) / (r * r);
}

namespace {

double ipow(double x, int p) {
  double y = 1;
  for (int i = 0; i < p; ++i) y *= x;
  return y;
}

}  // namespace

double TestFunction::value(const Point& x) const {
  switch (kind_) {
    case Kind::constant: return amplitude_;
    case Kind::polynomial: {
      double s = 0;
      for (const auto& t : terms_) s += t.coefficient * ipow(x.x(), t.px) * ipow(x.y(), t.py);
      return s;
    }
    default: {
      double f, f1, f2;
      profile((x - center_).norm(), f, f1, f2);
      return f;
    }
  }
}

Eigen::Vector2d TestFunction::gradient(const Point& x) const {
  switch (kind_) {
    case Kind::constant: return Eigen::Vector2d::Zero();
    case Kind::polynomial: {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      for (const auto& t : terms_) {
        if (t.px > 0) g.x() += t.coefficient * t.px * ipow(x.x(), t.px - 1) * ipow(x.y(), t.py);
        if (t.py > 0) g.y() += t.coefficient * t.py * ipow(x.x(), t.px) * ipow(x.y(), t.py - 1);
      }
      return g;
    }
    default: {
      const Eigen::Vector2d d = x - center_;
      const double rho = d.norm();
      if (rho == 0) return Eigen::Vector2d::Zero();
      double f, f1, f2;
      profile(rho, f, f1, f2);
      return f1 * d / rho;
    }
  }
}

Eigen::Matrix2d TestFunction::hessian(const Point& x) const {
  switch (kind_) {
    case Kind::constant: return Eigen::Matrix2d::Zero();
    case Kind::polynomial: {
      Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
      for (const auto& t : terms_) {
        const double c = t.coefficient;
        if (t.px > 1) h(0, 0) += c * t.px * (t.px - 1) * ipow(x.x(), t.px - 2) * ipow(x.y(), t.py);
        if (t.py > 1) h(1, 1) += c * t.py * (t.py - 1) * ipow(x.x(), t.px) * ipow(x.y(), t.py - 2);
        if (t.px > 0 && t.py > 0)
          h(0, 1) += c * t.px * t.py * ipow(x.x(), t.px - 1) * ipow(x.y(), t.py - 1);
      }
      h(1, 0) = h(0, 1);
      return h;
    }
    default: {
      const Eigen::Vector2d d = x - center_;
      const double rho = d.norm();
      double f, f1, f2;
      profile(rho, f, f1, f2);
      if (rho < 1e-14 * radius_) {
        // f′(ρ)/ρ → f″(0) at the centre
        return f2 * Eigen::Matrix2d::Identity();
      }
      const Eigen::Vector2d e = d / rho;
      const Eigen::Matrix2d radial = e * e.transpose();
      return f2 * radial + (f1 / rho) * (Eigen::Matrix2d::Identity() - radial);
    }
  }
}

bool TestFunction::moves(const Point& x) const {
  switch (kind_) {
    case Kind::constant: return false;
    case Kind::polynomial: return true;
    case Kind::bump: return (x - center_).norm() < radius_;
    case Kind::cutoff: {
      const double rho = (x - center_).norm();
      return rho > radius_ / 2 && rho < radius_;
    }
  }
  return true;
}

double TestFunction::gradient_c1_norm(const CartesianGrid& grid) const {
  switch (kind_) {
    case Kind::constant: return 0;
    case Kind::bump: {
      // sup|f′| at s² = 1/7; sup‖D²φ‖ = |f″(0)| = 8A/r²
      const double a = std::abs(amplitude_), r = radius_;
      const double slope = 8 * a / r * (1 / std::sqrt(7.0)) * std::pow(6.0 / 7.0, 3);
      return slope + 8 * a / (r * r);
    }
    case Kind::cutoff: {
      // sup|S′| = 15/8 at t = 1/2; sup|S″| = 10/√3 at t = (3−√3)/6;
      // sup of S′(t)/(1+t) at t = (√33 − 3)/6.
      const double r = radius_;
      const double slope = 2 * (15.0 / 8.0) / r;
      const double ts = (std::sqrt(33.0) - 3) / 6;
      const double tangential = 4 * Smoothstep::d1(ts) / (1 + ts) / (r * r);
      const double normal = 4 * (10 / std::sqrt(3.0)) / (r * r);
      return std::abs(amplitude_) * (slope + std::max(tangential, normal));
    }
    case Kind::polynomial: {
      // Bound each partial by Σ|c|·max|monomial| over the bounding box corners.
      const double xs[2] = {grid.origin().x(), grid.origin().x() + grid.lx()};
      const double ys[2] = {grid.origin().y(), grid.origin().y() + grid.ly()};
      const double ax = std::max(std::abs(xs[0]), std::abs(xs[1]));
      const double ay = std::max(std::abs(ys[0]), std::abs(ys[1]));
      double gx = 0, gy = 0, hxx = 0, hyy = 0, hxy = 0;
      for (const auto& t : terms_) {
        const double c = std::abs(t.coefficient);
        if (t.px > 0) gx += c * t.px * ipow(ax, t.px - 1) * ipow(ay, t.py);
        if (t.py > 0) gy += c * t.py * ipow(ax, t.px) * ipow(ay, t.py - 1);
        if (t.px > 1) hxx += c * t.px * (t.px - 1) * ipow(ax, t.px - 2) * ipow(ay, t.py);
        if (t.py > 1) hyy += c * t.py * (t.py - 1) * ipow(ax, t.px) * ipow(ay, t.py - 2);
        if (t.px > 0 && t.py > 0) hxy += c * t.px * t.py * ipow(ax, t.px - 1) * ipow(ay, t.py - 1);
      }
      return std::hypot(gx, gy) + std::sqrt(hxx * hxx + 2 * hxy * hxy + hyy * hyy);
    }
  }
  return 0;
}

bool TestFunction::admissible(const CartesianGrid& grid) const {
  if (kind_ == Kind::constant) return true;
  constexpr int samples = 512;
  double scale = 1e-300;
  double worst = 0;
  auto check = [&](const Point& x, const Eigen::Vector2d& normal) {
    const Eigen::Vector2d g = gradient(x);
    worst = std::max(worst, std::abs(g.dot(normal)));
  };
  // gradient scale from the domain interior
  for (int k = 0; k < 64; ++k)
    for (int l = 0; l < 64; ++l) {
      const Point x = grid.origin() + Point((k + 0.5) / 64 * grid.lx(), (l + 0.5) / 64 * grid.ly());
      if (grid.contains(x)) scale = std::max(scale, gradient(x).norm());
    }
  if (grid.kind() == DomainKind::disk) {
    const Point c = grid.disk_center();
    const double r = grid.disk_radius();
    for (int k = 0; k < samples; ++k) {
      const double th = 2 * kPi * k / samples;
      const Eigen::Vector2d n(std::cos(th), std::sin(th));
      check(c + r * n, n);
    }
  } else {
    const Point o = grid.origin();
    for (int k = 0; k <= samples; ++k) {
      const double s = double(k) / samples;
      check(o + Point(s * grid.lx(), 0), Eigen::Vector2d(0, -1));
      check(o + Point(s * grid.lx(), grid.ly()), Eigen::Vector2d(0, 1));
      check(o + Point(0, s * grid.ly()), Eigen::Vector2d(-1, 0));
      check(o + Point(grid.lx(), s * grid.ly()), Eigen::Vector2d(1, 0));
    }
  }
  return worst <= 1e-9 * std::max(1.0, scale);
}

TestFunction TestFunction::scaled(double factor) const {
  TestFunction f = *this;
  switch (kind_) {
    case Kind::polynomial:
      for (auto& t : f.terms_) t.coefficient *= factor;
      break;
    default: f.amplitude_ *= factor; break;
  }
  return f;
}

}  // namespace collapse
