#pragma once

#include <Eigen/Core>

#include <numbers>
#include <stdexcept>
#include <string>

namespace collapse {

using Point = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
/// Critical collapse mass 8π.
inline constexpr double kCollapseMass = 8.0 * std::numbers::pi;

/// A caller violated a documented precondition (bad sizes, bad parameters).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics failed: nonconvergence, lost positivity, lost monotonicity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace collapse
