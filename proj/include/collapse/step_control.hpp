#pragma once

#include "collapse/types.hpp"

#include <optional>
#include <string>

namespace collapse {

/// Step-size and stopping controls shared by the 2D and radial drivers.
struct StepControl {
  double dt_max = 1e-3;
  double cfl_safety = 0.4;
  /// Halt once sup u reaches this value. Unset: the 2D driver halts at
  /// max(u)·h² ≥ 1, the radial driver at 1e12.
  std::optional<double> blowup_sup_threshold;
  long max_steps = 10'000'000;
  double horizon = 1.0;
  /// A proposed step below this is treated as stiffness collapse.
  double dt_min = 1e-18;

  void validate() const {
    require(dt_max > 0, "step control: dt_max must be positive");
    require(cfl_safety > 0 && cfl_safety <= 0.9, "step control: cfl_safety must lie in (0, 0.9]");
    require(!blowup_sup_threshold || *blowup_sup_threshold > 0,
            "step control: blowup_sup_threshold must be positive");
    require(max_steps > 0, "step control: max_steps must be positive");
    require(horizon > 0, "step control: horizon must be positive");
    require(dt_min > 0 && dt_min < dt_max, "step control: dt_min must lie in (0, dt_max)");
  }
};

enum class HaltReason { horizon, blowup_threshold, dt_underflow, max_steps };

inline std::string to_string(HaltReason r) {
  switch (r) {
    case HaltReason::horizon: return "horizon";
    case HaltReason::blowup_threshold: return "blowup_threshold";
    case HaltReason::dt_underflow: return "dt_underflow";
    case HaltReason::max_steps: return "max_steps";
  }
  return "unknown";
}

}  // namespace collapse
