#pragma once

#include "hirs/tape.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hirs {

/// Builds a scalar loss on a fresh tape. Must be deterministic: any noise it
/// uses has to be redrawn from the same seed on every call.
using LossBuilder = std::function<Var(Tape&)>;

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor: err = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Check at most this many coordinates per parameter (0 = all).
  Index max_coords_per_param = 0;
  unsigned long long seed = 0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_row = -1;
  Index worst_col = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  bool passed = true;

  std::string summary() const;
};

/// Compares backward() gradients with central finite differences over every
/// coordinate (or a seeded subset) of `params`.
GradcheckReport gradcheck(const LossBuilder& loss, const std::vector<Parameter*>& params,
                          const GradcheckOptions& opt = {});

}  // namespace hirs
