#pragma once

#include "hirs/trainer.hpp"

#include <string>
#include <vector>

namespace hirs {

struct ScalingConfig {
  std::vector<Index> ks{5, 10, 20, 40, 60};
  std::vector<Index> ms{10};
  Index samples = 2048;
  int repeats = 3;
  TrainConfig train;  // k is overridden per row
};

struct ScalingRow {
  Index k = 0;
  Index m = 0;
  double seconds = 0.0;  // median epoch time over repeats
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double slope_k = 0.0;  // least-squares seconds per unit k, at the first m
  double slope_m = 0.0;  // seconds per unit m, at the first k

  double seconds(Index k, Index m) const;
  /// Header comment, then "k,m,seconds" rows.
  std::string to_csv(const std::string& producer, const std::string& config_hash) const;
};

/// Times one training epoch over a fixed synthetic slice for every (k, m).
ScalingReport scaling_bench(const ScalingConfig& cfg);

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hirs
