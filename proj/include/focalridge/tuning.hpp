#pragma once

#include <cstdint>
#include <vector>

#include "focalridge/residualize.hpp"

namespace focalridge {

// Penalty selection by hold-out mean squared prediction error of y_tilde
// from the full design (focal plus sub-treatments).
struct TuningConfig {
  // Strictly increasing nonnegative values; empty means
  // default_lambda_grid(design).
  std::vector<double> grid;
  double holdout_fraction = 0.25;  // single-split mode (folds == 1)
  std::uint64_t seed = 0;
  // 1 = one seeded hold-out split; m > 1 = m-fold averaging of fold MSEs.
  int folds = 1;
};

struct TuningResult {
  double best_lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> scores;  // hold-out MSE per grid point
};

// 0 plus 25 log-spaced points spanning [1e-6 g, 1e4 g], where
// g = trace(X'X) / K is the average column energy of the stacked design.
std::vector<double> default_lambda_grid(const ResidualizedDesign& design);

// Splits rows by seeded uniform assignment (hold-out with probability
// holdout_fraction), fits each grid point on the training part, scores mean
// squared prediction error on the hold-out part, and returns the minimizer.
// Scores within 1e-8 (relative to the hold-out outcome's mean square) of the
// minimum count as ties, broken toward the larger penalty. Deterministic
// given (design, config).
TuningResult tune_lambda(const ResidualizedDesign& design, const TuningConfig& config);

}  // namespace focalridge
