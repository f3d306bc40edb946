#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "focalridge/dataset.hpp"
#include "focalridge/reconstruct.hpp"
#include "focalridge/residualize.hpp"
#include "focalridge/ridge.hpp"

namespace focalridge {

// Independent-Bernoulli data-generating process: K binary sub-treatments
// with the given prevalences, outcome beta0 D' + sum_k beta_k D_k plus
// optional Gaussian noise, no covariates.
struct SimulationConfig {
  Eigen::VectorXd prevalences;  // K values in (0, 1)
  double beta0 = 5.0;
  Eigen::VectorXd beta;  // K values
  Eigen::Index n = 2000;
  double noise_sd = 0.0;
  FocalSpec focal{FocalKind::Max};
  int reps = 500;
  std::uint64_t seed = 0;
  // Empty means default_simulation_grid(config).
  std::vector<double> lambda_grid;
  // 0 = one worker per hardware thread; 1 = serial. Results are bitwise
  // identical either way.
  int threads = 0;
};

// The reference configuration: prevalences [0.2, 0.05, 0.2, 0.05, 0.2,
// 0.05], beta0 = 5, beta = [2, 2, 1, 1, -1, -1], n = 2000, reps = 500,
// noiseless outcome, max focal.
SimulationConfig paper_default_config();

// One replication's data. Randomness comes from the substream (seed,
// rep_index), so replications are independent and may be generated in any
// order. Draws whose focal column or any sub-treatment column is constant
// are redrawn from an escalated substream (they would make the unpenalized
// fit or the conditional frequencies degenerate).
Dataset simulate_dgp(const SimulationConfig& config, std::uint64_t rep_index);

struct AnalyticTargets {
  double tau0 = 0.0;
  Eigen::VectorXd tau;  // K
};

// Closed-form targets under independence (max focal only):
//   tau_j = beta_j + beta0 + sum_{k != j} beta_k p_k
//   tau0  = beta0 + sum_k beta_k p_k / (1 - prod_m (1 - p_m))
AnalyticTargets analytic_targets(const SimulationConfig& config);

// 0 plus 25 log-spaced points spanning [1e-6 g, 1e4 g], with g the expected
// column energy of the stacked design divided by K.
std::vector<double> default_simulation_grid(const SimulationConfig& config);

// Per-(sub-treatment, lambda) cells. variance uses the 1/reps
// normalization (mean squared deviation from the replication mean), so
// mse = bias_sq + variance holds as an exact identity up to float error;
// the classical (reps-1)-denominator sample variance is variance *
// reps/(reps-1).
struct MseDecomposition {
  std::vector<double> lambdas;  // L grid values
  Eigen::MatrixXd bias_sq;      // K x L
  Eigen::MatrixXd variance;     // K x L
  Eigen::MatrixXd mse;          // K x L
  int reps = 0;
  AnalyticTargets targets;
  int redraw_count = 0;
};

// Monte Carlo decomposition of the error in the plug-in per-sub-treatment
// estimates across the penalty grid. Replications run in parallel;
// aggregation uses fixed-order pairwise summation, so outputs are bitwise
// identical regardless of thread count.
MseDecomposition run_mse_decomposition(const SimulationConfig& config);

// One row of a penalty sweep: the fitted coefficient and reconstructed
// effect for one column at one lambda. The focal row carries beta0 and the
// aggregate effect; sub-treatment rows carry beta_j and tau_j. tau0_hat
// repeats the aggregate effect on every row (constant across lambda).
struct ShrinkagePathRow {
  double lambda = 0.0;
  std::string coefficient;  // "focal" or a treatment name
  double beta_hat = 0.0;
  double tau_hat = 0.0;
  double tau0_hat = 0.0;
  std::optional<double> se;  // absent when n <= p
};

// Sweep over the grid on a real (or simulated) dataset.
std::vector<ShrinkagePathRow> shrinkage_path(const ResidualizedDesign& design,
                                             const Dataset& data,
                                             const std::vector<double>& grid,
                                             CovarianceKind kind);

// Convenience: one simulated dataset (replication 0), mean-only
// residualization, the config's grid (or the default), homoscedastic
// standard errors.
std::vector<ShrinkagePathRow> shrinkage_path(const SimulationConfig& config);

}  // namespace focalridge
