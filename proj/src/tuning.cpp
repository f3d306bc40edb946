#include "focalridge/tuning.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "focalridge/errors.hpp"
#include "focalridge/ridge.hpp"
#include "focalridge/rng.hpp"

namespace focalridge {

namespace {

// Hold-out scores so close to the minimum that they are numerically
// indistinguishable count as ties (resolved toward the larger penalty).
constexpr double kTieWindow = 1e-8;

ResidualizedDesign subset_rows(const ResidualizedDesign& design,
                               const std::vector<Eigen::Index>& rows) {
  ResidualizedDesign subset;
  const auto m = static_cast<Eigen::Index>(rows.size());
  subset.y_tilde.resize(m);
  subset.focal_tilde.resize(m);
  subset.treat_tilde.resize(m, design.sub_treatment_count());
  for (Eigen::Index i = 0; i < m; ++i) {
    subset.y_tilde[i] = design.y_tilde[rows[static_cast<std::size_t>(i)]];
    subset.focal_tilde[i] = design.focal_tilde[rows[static_cast<std::size_t>(i)]];
    subset.treat_tilde.row(i) = design.treat_tilde.row(rows[static_cast<std::size_t>(i)]);
  }
  subset.treatment_names = design.treatment_names;
  subset.provenance = design.provenance;
  return subset;
}

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) {
    throw ValidationError("lambda grid must be nonempty");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) {
      throw ValidationError("lambda grid values must be finite and nonnegative");
    }
    if (i > 0 && grid[i] <= grid[i - 1]) {
      throw ValidationError("lambda grid must be strictly increasing");
    }
  }
}

// Sum of squared prediction errors of one split's hold-out part, per lambda.
void accumulate_split(const ResidualizedDesign& design,
                      const std::vector<Eigen::Index>& train_rows,
                      const std::vector<Eigen::Index>& holdout_rows,
                      const std::vector<double>& grid, std::vector<double>& fold_mses) {
  const ResidualizedDesign train = subset_rows(design, train_rows);
  const ResidualizedDesign holdout = subset_rows(design, holdout_rows);
  const RidgeSolver solver(train);
  Eigen::MatrixXd holdout_x(holdout.unit_count(), holdout.sub_treatment_count() + 1);
  holdout_x.col(0) = holdout.focal_tilde;
  holdout_x.rightCols(holdout.sub_treatment_count()) = holdout.treat_tilde;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const RidgeFit fit = solver.fit(grid[g], CovarianceKind::Homoscedastic,
                                    /*with_inference=*/false);
    Eigen::VectorXd coefficients(fit.p);
    coefficients[0] = fit.beta0;
    coefficients.tail(fit.beta.size()) = fit.beta;
    fold_mses[g] += (holdout.y_tilde - holdout_x * coefficients).squaredNorm() /
                    static_cast<double>(holdout.unit_count());
  }
}

}  // namespace

std::vector<double> default_lambda_grid(const ResidualizedDesign& design) {
  const double trace = design.focal_tilde.squaredNorm() + design.treat_tilde.squaredNorm();
  const double g = trace / static_cast<double>(design.sub_treatment_count());
  const double low = 1e-6 * g;
  const double high = 1e4 * g;
  std::vector<double> grid;
  grid.push_back(0.0);
  constexpr int kPoints = 25;
  const double step = std::log(high / low) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) {
    grid.push_back(low * std::exp(step * i));
  }
  return grid;
}

TuningResult tune_lambda(const ResidualizedDesign& design, const TuningConfig& config) {
  const Eigen::Index n = design.unit_count();
  std::vector<double> grid = config.grid.empty() ? default_lambda_grid(design) : config.grid;
  validate_grid(grid);
  if (config.folds < 1) {
    throw ValidationError("folds must be >= 1");
  }
  if (!(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0)) {
    throw ValidationError("holdout_fraction must lie strictly between 0 and 1");
  }

  std::vector<double> scores(grid.size(), 0.0);
  double scoring_scale = 1.0;
  if (config.folds == 1) {
    // Seeded uniform assignment: each row lands in the hold-out part with
    // probability holdout_fraction.
    CounterRng rng(config.seed, 0);
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> holdout_rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      (rng.uniform() < config.holdout_fraction ? holdout_rows : train_rows).push_back(i);
    }
    if (train_rows.size() < 10 || holdout_rows.size() < 10) {
      throw InsufficientDataError(
          "too few rows to split: " + std::to_string(train_rows.size()) + " training / " +
          std::to_string(holdout_rows.size()) + " hold-out; need at least 10 on each side");
    }
    accumulate_split(design, train_rows, holdout_rows, grid, scores);
    double holdout_square = 0.0;
    for (const Eigen::Index row : holdout_rows) {
      holdout_square += design.y_tilde[row] * design.y_tilde[row];
    }
    scoring_scale = std::max(1.0, holdout_square / static_cast<double>(holdout_rows.size()));
  } else {
    // Seeded shuffle dealt round-robin into folds; each fold is scored by a
    // model fitted on the others, and fold MSEs are averaged.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(config.seed, 0);
    shuffle(order, rng);
    std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(config.folds));
    for (std::size_t i = 0; i < order.size(); ++i) {
      folds[i % folds.size()].push_back(order[i]);
    }
    for (const auto& fold : folds) {
      if (fold.size() < 10 || order.size() - fold.size() < 10) {
        throw InsufficientDataError(
            "too few rows to split: a fold has " + std::to_string(fold.size()) +
            " row(s) with " + std::to_string(order.size() - fold.size()) +
            " remaining; need at least 10 on each side");
      }
    }
    for (const auto& fold : folds) {
      std::vector<Eigen::Index> train_rows;
      for (const auto& other : folds) {
        if (&other != &fold) {
          train_rows.insert(train_rows.end(), other.begin(), other.end());
        }
      }
      accumulate_split(design, train_rows, fold, grid, scores);
    }
    for (double& score : scores) {
      score /= static_cast<double>(config.folds);
    }
    scoring_scale =
        std::max(1.0, design.y_tilde.squaredNorm() / static_cast<double>(n));
  }

  double best_score = scores[0];
  for (const double score : scores) {
    best_score = std::min(best_score, score);
  }
  // Tie-break toward the larger penalty: prefer the more parsimonious model
  // whenever scores are numerically indistinguishable.
  std::size_t best_index = 0;
  const double window = kTieWindow * scoring_scale;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (scores[g] <= best_score + window) {
      best_index = g;
    }
  }

  TuningResult result;
  result.best_lambda = grid[best_index];
  result.grid = std::move(grid);
  result.scores = std::move(scores);
  return result;
}

}  // namespace focalridge
