// Monte Carlo harness: data-generating process, closed-form targets,
// bias/variance/MSE decomposition, and penalty sweeps.

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "focalridge/dataset.hpp"
#include "focalridge/errors.hpp"
#include "focalridge/nuisance.hpp"
#include "focalridge/residualize.hpp"
#include "focalridge/ridge.hpp"
#include "focalridge/simulation.hpp"

namespace {

using namespace focalridge;

SimulationConfig make_config(std::vector<double> prevalences, std::vector<double> beta,
                             Eigen::Index n, int reps, std::uint64_t seed = 0) {
  SimulationConfig config;
  config.prevalences = Eigen::Map<const Eigen::VectorXd>(
      prevalences.data(), static_cast<Eigen::Index>(prevalences.size()));
  config.beta = Eigen::Map<const Eigen::VectorXd>(
      beta.data(), static_cast<Eigen::Index>(beta.size()));
  config.n = n;
  config.reps = reps;
  config.seed = seed;
  return config;
}

// Reference values for the default configuration, frozen from exact
// closed-form arithmetic: tau_j = beta_j + beta0 + sum_{k!=j} beta_k p_k and
// tau0 = beta0 + (sum_k beta_k p_k) / (1 - prod_m (1 - p_m)).
constexpr double kDefaultTau0 = 5.891227469769564;
const std::vector<double> kDefaultTau = {7.1, 7.4, 6.3, 6.45, 4.7, 4.55};

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("default configuration carries the reference design") {
  const SimulationConfig config = paper_default_config();
  REQUIRE(config.prevalences.size() == 6);
  const std::vector<double> expected_p = {0.2, 0.05, 0.2, 0.05, 0.2, 0.05};
  const std::vector<double> expected_beta = {2.0, 2.0, 1.0, 1.0, -1.0, -1.0};
  for (Eigen::Index k = 0; k < 6; ++k) {
    CHECK(config.prevalences[k] == expected_p[static_cast<std::size_t>(k)]);
    CHECK(config.beta[k] == expected_beta[static_cast<std::size_t>(k)]);
  }
  CHECK(config.beta0 == 5.0);
  CHECK(config.n == 2000);
  CHECK(config.noise_sd == 0.0);
  CHECK(config.focal.kind == FocalKind::Max);
  CHECK(config.reps == 500);
  CHECK(config.seed == 0);
  CHECK(config.lambda_grid.empty());
}

TEST_CASE("noiseless outcomes are exact linear combinations of the draws") {
  const SimulationConfig config = paper_default_config();
  const Dataset data = simulate_dgp(config, 0);
  REQUIRE(data.unit_count() == 2000);
  REQUIRE(data.sub_treatment_count() == 6);
  REQUIRE(data.covariate_count() == 0);

  const Eigen::VectorXd focal = apply_focal(data.treatments, config.focal);
  bool saw_all_zero = false;
  bool saw_first_only = false;
  for (Eigen::Index i = 0; i < data.unit_count(); ++i) {
    // Every outcome must reproduce beta0 * focal + beta . treatments exactly:
    // there is no noise term to absorb drift.
    const double expected =
        config.beta0 * focal[i] + data.treatments.row(i).dot(config.beta);
    CHECK(data.outcome[i] == expected);
    if (data.treatments.row(i).sum() == 0.0) {
      saw_all_zero = true;
      CHECK(data.outcome[i] == 0.0);
    }
    if (data.treatments(i, 0) == 1.0 &&
        data.treatments.row(i).sum() == 1.0) {
      saw_first_only = true;
      // beta0 + beta_1 = 5 + 2.
      CHECK(data.outcome[i] == 7.0);
    }
  }
  // Both row patterns appear with near-certain probability at n = 2000
  // (43.8% and 11.0% per row respectively).
  CHECK(saw_all_zero);
  CHECK(saw_first_only);

  SUBCASE("treatment names follow the D1..DK convention") {
    REQUIRE(data.treatment_names.size() == 6);
    CHECK(data.treatment_names.front() == "D1");
    CHECK(data.treatment_names.back() == "D6");
  }

  SUBCASE("replications differ but are individually deterministic") {
    const Dataset again = simulate_dgp(config, 0);
    CHECK(again.outcome == data.outcome);
    CHECK(again.treatments == data.treatments);
    const Dataset other = simulate_dgp(config, 1);
    CHECK(other.treatments != data.treatments);
  }
}

TEST_CASE("sample prevalences concentrate at their targets for large n") {
  SimulationConfig config = paper_default_config();
  config.n = 1000000;
  const Dataset data = simulate_dgp(config, 0);
  for (Eigen::Index k = 0; k < 6; ++k) {
    const double p = config.prevalences[k];
    const double tolerance = 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(config.n));
    CHECK(std::abs(data.treatments.col(k).mean() - p) < tolerance);
    CHECK(data.prevalence[k] == data.treatments.col(k).mean());
  }
  // The aggregate-treatment rate matches 1 - prod(1 - p_k) = 0.561024.
  const Eigen::VectorXd focal = apply_focal(data.treatments, config.focal);
  const double any_rate = 0.561024;
  const double tolerance =
      4.0 * std::sqrt(any_rate * (1.0 - any_rate) / static_cast<double>(config.n));
  CHECK(std::abs(focal.mean() - any_rate) < tolerance);
}

TEST_CASE("closed-form targets match frozen reference arithmetic") {
  const SimulationConfig config = paper_default_config();
  const AnalyticTargets targets = analytic_targets(config);
  CHECK(targets.tau0 == doctest::Approx(kDefaultTau0).epsilon(1e-15));
  REQUIRE(targets.tau.size() == 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    CHECK(targets.tau[j] ==
          doctest::Approx(kDefaultTau[static_cast<std::size_t>(j)]).epsilon(1e-12));
  }

  SUBCASE("a single sub-treatment makes the aggregate and per-treatment targets equal") {
    const SimulationConfig single = make_config({0.4}, {1.5}, 100, 2);
    SimulationConfig with_intercept = single;
    with_intercept.beta0 = 3.0;
    const AnalyticTargets t = analytic_targets(with_intercept);
    CHECK(t.tau[0] == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(t.tau0 == doctest::Approx(t.tau[0]).epsilon(1e-12));
  }

  SUBCASE("the sum focal has no closed form and is refused") {
    SimulationConfig sum_config = paper_default_config();
    sum_config.focal = FocalSpec{FocalKind::Sum};
    CHECK_THROWS_AS(analytic_targets(sum_config), UnsupportedError);
    CHECK_THROWS_AS(run_mse_decomposition(sum_config), UnsupportedError);
  }
}

TEST_CASE("default penalty grid is zero plus 25 log-spaced points") {
  const SimulationConfig config = paper_default_config();
  const std::vector<double> grid = default_simulation_grid(config);
  REQUIRE(grid.size() == 26);
  CHECK(grid[0] == 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] > grid[i - 1]);
    CHECK(std::isfinite(grid[i]));
  }
  // Endpoints bracket the expected per-column energy of the stacked design
  // by factors 1e-6 and 1e4.
  double trace = 0.0;
  double none = 1.0;
  for (Eigen::Index k = 0; k < 6; ++k) {
    const double p = config.prevalences[k];
    trace += p * (1.0 - p);
    none *= 1.0 - p;
  }
  trace += (1.0 - none) * none;
  const double g = trace * static_cast<double>(config.n) / 6.0;
  CHECK(grid[1] == doctest::Approx(1e-6 * g).epsilon(1e-12));
  CHECK(grid[25] == doctest::Approx(1e4 * g).epsilon(1e-12));
  // Log-spacing: consecutive ratios are constant.
  const double ratio = grid[2] / grid[1];
  for (std::size_t i = 2; i + 1 < grid.size(); ++i) {
    CHECK(grid[i + 1] / grid[i] == doctest::Approx(ratio).epsilon(1e-9));
  }
}

TEST_CASE("unpenalized noiseless estimates are nearly exact at huge n") {
  // With exact linear outcomes the lambda = 0 fit recovers the coefficients
  // to solver precision; the only error left in the per-treatment effects is
  // the sampling noise of the plug-in conditional frequencies.
  SimulationConfig config = paper_default_config();
  config.n = 1000000;
  config.reps = 2;
  config.lambda_grid = {0.0};
  const MseDecomposition result = run_mse_decomposition(config);
  REQUIRE(result.lambdas == std::vector<double>{0.0});
  REQUIRE(result.bias_sq.rows() == 6);
  REQUIRE(result.bias_sq.cols() == 1);
  for (Eigen::Index j = 0; j < 6; ++j) {
    CHECK(result.mse(j, 0) < 1e-3);
  }
  CHECK(result.reps == 2);
  CHECK(result.redraw_count == 0);
}

TEST_CASE("decomposition identity and determinism across thread counts") {
  SimulationConfig config = paper_default_config();
  config.n = 500;
  config.reps = 40;

  SimulationConfig serial = config;
  serial.threads = 1;
  const MseDecomposition a = run_mse_decomposition(serial);

  SimulationConfig parallel = config;
  parallel.threads = 0;  // one worker per hardware thread
  const MseDecomposition b = run_mse_decomposition(parallel);

  REQUIRE(a.lambdas == b.lambdas);
  // Fixed-order pairwise reduction: bitwise equality, not approximate.
  CHECK(a.bias_sq == b.bias_sq);
  CHECK(a.variance == b.variance);
  CHECK(a.mse == b.mse);
  CHECK(a.redraw_count == b.redraw_count);

  // mse = bias_sq + variance is an exact identity under the 1/reps
  // normalization, up to float rounding.
  for (Eigen::Index j = 0; j < a.bias_sq.rows(); ++j) {
    for (Eigen::Index l = 0; l < a.bias_sq.cols(); ++l) {
      const double gap = std::abs(a.mse(j, l) - a.bias_sq(j, l) - a.variance(j, l));
      CHECK(gap <= 1e-10 * std::max(1.0, a.mse(j, l)));
    }
  }
}

TEST_CASE("an overwhelming penalty collapses every effect onto the aggregate") {
  SimulationConfig config = paper_default_config();
  config.n = 4000;
  config.reps = 150;
  config.lambda_grid = {0.0, 1e8 * static_cast<double>(config.n)};
  const MseDecomposition result = run_mse_decomposition(config);
  const AnalyticTargets targets = result.targets;
  for (Eigen::Index j = 0; j < 6; ++j) {
    const double collapse_bias = (targets.tau[j] - targets.tau0) *
                                 (targets.tau[j] - targets.tau0);
    // At the collapsed end, squared bias accounts for nearly all the error...
    CHECK(result.bias_sq(j, 1) == doctest::Approx(collapse_bias).epsilon(0.12));
    CHECK(result.variance(j, 1) < 0.05 * result.mse(j, 1));
    // ...and exceeds the unpenalized bias by orders of magnitude.
    CHECK(result.bias_sq(j, 1) > 100.0 * result.bias_sq(j, 0));
  }
}

TEST_CASE("unpenalized error shrinks faster than 1/10 when n grows 100x") {
  SimulationConfig small = paper_default_config();
  small.n = 1000;
  small.reps = 60;
  small.lambda_grid = {0.0};
  const MseDecomposition coarse = run_mse_decomposition(small);

  SimulationConfig large = small;
  large.n = 100000;
  const MseDecomposition fine = run_mse_decomposition(large);

  for (Eigen::Index j = 0; j < 6; ++j) {
    CHECK(fine.mse(j, 0) < 0.1 * coarse.mse(j, 0));
  }
}

TEST_CASE("degenerate draws are redrawn, and persistent degeneracy is refused") {
  SUBCASE("rare-column redraws are counted but tolerated") {
    // P(the 0.1-prevalence column stays all-zero) = 0.9^30 = 4.2% per draw:
    // redraws happen but stay well under the 10% budget at 200 replications.
    // A positive penalty keeps collinear small-sample draws fittable; the
    // redraw policy only concerns constant columns.
    SimulationConfig config = make_config({0.5, 0.1}, {1.0, -1.0}, 30, 200);
    config.threads = 1;
    config.lambda_grid = {1.0};
    const MseDecomposition result = run_mse_decomposition(config);
    CHECK(result.redraw_count >= 1);
    CHECK(result.redraw_count <= config.reps / 10);
  }

  SUBCASE("a design that degenerates too often is rejected") {
    // P(the 0.02-prevalence column stays all-zero) = 0.98^30 = 54.5% per
    // draw, so redraws blow straight through the 10% budget.
    SimulationConfig config = make_config({0.5, 0.02}, {1.0, -1.0}, 30, 100);
    config.threads = 1;
    config.lambda_grid = {1.0};
    CHECK_THROWS_WITH_AS(run_mse_decomposition(config),
                         doctest::Contains("over 10%"), ValidationError);
  }

  SUBCASE("worker failures surface from parallel runs too") {
    SimulationConfig config = make_config({0.5, 0.02}, {1.0, -1.0}, 30, 100);
    config.threads = 4;
    config.lambda_grid = {1.0};
    CHECK_THROWS_AS(run_mse_decomposition(config), ValidationError);
  }
}

TEST_CASE("configuration validation rejects malformed inputs") {
  const SimulationConfig good = make_config({0.3, 0.2}, {1.0, 2.0}, 100, 4);
  CHECK_NOTHROW(simulate_dgp(good, 0));

  SUBCASE("no sub-treatments") {
    SimulationConfig config = good;
    config.prevalences.resize(0);
    config.beta.resize(0);
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("coefficient count mismatch") {
    SimulationConfig config = good;
    config.beta.resize(3);
    config.beta << 1.0, 2.0, 3.0;
    CHECK_THROWS_WITH_AS(simulate_dgp(config, 0), doctest::Contains("3 entries"),
                         ValidationError);
  }
  SUBCASE("prevalence on the boundary") {
    SimulationConfig config = good;
    config.prevalences[1] = 0.0;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
    config.prevalences[1] = 1.0;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("too few observations") {
    SimulationConfig config = good;
    config.n = 1;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("no replications") {
    SimulationConfig config = good;
    config.reps = 0;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("negative or non-finite noise") {
    SimulationConfig config = good;
    config.noise_sd = -0.5;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
    config.noise_sd = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("negative thread count") {
    SimulationConfig config = good;
    config.threads = -1;
    CHECK_THROWS_AS(simulate_dgp(config, 0), ValidationError);
  }
  SUBCASE("the decomposition needs at least two replications") {
    SimulationConfig config = good;
    config.reps = 1;
    CHECK_THROWS_WITH_AS(run_mse_decomposition(config),
                         doctest::Contains("reps >= 2"), ValidationError);
  }
}

TEST_CASE("penalty grids must be finite, nonnegative, and strictly increasing") {
  SimulationConfig config = make_config({0.3, 0.2}, {1.0, 2.0}, 100, 4);

  SUBCASE("negative entry") {
    config.lambda_grid = {-1.0, 1.0};
    CHECK_THROWS_WITH_AS(run_mse_decomposition(config),
                         doctest::Contains("finite and nonnegative"), ValidationError);
  }
  SUBCASE("non-finite entry") {
    config.lambda_grid = {0.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(run_mse_decomposition(config), ValidationError);
  }
  SUBCASE("duplicate entry") {
    config.lambda_grid = {0.0, 1.0, 1.0};
    CHECK_THROWS_WITH_AS(run_mse_decomposition(config),
                         doctest::Contains("strictly increasing"), ValidationError);
  }
  SUBCASE("unsorted entries") {
    config.lambda_grid = {1.0, 0.5};
    CHECK_THROWS_AS(shrinkage_path(config), ValidationError);
  }
  SUBCASE("an explicit empty grid is rejected at the design-level entry point") {
    const Dataset data = simulate_dgp(config, 0);
    const ResidualizedDesign design = residualize(data, config.focal, NuisanceSpec{});
    CHECK_THROWS_WITH_AS(
        shrinkage_path(design, data, {}, CovarianceKind::Homoscedastic),
        doctest::Contains("nonempty"), ValidationError);
  }
}

TEST_CASE("penalty sweep rows are structured per lambda and per coefficient") {
  const SimulationConfig config = paper_default_config();
  const std::vector<ShrinkagePathRow> rows = shrinkage_path(config);
  const std::vector<double> grid = default_simulation_grid(config);
  REQUIRE(rows.size() == grid.size() * 7);

  const double tau0_reference = rows.front().tau0_hat;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const ShrinkagePathRow& focal_row = rows[l * 7];
    CHECK(focal_row.coefficient == "focal");
    CHECK(focal_row.lambda == grid[l]);
    CHECK(focal_row.tau_hat == focal_row.tau0_hat);
    for (std::size_t j = 1; j < 7; ++j) {
      const ShrinkagePathRow& row = rows[l * 7 + j];
      CHECK(row.coefficient == "D" + std::to_string(j));
      CHECK(row.lambda == grid[l]);
      // The aggregate effect is invariant across lambda and across rows.
      CHECK(std::abs(row.tau0_hat - tau0_reference) <=
            1e-8 * std::abs(tau0_reference));
      // n >> p, so every row carries a standard error.
      CHECK(row.se.has_value());
      CHECK(*row.se >= 0.0);
    }
  }

  SUBCASE("the largest penalty pulls every effect onto the aggregate") {
    const std::size_t last = grid.size() - 1;
    for (std::size_t j = 1; j < 7; ++j) {
      const ShrinkagePathRow& row = rows[last * 7 + j];
      CHECK(std::abs(row.tau_hat - row.tau0_hat) < 1e-3 * std::abs(row.tau0_hat));
    }
  }

  SUBCASE("fitted sub-treatment coefficients shrink monotonically in magnitude at the ends") {
    for (std::size_t j = 1; j < 7; ++j) {
      const double at_zero = std::abs(rows[j].beta_hat);
      const double at_max = std::abs(rows[(grid.size() - 1) * 7 + j].beta_hat);
      CHECK(at_max < 1e-3 * std::max(1.0, at_zero));
    }
  }
}

TEST_CASE("an unpenalized sweep at huge n recovers the generating coefficients") {
  SimulationConfig config = paper_default_config();
  config.n = 100000;
  const Dataset data = simulate_dgp(config, 0);
  const ResidualizedDesign design = residualize(data, config.focal, NuisanceSpec{});
  const std::vector<ShrinkagePathRow> rows =
      shrinkage_path(design, data, {0.0}, CovarianceKind::Homoscedastic);
  REQUIRE(rows.size() == 7);
  // Exact linear outcome: the solve recovers beta to numerical precision.
  CHECK(rows[0].beta_hat == doctest::Approx(config.beta0).epsilon(1e-9));
  const AnalyticTargets targets = analytic_targets(config);
  for (std::size_t j = 1; j < 7; ++j) {
    CHECK(rows[j].beta_hat ==
          doctest::Approx(config.beta[static_cast<Eigen::Index>(j - 1)]).epsilon(1e-9));
    // Plug-in effects use sample conditional frequencies; at n = 1e5 they sit
    // within a few hundredths of the closed-form targets.
    CHECK(std::abs(rows[j].tau_hat - targets.tau[static_cast<Eigen::Index>(j - 1)]) <
          0.05);
  }
  CHECK(std::abs(rows[0].tau0_hat - targets.tau0) < 0.05);
}

TEST_CASE("standard errors are omitted when there are no degrees of freedom") {
  // Three observations against three stacked columns leave n - p = 0. The
  // zero-penalty design is collinear by construction here (no overlap rows),
  // so sweep at a positive penalty where the fit is well-posed.
  Eigen::VectorXd outcome(3);
  outcome << 1.0, 2.0, 0.5;
  Eigen::MatrixXd treatments(3, 2);
  treatments << 1, 0,
                0, 1,
                0, 0;
  const FocalSpec focal{FocalKind::Max};
  const Dataset data = make_dataset(outcome, Eigen::MatrixXd(3, 0), treatments,
                                    {"D1", "D2"}, focal);
  const ResidualizedDesign design = residualize(data, focal, NuisanceSpec{});
  const std::vector<ShrinkagePathRow> rows =
      shrinkage_path(design, data, {0.5}, CovarianceKind::Homoscedastic);
  REQUIRE(rows.size() == 3);
  for (const ShrinkagePathRow& row : rows) {
    CHECK_FALSE(row.se.has_value());
  }
}

}  // TEST_SUITE
