#include "focalridge/simulation.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "focalridge/errors.hpp"
#include "focalridge/rng.hpp"

namespace focalridge {

namespace {

// Escalated substreams for redraws live in the counter's upper bits, far
// above any realistic replication index.
constexpr int kRedrawShift = 48;
constexpr int kMaxAttempts = 64;

void validate_config(const SimulationConfig& config) {
  const Eigen::Index K = config.prevalences.size();
  if (K < 1) {
    throw ValidationError("simulation needs at least one sub-treatment prevalence");
  }
  if (config.beta.size() != K) {
    throw ValidationError("beta has " + std::to_string(config.beta.size()) +
                          " entries but there are " + std::to_string(K) + " prevalences");
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(config.prevalences[k] > 0.0 && config.prevalences[k] < 1.0)) {
      throw ValidationError("prevalence " + std::to_string(k + 1) +
                            " must lie strictly in (0, 1)");
    }
  }
  if (config.n < 2) {
    throw ValidationError("simulation needs n >= 2 observations per replication");
  }
  if (config.reps < 1) {
    throw ValidationError("reps must be >= 1");
  }
  if (!(config.noise_sd >= 0.0) || !std::isfinite(config.noise_sd)) {
    throw ValidationError("noise_sd must be a finite nonnegative real");
  }
  if (config.threads < 0) {
    throw ValidationError("threads must be >= 0");
  }
}

// Draw until neither the focal column nor any sub-treatment column is
// constant; such draws would make the unpenalized fit singular or the
// conditional frequencies undefined. Redraws move to an escalated substream
// so they stay independent of every other replication.
Dataset draw_dataset(const SimulationConfig& config, std::uint64_t rep_index,
                     int& redraws) {
  const Eigen::Index n = config.n;
  const Eigen::Index K = config.prevalences.size();
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t stream =
        rep_index | (static_cast<std::uint64_t>(attempt) << kRedrawShift);
    CounterRng rng(config.seed, stream);
    Eigen::MatrixXd treatments(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < K; ++k) {
        treatments(i, k) = rng.bernoulli(config.prevalences[k]);
      }
    }
    const Eigen::VectorXd focal_column = apply_focal(treatments, config.focal);
    bool degenerate = focal_column.minCoeff() == focal_column.maxCoeff();
    for (Eigen::Index k = 0; !degenerate && k < K; ++k) {
      degenerate = treatments.col(k).minCoeff() == treatments.col(k).maxCoeff();
    }
    if (degenerate) {
      ++redraws;
      continue;
    }
    Eigen::VectorXd outcome = config.beta0 * focal_column + treatments * config.beta;
    if (config.noise_sd > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        outcome[i] += config.noise_sd * rng.normal();
      }
    }
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
      names.push_back("D" + std::to_string(k + 1));
    }
    return make_dataset(std::move(outcome), Eigen::MatrixXd(n, 0), std::move(treatments),
                        std::move(names), config.focal);
  }
  throw ValidationError("replication " + std::to_string(rep_index) + " stayed degenerate after " +
                        std::to_string(kMaxAttempts) +
                        " attempts; n is too small for these prevalences");
}

// Mean by recursive pairwise summation: the reduction order is fixed by the
// data layout, never by thread scheduling, and float drift stays near the
// rounding floor even for long accumulations.
double pairwise_sum(const double* values, std::size_t count) {
  if (count <= 8) {
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      sum += values[i];
    }
    return sum;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

double pairwise_mean(const std::vector<double>& values) {
  return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

std::vector<double> resolve_grid(const SimulationConfig& config) {
  std::vector<double> grid =
      config.lambda_grid.empty() ? default_simulation_grid(config) : config.lambda_grid;
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
  return grid;
}

int resolve_threads(const SimulationConfig& config, int reps) {
  int threads = config.threads;
  if (threads == 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) {
      threads = 1;
    }
  }
  return std::min(threads, reps);
}

}  // namespace

SimulationConfig paper_default_config() {
  SimulationConfig config;
  config.prevalences.resize(6);
  config.prevalences << 0.2, 0.05, 0.2, 0.05, 0.2, 0.05;
  config.beta0 = 5.0;
  config.beta.resize(6);
  config.beta << 2.0, 2.0, 1.0, 1.0, -1.0, -1.0;
  config.n = 2000;
  config.noise_sd = 0.0;
  config.focal = FocalSpec{FocalKind::Max};
  config.reps = 500;
  config.seed = 0;
  return config;
}

Dataset simulate_dgp(const SimulationConfig& config, std::uint64_t rep_index) {
  validate_config(config);
  int redraws = 0;
  return draw_dataset(config, rep_index, redraws);
}

AnalyticTargets analytic_targets(const SimulationConfig& config) {
  validate_config(config);
  if (config.focal.kind != FocalKind::Max) {
    throw UnsupportedError(
        "analytic targets are available only for the max focal; the sum focal has no "
        "closed form here (use the Monte Carlo decomposition instead)");
  }
  const Eigen::Index K = config.prevalences.size();
  AnalyticTargets targets;
  targets.tau0 = analytic_tau0_binary_max(config.prevalences, config.beta0, config.beta);
  targets.tau.resize(K);
  const double cross = config.beta.dot(config.prevalences);
  for (Eigen::Index j = 0; j < K; ++j) {
    targets.tau[j] = config.beta[j] + config.beta0 + cross -
                     config.beta[j] * config.prevalences[j];
  }
  return targets;
}

std::vector<double> default_simulation_grid(const SimulationConfig& config) {
  validate_config(config);
  const Eigen::Index K = config.prevalences.size();
  // Expected column energy of the centered stacked design.
  double trace = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    trace += config.prevalences[k] * (1.0 - config.prevalences[k]);
  }
  if (config.focal.kind == FocalKind::Max) {
    double none = 1.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      none *= 1.0 - config.prevalences[k];
    }
    const double any = 1.0 - none;
    trace += any * (1.0 - any);
  } else {
    // Independent sub-treatments: the sum's variance is the sum of variances.
    trace *= 2.0;
  }
  trace *= static_cast<double>(config.n);
  const double g = trace / static_cast<double>(K);
  std::vector<double> grid;
  grid.push_back(0.0);
  constexpr int kPoints = 25;
  const double low = 1e-6 * g;
  const double high = 1e4 * g;
  const double step = std::log(high / low) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) {
    grid.push_back(low * std::exp(step * i));
  }
  return grid;
}

MseDecomposition run_mse_decomposition(const SimulationConfig& config) {
  validate_config(config);
  if (config.reps < 2) {
    throw ValidationError("the decomposition needs reps >= 2 (variance over replications)");
  }
  const std::vector<double> grid = resolve_grid(config);
  const AnalyticTargets targets = analytic_targets(config);
  const Eigen::Index K = config.prevalences.size();
  const std::size_t L = grid.size();
  const std::size_t reps = static_cast<std::size_t>(config.reps);

  // Per-replication estimates land in preassigned slots, so the memory
  // layout (and with it every later reduction) is independent of how
  // replications are scheduled across threads.
  std::vector<double> estimates(reps * static_cast<std::size_t>(K) * L);
  std::vector<int> redraws_per_worker;

  const int threads = resolve_threads(config, config.reps);
  auto worker = [&](std::size_t begin, std::size_t end, int worker_index) {
    const NuisanceSpec mean_only;
    for (std::size_t r = begin; r < end; ++r) {
      const Dataset data = draw_dataset(config, r, redraws_per_worker[
          static_cast<std::size_t>(worker_index)]);
      const ResidualizedDesign design = residualize(data, config.focal, mean_only);
      const RidgeSolver solver(design);
      // Conditional frequencies do not depend on lambda; compute them once.
      Eigen::MatrixXd cond(K, K);
      for (Eigen::Index j = 0; j < K; ++j) {
        const double count_j = data.treatments.col(j).sum();
        for (Eigen::Index k = 0; k < K; ++k) {
          cond(j, k) = data.treatments.col(j).dot(data.treatments.col(k)) / count_j;
        }
      }
      for (std::size_t l = 0; l < L; ++l) {
        const RidgeFit fit = solver.fit(grid[l], CovarianceKind::Homoscedastic,
                                        /*with_inference=*/false);
        for (Eigen::Index j = 0; j < K; ++j) {
          double spillover = 0.0;
          for (Eigen::Index k = 0; k < K; ++k) {
            if (k != j) {
              spillover += fit.beta[k] * cond(j, k);
            }
          }
          estimates[(r * static_cast<std::size_t>(K) + static_cast<std::size_t>(j)) * L +
                    l] = fit.beta[j] + fit.beta0 + spillover;
        }
      }
    }
  };

  if (threads <= 1) {
    redraws_per_worker.assign(1, 0);
    worker(0, reps, 0);
  } else {
    redraws_per_worker.assign(static_cast<std::size_t>(threads), 0);
    // An exception escaping a std::thread terminates the process, so each
    // worker parks its failure here and the main thread rethrows after join.
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(threads));
    auto guarded = [&](std::size_t begin, std::size_t end, int worker_index) {
      try {
        worker(begin, end, worker_index);
      } catch (...) {
        failures[static_cast<std::size_t>(worker_index)] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    const std::size_t chunk = (reps + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * chunk;
      const std::size_t end = std::min(reps, begin + chunk);
      if (begin >= end) {
        break;
      }
      pool.emplace_back(guarded, begin, end, t);
    }
    for (std::thread& thread : pool) {
      thread.join();
    }
    for (const std::exception_ptr& failure : failures) {
      if (failure) {
        std::rethrow_exception(failure);
      }
    }
  }

  int redraw_count = 0;
  for (const int count : redraws_per_worker) {
    redraw_count += count;
  }
  if (redraw_count > config.reps / 10) {
    throw ValidationError("simulation redrew " + std::to_string(redraw_count) +
                          " degenerate draws across " + std::to_string(config.reps) +
                          " replications (over 10%); increase n or rethink the prevalences");
  }

  MseDecomposition result;
  result.lambdas = grid;
  result.bias_sq.resize(K, static_cast<Eigen::Index>(L));
  result.variance.resize(K, static_cast<Eigen::Index>(L));
  result.mse.resize(K, static_cast<Eigen::Index>(L));
  result.reps = config.reps;
  result.targets = targets;
  result.redraw_count = redraw_count;

  std::vector<double> cell(reps);
  std::vector<double> deviations(reps);
  for (Eigen::Index j = 0; j < K; ++j) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t r = 0; r < reps; ++r) {
        cell[r] =
            estimates[(r * static_cast<std::size_t>(K) + static_cast<std::size_t>(j)) * L + l];
      }
      const double mean = pairwise_mean(cell);
      const double target = targets.tau[j];
      for (std::size_t r = 0; r < reps; ++r) {
        deviations[r] = (cell[r] - mean) * (cell[r] - mean);
      }
      const double variance = pairwise_mean(deviations);
      for (std::size_t r = 0; r < reps; ++r) {
        deviations[r] = (cell[r] - target) * (cell[r] - target);
      }
      const double mse = pairwise_mean(deviations);
      result.bias_sq(j, static_cast<Eigen::Index>(l)) = (mean - target) * (mean - target);
      result.variance(j, static_cast<Eigen::Index>(l)) = variance;
      result.mse(j, static_cast<Eigen::Index>(l)) = mse;
    }
  }
  return result;
}

std::vector<ShrinkagePathRow> shrinkage_path(const ResidualizedDesign& design,
                                             const Dataset& data,
                                             const std::vector<double>& grid,
                                             CovarianceKind kind) {
  if (grid.empty()) {
    throw ValidationError("lambda grid must be nonempty");
  }
  const RidgeSolver solver(design);
  std::vector<ShrinkagePathRow> rows;
  rows.reserve(grid.size() * (static_cast<std::size_t>(data.sub_treatment_count()) + 1));
  for (const double lambda : grid) {
    const RidgeFit fit = solver.fit(lambda, kind);
    const ReconstructedEffects effects = reconstruct_effects(fit, design, data);
    ShrinkagePathRow focal_row;
    focal_row.lambda = lambda;
    focal_row.coefficient = "focal";
    focal_row.beta_hat = fit.beta0;
    focal_row.tau_hat = effects.tau0;
    focal_row.tau0_hat = effects.tau0;
    if (fit.covariance) {
      focal_row.se = std::sqrt((*fit.covariance)(0, 0));
    }
    rows.push_back(std::move(focal_row));
    for (Eigen::Index j = 0; j < data.sub_treatment_count(); ++j) {
      ShrinkagePathRow row;
      row.lambda = lambda;
      row.coefficient = data.treatment_names[static_cast<std::size_t>(j)];
      row.beta_hat = fit.beta[j];
      row.tau_hat = effects.tau[j];
      row.tau0_hat = effects.tau0;
      if (fit.covariance) {
        row.se = std::sqrt((*fit.covariance)(j + 1, j + 1));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ShrinkagePathRow> shrinkage_path(const SimulationConfig& config) {
  validate_config(config);
  const std::vector<double> grid = resolve_grid(config);
  const Dataset data = simulate_dgp(config, 0);
  const ResidualizedDesign design = residualize(data, config.focal, NuisanceSpec{});
  return shrinkage_path(design, data, grid, CovarianceKind::Homoscedastic);
}

}  // namespace focalridge
