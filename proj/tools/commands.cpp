#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "focalridge/csv.hpp"
#include "focalridge/dataset.hpp"
#include "focalridge/errors.hpp"
#include "focalridge/manifest.hpp"
#include "focalridge/nuisance.hpp"
#include "focalridge/reconstruct.hpp"
#include "focalridge/residualize.hpp"
#include "focalridge/ridge.hpp"
#include "focalridge/simulation.hpp"
#include "focalridge/tuning.hpp"
#include "focalridge/version.hpp"

namespace focalridge::cli {

namespace {

using nlohmann::json;
using csv::format_double;
using csv::parse_double;
using csv::read_table_file;
using csv::write_row;

json optional_to_json(const std::optional<double>& value) {
  if (value) {
    return *value;
  }
  return nullptr;
}

std::optional<double> optional_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  return j.at(key).get<double>();
}

json grid_to_json(const std::vector<double>& values, const std::string& spec) {
  if (!values.empty()) {
    return values;
  }
  if (!spec.empty()) {
    return spec;
  }
  return nullptr;
}

void grid_from_json(const json& j, std::vector<double>& values, std::string& spec) {
  values.clear();
  spec.clear();
  if (!j.contains("grid") || j.at("grid").is_null()) {
    return;
  }
  const json& g = j.at("grid");
  if (g.is_string()) {
    spec = g.get<std::string>();
  } else {
    values = g.get<std::vector<double>>();
  }
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return fallback;
  }
  return j.at(key).get<T>();
}

NuisanceSpec parse_nuisance(const std::string& text, int cross_fit, std::uint64_t seed) {
  NuisanceSpec spec;
  spec.cross_fit_folds = cross_fit;
  spec.seed = seed;
  if (text == "mean") {
    spec.learner = NuisanceLearner::MeanOnly;
  } else if (text == "linear") {
    spec.learner = NuisanceLearner::LinearLeastSquares;
  } else if (text.rfind("knn:", 0) == 0) {
    spec.learner = NuisanceLearner::KNearestNeighbors;
    const std::string count = text.substr(4);
    bool ok = false;
    const double k = parse_double(count, ok);
    if (!ok || k < 1 || k != std::floor(k)) {
      throw ValidationError("nuisance 'knn:K' needs a positive integer K, got '" + count + "'");
    }
    spec.knn_k = static_cast<int>(k);
  } else {
    throw ValidationError("unknown nuisance '" + text + "'; expected mean, linear, or knn:K");
  }
  return spec;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

Dataset load_dataset(const std::string& input, const std::string& outcome,
                     const std::vector<std::string>& treatments,
                     const std::vector<std::string>& covariates, const FocalSpec& focal) {
  if (input.empty()) {
    throw ValidationError("an input CSV is required (--input)");
  }
  if (outcome.empty()) {
    throw ValidationError("an outcome column is required (--outcome)");
  }
  if (treatments.empty()) {
    throw ValidationError("at least one treatment column is required (--treatments)");
  }
  const RawTable table = read_table_file(input);
  ColumnRoles roles;
  roles.outcome = outcome;
  roles.treatments = treatments;
  roles.covariates = covariates;
  roles.focal = focal;
  return validate_dataset(table, roles);
}

std::filesystem::path prepare_out_dir(const std::string& out) {
  if (out.empty()) {
    throw ValidationError("an output directory is required (--out)");
  }
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IngestionError("cannot create output directory '" + out + "': " + ec.message());
  }
  return dir;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream stream(path);
  if (!stream) {
    throw IngestionError("cannot open '" + path.string() + "' for writing");
  }
  stream << text;
  if (!stream) {
    throw IngestionError("failed while writing '" + path.string() + "'");
  }
}

std::string render_path_rows(const std::vector<ShrinkagePathRow>& rows) {
  std::ostringstream csv;
  write_row(csv, {"lambda", "coefficient_name", "beta_hat", "tau_hat", "tau0_hat", "se"});
  for (const ShrinkagePathRow& row : rows) {
    write_row(csv, {format_double(row.lambda), row.coefficient, format_double(row.beta_hat),
                    format_double(row.tau_hat), format_double(row.tau0_hat),
                    row.se ? format_double(*row.se) : std::string{}});
  }
  return csv.str();
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    json config, std::map<std::string, std::string> digests,
                    std::uint64_t seed) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config = std::move(config);
  manifest.input_digests = std::move(digests);
  manifest.seed = seed;
  manifest.library_version = kVersion;
  manifest.rng = kRngDescription;
  manifest.timestamp_utc = current_utc_timestamp();
  manifest.write_file((dir / "manifest.json").string());
}

}  // namespace

json FitOptions::to_json() const {
  return json{{"input", input},
              {"outcome", outcome},
              {"treatments", treatments},
              {"covariates", covariates},
              {"focal", focal},
              {"nuisance", nuisance},
              {"cross_fit", cross_fit},
              {"lambda", optional_to_json(lambda)},
              {"tune", tune},
              {"grid", grid_to_json(grid_values, grid_spec)},
              {"holdout", holdout},
              {"covariance", covariance},
              {"seed", seed},
              {"out", out}};
}

FitOptions FitOptions::from_json(const json& j) {
  FitOptions options;
  options.input = value_or<std::string>(j, "input", "");
  options.outcome = value_or<std::string>(j, "outcome", "");
  options.treatments = value_or<std::vector<std::string>>(j, "treatments", {});
  options.covariates = value_or<std::vector<std::string>>(j, "covariates", {});
  options.focal = value_or<std::string>(j, "focal", options.focal);
  options.nuisance = value_or<std::string>(j, "nuisance", options.nuisance);
  options.cross_fit = value_or<int>(j, "cross_fit", options.cross_fit);
  options.lambda = optional_from_json(j, "lambda");
  options.tune = value_or<bool>(j, "tune", false);
  grid_from_json(j, options.grid_values, options.grid_spec);
  options.holdout = value_or<double>(j, "holdout", options.holdout);
  options.covariance = value_or<std::string>(j, "covariance", options.covariance);
  options.seed = value_or<std::uint64_t>(j, "seed", 0);
  options.out = value_or<std::string>(j, "out", "");
  return options;
}

json SweepOptions::to_json() const {
  return json{{"input", input},
              {"outcome", outcome},
              {"treatments", treatments},
              {"covariates", covariates},
              {"focal", focal},
              {"nuisance", nuisance},
              {"cross_fit", cross_fit},
              {"grid", grid_to_json(grid_values, grid_spec)},
              {"covariance", covariance},
              {"seed", seed},
              {"out", out}};
}

SweepOptions SweepOptions::from_json(const json& j) {
  SweepOptions options;
  options.input = value_or<std::string>(j, "input", "");
  options.outcome = value_or<std::string>(j, "outcome", "");
  options.treatments = value_or<std::vector<std::string>>(j, "treatments", {});
  options.covariates = value_or<std::vector<std::string>>(j, "covariates", {});
  options.focal = value_or<std::string>(j, "focal", options.focal);
  options.nuisance = value_or<std::string>(j, "nuisance", options.nuisance);
  options.cross_fit = value_or<int>(j, "cross_fit", options.cross_fit);
  grid_from_json(j, options.grid_values, options.grid_spec);
  options.covariance = value_or<std::string>(j, "covariance", options.covariance);
  options.seed = value_or<std::uint64_t>(j, "seed", 0);
  options.out = value_or<std::string>(j, "out", "");
  return options;
}

json SimulateOptions::to_json() const {
  return json{{"paper_defaults", paper_defaults},
              {"prevalences", prevalences},
              {"beta0", beta0},
              {"beta", beta},
              {"n", n},
              {"noise_sd", noise_sd},
              {"focal", focal},
              {"reps", reps},
              {"seed", seed},
              {"lambda", optional_to_json(lambda)},
              {"grid", grid_to_json(grid_values, grid_spec)},
              {"threads", threads},
              {"out", out}};
}

SimulateOptions SimulateOptions::from_json(const json& j) {
  SimulateOptions options;
  options.paper_defaults = value_or<bool>(j, "paper_defaults", false);
  options.prevalences = value_or<std::vector<double>>(j, "prevalences", {});
  options.beta0 = value_or<double>(j, "beta0", options.beta0);
  options.beta = value_or<std::vector<double>>(j, "beta", {});
  options.n = value_or<long long>(j, "n", options.n);
  options.noise_sd = value_or<double>(j, "noise_sd", options.noise_sd);
  options.focal = value_or<std::string>(j, "focal", options.focal);
  options.reps = value_or<int>(j, "reps", options.reps);
  options.seed = value_or<std::uint64_t>(j, "seed", 0);
  options.lambda = optional_from_json(j, "lambda");
  grid_from_json(j, options.grid_values, options.grid_spec);
  options.threads = value_or<int>(j, "threads", options.threads);
  options.out = value_or<std::string>(j, "out", "");
  return options;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  if (spec.empty()) {
    throw ValidationError("empty grid specification");
  }
  const bool with_zero = spec.rfind("0+log:", 0) == 0;
  const bool log_spaced = with_zero || spec.rfind("log:", 0) == 0;
  std::vector<double> grid;
  if (log_spaced) {
    const std::string body = spec.substr(with_zero ? 6 : 4);
    std::vector<std::string> parts;
    std::string piece;
    std::istringstream stream(body);
    while (std::getline(stream, piece, ':')) {
      parts.push_back(piece);
    }
    if (parts.size() != 3) {
      throw ValidationError("grid '" + spec + "' must look like log:LO:HI:N");
    }
    bool ok_low = false;
    bool ok_high = false;
    bool ok_count = false;
    const double low = parse_double(parts[0], ok_low);
    const double high = parse_double(parts[1], ok_high);
    const double count = parse_double(parts[2], ok_count);
    if (!ok_low || !ok_high || !ok_count) {
      throw ValidationError("grid '" + spec + "' has non-numeric parts");
    }
    if (!(low > 0.0) || !(high > low)) {
      throw ValidationError("grid '" + spec + "' needs 0 < LO < HI");
    }
    if (count < 2 || count != std::floor(count)) {
      throw ValidationError("grid '" + spec + "' needs an integer point count N >= 2");
    }
    const int points = static_cast<int>(count);
    if (with_zero) {
      grid.push_back(0.0);
    }
    const double step = std::log(high / low) / (points - 1);
    for (int i = 0; i < points; ++i) {
      grid.push_back(low * std::exp(step * i));
    }
    return grid;
  }
  std::string piece;
  std::istringstream stream(spec);
  while (std::getline(stream, piece, ',')) {
    bool ok = false;
    const double value = parse_double(piece, ok);
    if (!ok) {
      throw ValidationError("grid value '" + piece + "' is not a number");
    }
    grid.push_back(value);
  }
  if (grid.empty()) {
    throw ValidationError("grid '" + spec + "' contains no values");
  }
  return grid;
}

int cmd_fit(const FitOptions& options) {
  FitOptions resolved = options;
  const FocalSpec focal{focal_kind_from_string(resolved.focal)};
  const CovarianceKind kind = covariance_kind_from_string(resolved.covariance);
  const NuisanceSpec nuisance =
      parse_nuisance(resolved.nuisance, resolved.cross_fit, resolved.seed);
  const Dataset data = load_dataset(resolved.input, resolved.outcome, resolved.treatments,
                                    resolved.covariates, focal);
  const ResidualizedDesign design = residualize(data, focal, nuisance);

  std::optional<TuningResult> tuning;
  double lambda = 0.0;
  if (resolved.tune) {
    TuningConfig config;
    if (!resolved.grid_values.empty()) {
      config.grid = resolved.grid_values;
    } else if (!resolved.grid_spec.empty()) {
      config.grid = parse_grid_spec(resolved.grid_spec);
    }
    config.holdout_fraction = resolved.holdout;
    config.seed = resolved.seed;
    tuning = tune_lambda(design, config);
    lambda = tuning->best_lambda;
    resolved.grid_values = tuning->grid;  // materialize the grid actually used
    resolved.grid_spec.clear();
  } else {
    lambda = resolved.lambda.value_or(0.0);
  }
  resolved.lambda = lambda;

  const RidgeFit fit = fit_ridge(design, lambda, kind);
  const ReconstructedEffects effects = reconstruct_effects(fit, design, data);

  json coefficients = json::array();
  auto push_coefficient = [&](const std::string& name, double value, Eigen::Index index) {
    json entry{{"name", name}, {"beta", value}};
    if (fit.covariance) {
      entry["se"] = std::sqrt((*fit.covariance)(index, index));
    } else {
      entry["se"] = nullptr;
    }
    coefficients.push_back(std::move(entry));
  };
  push_coefficient("focal", fit.beta0, 0);
  for (Eigen::Index j = 0; j < data.sub_treatment_count(); ++j) {
    push_coefficient(data.treatment_names[static_cast<std::size_t>(j)], fit.beta[j], j + 1);
  }

  json cond_probs = json::array();
  if (effects.cond_probs) {
    for (Eigen::Index j = 0; j < effects.cond_probs->rows(); ++j) {
      json row = json::array();
      for (Eigen::Index k = 0; k < effects.cond_probs->cols(); ++k) {
        row.push_back((*effects.cond_probs)(j, k));
      }
      cond_probs.push_back(std::move(row));
    }
  }

  const bool unconfounded =
      nuisance.learner == NuisanceLearner::MeanOnly || data.covariate_count() == 0;

  json report{
      {"lambda", lambda},
      {"tuned", resolved.tune},
      {"coefficients", std::move(coefficients)},
      {"sigma2_hat", optional_to_json(fit.sigma2_hat)},
      {"covariance_kind", to_string(fit.covariance_kind)},
      {"tau0_hat", effects.tau0},
      {"tau", std::vector<double>(effects.tau.begin(), effects.tau.end())},
      {"moment_ratios",
       std::vector<double>(effects.moment_ratios.begin(), effects.moment_ratios.end())},
      {"cond_probs", std::move(cond_probs)},
      {"n", data.unit_count()},
      {"K", data.sub_treatment_count()},
      {"d", data.covariate_count()},
      {"prevalence", std::vector<double>(data.prevalence.begin(), data.prevalence.end())},
      {"focal", to_string(focal.kind)},
      {"nuisance", resolved.nuisance},
      {"cross_fit", resolved.cross_fit},
      {"unconfounded_mode", unconfounded},
      {"provenance", design.provenance},
  };
  if (tuning) {
    report["tuning"] = json{{"best_lambda", tuning->best_lambda},
                            {"grid", tuning->grid},
                            {"scores", tuning->scores}};
  } else {
    report["tuning"] = nullptr;
  }

  const std::filesystem::path dir = prepare_out_dir(resolved.out);
  write_text_file(dir / "fit.json", report.dump(2) + "\n");
  write_manifest(dir, "fit", resolved.to_json(),
                 {{resolved.input, sha256_file_hex(resolved.input)}}, resolved.seed);
  return 0;
}

int cmd_sweep(const SweepOptions& options) {
  SweepOptions resolved = options;
  const FocalSpec focal{focal_kind_from_string(resolved.focal)};
  const CovarianceKind kind = covariance_kind_from_string(resolved.covariance);
  const NuisanceSpec nuisance =
      parse_nuisance(resolved.nuisance, resolved.cross_fit, resolved.seed);
  const Dataset data = load_dataset(resolved.input, resolved.outcome, resolved.treatments,
                                    resolved.covariates, focal);
  const ResidualizedDesign design = residualize(data, focal, nuisance);

  std::vector<double> grid;
  if (!resolved.grid_values.empty()) {
    grid = resolved.grid_values;
  } else if (!resolved.grid_spec.empty()) {
    grid = parse_grid_spec(resolved.grid_spec);
  } else {
    grid = default_lambda_grid(design);
  }
  resolved.grid_values = grid;
  resolved.grid_spec.clear();

  const std::vector<ShrinkagePathRow> rows = shrinkage_path(design, data, grid, kind);

  const std::filesystem::path dir = prepare_out_dir(resolved.out);
  write_text_file(dir / "sweep.csv", render_path_rows(rows));
  write_manifest(dir, "sweep", resolved.to_json(),
                 {{resolved.input, sha256_file_hex(resolved.input)}}, resolved.seed);
  return 0;
}

int cmd_simulate(const SimulateOptions& options) {
  SimulateOptions resolved = options;
  if (resolved.prevalences.empty() || resolved.beta.empty()) {
    throw ValidationError(
        "simulate needs --prevalences and --beta (or --paper-defaults to preload them)");
  }
  SimulationConfig config;
  config.prevalences = to_vector(resolved.prevalences);
  config.beta0 = resolved.beta0;
  config.beta = to_vector(resolved.beta);
  config.n = static_cast<Eigen::Index>(resolved.n);
  config.noise_sd = resolved.noise_sd;
  config.focal = FocalSpec{focal_kind_from_string(resolved.focal)};
  config.reps = resolved.reps;
  config.seed = resolved.seed;
  config.threads = resolved.threads;
  if (resolved.lambda) {
    config.lambda_grid = {*resolved.lambda};
  } else if (!resolved.grid_values.empty()) {
    config.lambda_grid = resolved.grid_values;
  } else if (!resolved.grid_spec.empty()) {
    config.lambda_grid = parse_grid_spec(resolved.grid_spec);
  } else {
    config.lambda_grid = default_simulation_grid(config);
  }
  resolved.grid_values = config.lambda_grid;
  resolved.grid_spec.clear();

  const MseDecomposition decomposition = run_mse_decomposition(config);
  const std::vector<ShrinkagePathRow> rows = shrinkage_path(config);

  std::ostringstream mse;
  write_row(mse, {"treatment", "lambda", "tau_target", "bias_sq", "variance", "mse"});
  const Eigen::Index K = config.prevalences.size();
  for (Eigen::Index j = 0; j < K; ++j) {
    const std::string name = "D" + std::to_string(j + 1);
    for (std::size_t l = 0; l < decomposition.lambdas.size(); ++l) {
      const auto col = static_cast<Eigen::Index>(l);
      write_row(mse, {name, format_double(decomposition.lambdas[l]),
                      format_double(decomposition.targets.tau[j]),
                      format_double(decomposition.bias_sq(j, col)),
                      format_double(decomposition.variance(j, col)),
                      format_double(decomposition.mse(j, col))});
    }
  }

  const std::filesystem::path dir = prepare_out_dir(resolved.out);
  write_text_file(dir / "mse.csv", mse.str());
  write_text_file(dir / "paths.csv", render_path_rows(rows));
  write_manifest(dir, "simulate", resolved.to_json(), {}, resolved.seed);
  return 0;
}

int cmd_replay(const ReplayOptions& options) {
  const RunManifest manifest = RunManifest::read_file(options.manifest);
  for (const auto& [path, digest] : manifest.input_digests) {
    const std::string current = sha256_file_hex(path);
    if (current != digest) {
      throw IngestionError("input '" + path +
                           "' has changed since the manifest was written (digest mismatch)");
    }
  }
  json config = manifest.config;
  if (!options.out.empty()) {
    config["out"] = options.out;
  }
  if (manifest.command == "fit") {
    return cmd_fit(FitOptions::from_json(config));
  }
  if (manifest.command == "sweep") {
    return cmd_sweep(SweepOptions::from_json(config));
  }
  if (manifest.command == "simulate") {
    return cmd_simulate(SimulateOptions::from_json(config));
  }
  throw ValidationError("manifest names unknown command '" + manifest.command + "'");
}

}  // namespace focalridge::cli
