#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "focalridge/errors.hpp"
#include "focalridge/version.hpp"

namespace {

using focalridge::cli::FitOptions;
using focalridge::cli::ReplayOptions;
using focalridge::cli::SimulateOptions;
using focalridge::cli::SweepOptions;
using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw focalridge::IngestionError("cannot open config '" + path + "'");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw focalridge::IngestionError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

// Start from the config file's values, then let explicitly-passed flags win.
json merge_config(const json& base, const json& flags, const CLI::App& command,
                  const std::vector<std::pair<const char*, const char*>>& flag_keys) {
  json merged = base;
  for (const auto& [flag, key] : flag_keys) {
    if (command.count(flag) > 0) {
      merged[key] = flags.at(key);
    }
  }
  return merged;
}

constexpr const char* kGridHelp =
    "penalty grid: 'a,b,c' explicit values, 'log:LO:HI:N' N log-spaced points, "
    "'0+log:LO:HI:N' the same with 0 prepended";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "focalridge: selective-shrinkage estimation of overlapping sub-treatment effects"};
  app.set_version_flag("--version", focalridge::kVersion);
  app.require_subcommand(1);

  // ---- fit ------------------------------------------------------------
  FitOptions fit_options;
  std::string fit_config_path;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit one penalized model and write fit.json plus manifest.json");
  fit->add_option("--input", fit_options.input, "input CSV (header row, RFC-4180)");
  fit->add_option("--outcome", fit_options.outcome, "outcome column name");
  fit->add_option("--treatments", fit_options.treatments,
                  "treatment column names, comma separated, in coefficient order")
      ->delimiter(',');
  fit->add_option("--covariates", fit_options.covariates,
                  "covariate column names, comma separated")
      ->delimiter(',');
  fit->add_option("--focal", fit_options.focal, "focal function: max or sum")
      ->check(CLI::IsMember({"max", "sum"}));
  fit->add_option("--nuisance", fit_options.nuisance,
                  "nuisance learner: mean, linear, or knn:K");
  fit->add_option("--cross-fit", fit_options.cross_fit,
                  "nuisance cross-fitting folds (1 = none)");
  CLI::Option* fit_lambda = fit->add_option("--lambda", fit_options.lambda,
                                            "fixed penalty (default 0 when not tuning)");
  CLI::Option* fit_tune =
      fit->add_flag("--tune", fit_options.tune, "select the penalty by hold-out error");
  fit_lambda->excludes(fit_tune);
  fit_tune->excludes(fit_lambda);
  fit->add_option("--grid", fit_options.grid_spec, kGridHelp)->needs(fit_tune);
  fit->add_option("--holdout", fit_options.holdout,
                  "hold-out fraction for tuning (default 0.25)")
      ->needs(fit_tune);
  fit->add_option("--covariance", fit_options.covariance,
                  "standard-error flavor: homoscedastic or robust")
      ->check(CLI::IsMember({"homoscedastic", "robust"}));
  fit->add_option("--seed", fit_options.seed, "seed for cross-fitting and tuning splits");
  fit->add_option("--out", fit_options.out, "output directory");
  fit->add_option("--config", fit_config_path,
                  "JSON config supplying any of the above; explicit flags override");

  // ---- sweep ----------------------------------------------------------
  SweepOptions sweep_options;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Fit along a penalty grid and write sweep.csv plus manifest.json");
  sweep->add_option("--input", sweep_options.input, "input CSV (header row, RFC-4180)");
  sweep->add_option("--outcome", sweep_options.outcome, "outcome column name");
  sweep->add_option("--treatments", sweep_options.treatments,
                    "treatment column names, comma separated, in coefficient order")
      ->delimiter(',');
  sweep->add_option("--covariates", sweep_options.covariates,
                    "covariate column names, comma separated")
      ->delimiter(',');
  sweep->add_option("--focal", sweep_options.focal, "focal function: max or sum")
      ->check(CLI::IsMember({"max", "sum"}));
  sweep->add_option("--nuisance", sweep_options.nuisance,
                    "nuisance learner: mean, linear, or knn:K");
  sweep->add_option("--cross-fit", sweep_options.cross_fit,
                    "nuisance cross-fitting folds (1 = none)");
  sweep->add_option("--grid", sweep_options.grid_spec, kGridHelp);
  sweep->add_option("--covariance", sweep_options.covariance,
                    "standard-error flavor: homoscedastic or robust")
      ->check(CLI::IsMember({"homoscedastic", "robust"}));
  sweep->add_option("--seed", sweep_options.seed, "seed for cross-fitting splits");
  sweep->add_option("--out", sweep_options.out, "output directory");

  // ---- simulate -------------------------------------------------------
  SimulateOptions simulate_options;
  CLI::App* simulate = app.add_subcommand(
      "simulate",
      "Run the Monte Carlo harness; writes paths.csv, mse.csv, and manifest.json");
  CLI::Option* sim_paper = simulate->add_flag(
      "--paper-defaults", simulate_options.paper_defaults,
      "preload the reference scenario: prevalences 0.2,0.05,0.2,0.05,0.2,0.05, "
      "beta0 5, beta 2,2,1,1,-1,-1, n 2000, reps 500, max focal, noiseless");
  CLI::Option* sim_prev =
      simulate
          ->add_option("--prevalences", simulate_options.prevalences,
                       "sub-treatment prevalences in (0,1), comma separated")
          ->delimiter(',');
  simulate->add_option("--beta0", simulate_options.beta0, "focal-function coefficient");
  CLI::Option* sim_beta =
      simulate
          ->add_option("--beta", simulate_options.beta,
                       "sub-treatment coefficients, comma separated")
          ->delimiter(',');
  simulate->add_option("--n", simulate_options.n, "observations per replication");
  simulate->add_option("--noise-sd", simulate_options.noise_sd,
                       "standard deviation of additive outcome noise");
  simulate->add_option("--focal", simulate_options.focal, "focal function: max or sum")
      ->check(CLI::IsMember({"max", "sum"}));
  simulate->add_option("--reps", simulate_options.reps, "Monte Carlo replications (>= 2)");
  simulate->add_option("--seed", simulate_options.seed, "master seed");
  CLI::Option* sim_lambda = simulate->add_option(
      "--lambda", simulate_options.lambda, "evaluate a single penalty instead of a grid");
  CLI::Option* sim_grid = simulate->add_option("--grid", simulate_options.grid_spec, kGridHelp);
  sim_lambda->excludes(sim_grid);
  sim_grid->excludes(sim_lambda);
  simulate->add_option("--threads", simulate_options.threads,
                       "worker threads (0 = all hardware threads, 1 = serial)");
  simulate->add_option("--out", simulate_options.out, "output directory");

  // ---- replay ---------------------------------------------------------
  ReplayOptions replay_options;
  CLI::App* replay = app.add_subcommand(
      "replay", "Re-run a recorded manifest after verifying its input digests");
  replay->add_option("manifest", replay_options.manifest, "path to a manifest.json")
      ->required();
  replay->add_option("--out", replay_options.out,
                     "redirect outputs (default: the manifest's output directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      FitOptions options = fit_options;
      if (!fit_config_path.empty()) {
        static const std::vector<std::pair<const char*, const char*>> kFlagKeys = {
            {"--input", "input"},         {"--outcome", "outcome"},
            {"--treatments", "treatments"}, {"--covariates", "covariates"},
            {"--focal", "focal"},         {"--nuisance", "nuisance"},
            {"--cross-fit", "cross_fit"}, {"--lambda", "lambda"},
            {"--tune", "tune"},           {"--grid", "grid"},
            {"--holdout", "holdout"},     {"--covariance", "covariance"},
            {"--seed", "seed"},           {"--out", "out"}};
        json merged =
            merge_config(load_json_file(fit_config_path), fit_options.to_json(), *fit,
                         kFlagKeys);
        // An explicit fixed penalty silences a tuning request from the file,
        // and vice versa.
        if (fit->count("--lambda") > 0 && fit->count("--tune") == 0) {
          merged["tune"] = false;
        }
        if (fit->count("--tune") > 0) {
          merged["lambda"] = nullptr;
        }
        options = FitOptions::from_json(merged);
      }
      return focalridge::cli::cmd_fit(options);
    }
    if (sweep->parsed()) {
      return focalridge::cli::cmd_sweep(sweep_options);
    }
    if (simulate->parsed()) {
      SimulateOptions options = simulate_options;
      if (options.paper_defaults) {
        if (sim_prev->count() == 0) {
          options.prevalences = {0.2, 0.05, 0.2, 0.05, 0.2, 0.05};
        }
        if (sim_beta->count() == 0) {
          options.beta = {2.0, 2.0, 1.0, 1.0, -1.0, -1.0};
        }
      }
      (void)sim_paper;
      return focalridge::cli::cmd_simulate(options);
    }
    if (replay->parsed()) {
      return focalridge::cli::cmd_replay(replay_options);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << "error: no command given\n";
  return 1;
}
