#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace focalridge::cli {

// Options structs mirror the command-line flags one-to-one; their JSON form
// is what goes into the run manifest's config block, so a manifest can be
// replayed by deserializing straight back into the struct.

struct FitOptions {
  std::string input;
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;
  std::string focal = "max";
  std::string nuisance = "mean";
  int cross_fit = 1;
  std::optional<double> lambda;     // fixed penalty; defaults to 0 when not tuning
  bool tune = false;
  std::string grid_spec;            // tuning grid ("a,b,c" | "log:LO:HI:N" | "0+log:LO:HI:N")
  std::vector<double> grid_values;  // resolved numeric grid; wins over grid_spec
  double holdout = 0.25;
  std::string covariance = "homoscedastic";
  std::uint64_t seed = 0;
  std::string out;

  nlohmann::json to_json() const;
  static FitOptions from_json(const nlohmann::json& j);
};

struct SweepOptions {
  std::string input;
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;
  std::string focal = "max";
  std::string nuisance = "mean";
  int cross_fit = 1;
  std::string grid_spec;            // empty means the design-scaled default grid
  std::vector<double> grid_values;
  std::string covariance = "homoscedastic";
  std::uint64_t seed = 0;
  std::string out;

  nlohmann::json to_json() const;
  static SweepOptions from_json(const nlohmann::json& j);
};

struct SimulateOptions {
  bool paper_defaults = false;
  std::vector<double> prevalences;
  double beta0 = 5.0;
  std::vector<double> beta;
  long long n = 2000;
  double noise_sd = 0.0;
  std::string focal = "max";
  int reps = 500;
  std::uint64_t seed = 0;
  std::optional<double> lambda;     // single-point grid shortcut
  std::string grid_spec;            // empty means the prevalence-scaled default grid
  std::vector<double> grid_values;
  int threads = 0;                  // 0 = hardware concurrency, 1 = serial
  std::string out;

  nlohmann::json to_json() const;
  static SimulateOptions from_json(const nlohmann::json& j);
};

struct ReplayOptions {
  std::string manifest;
  std::string out;  // empty keeps the manifest's output directory
};

// Parse "a,b,c" (explicit values), "log:LO:HI:N" (N log-spaced points), or
// "0+log:LO:HI:N" (the same with 0 prepended) into a numeric grid.
std::vector<double> parse_grid_spec(const std::string& spec);

// Each returns a process exit code (0 on success) and writes its outputs
// plus a manifest.json into the options' output directory. Errors are
// reported on stderr and never written into output files.
int cmd_fit(const FitOptions& options);
int cmd_sweep(const SweepOptions& options);
int cmd_simulate(const SimulateOptions& options);
int cmd_replay(const ReplayOptions& options);

}  // namespace focalridge::cli
