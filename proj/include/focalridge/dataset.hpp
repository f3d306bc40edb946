#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "focalridge/focal.hpp"

namespace focalridge {

// A parsed external table: header plus string cells, row-major. An empty
// cell marks a missing value; interpretation happens in validate_dataset.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Which table columns play which role in the model. Treatment order is
// preserved: it fixes the coefficient order everywhere downstream.
struct ColumnRoles {
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;
  FocalSpec focal;
};

// Validated observations. Immutable after construction; safe to share
// across threads without synchronization.
struct Dataset {
  Eigen::VectorXd outcome;      // n
  Eigen::MatrixXd covariates;   // n x d, d >= 0
  Eigen::MatrixXd treatments;   // n x K, entries exactly 0.0 or 1.0
  std::vector<std::string> treatment_names;  // K labels
  Eigen::VectorXd prevalence;   // per-treatment sample mean, fixed at ingestion

  Eigen::Index unit_count() const { return outcome.size(); }
  Eigen::Index sub_treatment_count() const { return treatments.cols(); }
  Eigen::Index covariate_count() const { return covariates.cols(); }
};

// In-memory construction path; enforces every Dataset invariant. The focal
// spec is needed to reject designs whose aggregate treatment column is
// constant (a zero-variance regressor).
Dataset make_dataset(Eigen::VectorXd outcome, Eigen::MatrixXd covariates,
                     Eigen::MatrixXd treatments,
                     std::vector<std::string> treatment_names, const FocalSpec& focal);

// Table ingestion path: binds columns by role, converts cells, validates.
Dataset validate_dataset(const RawTable& table, const ColumnRoles& roles);

}  // namespace focalridge
