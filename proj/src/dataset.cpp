#include "focalridge/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "focalridge/errors.hpp"

namespace focalridge {

namespace {

bool parse_cell(const std::string& text, double& value) {
  const char* first = text.data();
  const char* last = first + text.size();
  const auto result = std::from_chars(first, last, value);
  return result.ec == std::errc{} && result.ptr == last;
}

std::size_t find_column(const RawTable& table, const std::string& name,
                        const std::string& role) {
  std::size_t found = table.columns.size();
  std::size_t hits = 0;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == name) {
      found = c;
      ++hits;
    }
  }
  if (hits == 0) {
    throw IngestionError("missing " + role + " column '" + name + "' in input table");
  }
  if (hits > 1) {
    throw IngestionError("column '" + name + "' appears " + std::to_string(hits) +
                         " times in the header; column names bound to roles must be unique");
  }
  return found;
}

double numeric_cell(const RawTable& table, std::size_t row, std::size_t col) {
  const std::string& text = table.rows[row][col];
  if (text.empty()) {
    throw MissingValueError("data row " + std::to_string(row + 1) + ", column '" +
                            table.columns[col] + "': missing value");
  }
  double value = 0.0;
  if (!parse_cell(text, value)) {
    throw IngestionError("data row " + std::to_string(row + 1) + ", column '" +
                         table.columns[col] + "': cannot parse '" + text +
                         "' as a number");
  }
  return value;
}

}  // namespace

Dataset make_dataset(Eigen::VectorXd outcome, Eigen::MatrixXd covariates,
                     Eigen::MatrixXd treatments,
                     std::vector<std::string> treatment_names, const FocalSpec& focal) {
  const Eigen::Index n = outcome.size();
  if (covariates.size() == 0 && covariates.rows() != n) {
    // Normalize "no covariates" to an n x 0 block so row counts agree.
    covariates.resize(n, 0);
  }
  if (treatments.cols() < 1) {
    throw NoTreatmentsError("at least one treatment column is required (K >= 1)");
  }
  if (treatments.rows() != n || covariates.rows() != n) {
    throw RowCountMismatchError(
        "row counts disagree: outcome has " + std::to_string(n) + ", treatments have " +
        std::to_string(treatments.rows()) + ", covariates have " +
        std::to_string(covariates.rows()));
  }
  if (n < 2) {
    throw ValidationError("at least 2 observations are required, got " +
                          std::to_string(n));
  }
  if (static_cast<Eigen::Index>(treatment_names.size()) != treatments.cols()) {
    throw ValidationError("expected " + std::to_string(treatments.cols()) +
                          " treatment names, got " + std::to_string(treatment_names.size()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(outcome[i])) {
      throw MissingValueError("outcome row " + std::to_string(i + 1) + " is NaN");
    }
    if (!std::isfinite(outcome[i])) {
      throw ValidationError("outcome row " + std::to_string(i + 1) + " is not finite");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < covariates.cols(); ++c) {
      if (std::isnan(covariates(i, c))) {
        throw MissingValueError("covariate column " + std::to_string(c + 1) + ", row " +
                                std::to_string(i + 1) + " is NaN");
      }
      if (!std::isfinite(covariates(i, c))) {
        throw ValidationError("covariate column " + std::to_string(c + 1) + ", row " +
                              std::to_string(i + 1) + " is not finite");
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < treatments.cols(); ++k) {
      const double v = treatments(i, k);
      if (v != 0.0 && v != 1.0) {
        throw NonBinaryTreatmentError("non-binary treatment: column '" +
                                      treatment_names[static_cast<std::size_t>(k)] +
                                      "', row " + std::to_string(i + 1) + " has value " +
                                      std::to_string(v) + " (expected 0 or 1)");
      }
    }
  }
  const Eigen::VectorXd focal_column = apply_focal(treatments, focal);
  if (focal_column.minCoeff() == focal_column.maxCoeff()) {
    throw ConstantFocalError(
        "constant focal column: every row has D' = " +
        std::to_string(focal_column[0]) +
        ", so the aggregate treatment has no identifying variation");
  }

  Dataset data;
  data.outcome = std::move(outcome);
  data.covariates = std::move(covariates);
  data.treatments = std::move(treatments);
  data.treatment_names = std::move(treatment_names);
  data.prevalence = data.treatments.colwise().mean();
  return data;
}

Dataset validate_dataset(const RawTable& table, const ColumnRoles& roles) {
  if (roles.treatments.empty()) {
    throw NoTreatmentsError("at least one treatment column is required (K >= 1)");
  }
  const std::size_t n = table.rows.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (table.rows[r].size() != table.columns.size()) {
      throw RowCountMismatchError("data row " + std::to_string(r + 1) + " has " +
                                  std::to_string(table.rows[r].size()) +
                                  " fields; the header has " +
                                  std::to_string(table.columns.size()));
    }
  }

  const std::size_t outcome_col = find_column(table, roles.outcome, "outcome");
  std::vector<std::size_t> treatment_cols;
  for (const std::string& name : roles.treatments) {
    treatment_cols.push_back(find_column(table, name, "treatment"));
  }
  std::vector<std::size_t> covariate_cols;
  for (const std::string& name : roles.covariates) {
    covariate_cols.push_back(find_column(table, name, "covariate"));
  }

  Eigen::VectorXd outcome(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd covariates(static_cast<Eigen::Index>(n),
                             static_cast<Eigen::Index>(covariate_cols.size()));
  Eigen::MatrixXd treatments(static_cast<Eigen::Index>(n),
                             static_cast<Eigen::Index>(treatment_cols.size()));
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    outcome[row] = numeric_cell(table, r, outcome_col);
    for (std::size_t c = 0; c < covariate_cols.size(); ++c) {
      covariates(row, static_cast<Eigen::Index>(c)) = numeric_cell(table, r, covariate_cols[c]);
    }
    for (std::size_t k = 0; k < treatment_cols.size(); ++k) {
      const double v = numeric_cell(table, r, treatment_cols[k]);
      if (v != 0.0 && v != 1.0) {
        throw NonBinaryTreatmentError("non-binary treatment: data row " +
                                      std::to_string(r + 1) + ", column '" +
                                      roles.treatments[k] + "' has value '" +
                                      table.rows[r][treatment_cols[k]] +
                                      "' (expected 0 or 1)");
      }
      treatments(row, static_cast<Eigen::Index>(k)) = v;
    }
  }

  return make_dataset(std::move(outcome), std::move(covariates), std::move(treatments),
                      roles.treatments, roles.focal);
}

}  // namespace focalridge
