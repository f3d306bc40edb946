#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "focalridge/dataset.hpp"
#include "focalridge/nuisance.hpp"

namespace focalridge {

// Tilde quantities: outcome, focal column and each sub-treatment, minus
// their estimated conditional expectations given covariates. Immutable once
// built; safe to share across threads.
struct ResidualizedDesign {
  Eigen::VectorXd y_tilde;
  Eigen::VectorXd focal_tilde;
  Eigen::MatrixXd treat_tilde;               // n x K
  std::vector<std::string> treatment_names;  // labels for treat_tilde columns
  std::string provenance;                    // learner + cross-fitting description

  Eigen::Index unit_count() const { return y_tilde.size(); }
  Eigen::Index sub_treatment_count() const { return treat_tilde.cols(); }
};

// Residualizes outcome, focal column and every sub-treatment against the
// covariates. Each column is its own regression target (the focal column is
// never derived from residualized sub-treatments, because the conditional
// expectation of an aggregate is not the aggregate of conditional
// expectations). With cross_fit_folds = m > 1, predictions for a fold come
// from a model fitted on the other m-1 folds; fold assignment is a seeded
// shuffle dealt round-robin, so results are deterministic given the seed.
// With no covariates the learner is forced to MeanOnly.
ResidualizedDesign residualize(const Dataset& data, const FocalSpec& focal,
                               const NuisanceSpec& nuisance);

}  // namespace focalridge
