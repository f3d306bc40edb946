#include "focalridge/residualize.hpp"

#include <numeric>
#include <string>
#include <vector>

#include "focalridge/errors.hpp"
#include "focalridge/rng.hpp"

namespace focalridge {

namespace {

// Residuals for one target: fit on all rows and predict in place, or fit per
// fold on the complement and predict the held-out fold.
Eigen::VectorXd residualize_target(const Eigen::VectorXd& target,
                                   const Eigen::MatrixXd& covariates,
                                   const NuisanceSpec& spec,
                                   const std::vector<std::vector<Eigen::Index>>& folds,
                                   const std::string& target_name) {
  const Eigen::Index n = target.size();
  if (folds.empty()) {
    const auto model = fit_nuisance(spec, covariates, target, target_name);
    return target - model->predict(covariates);
  }
  Eigen::VectorXd residuals(n);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const Eigen::Index train_size = n - static_cast<Eigen::Index>(fold.size());
    Eigen::VectorXd train_target(train_size);
    Eigen::MatrixXd train_covariates(train_size, covariates.cols());
    std::vector<bool> held(static_cast<std::size_t>(n), false);
    for (const Eigen::Index row : fold) {
      held[static_cast<std::size_t>(row)] = true;
    }
    Eigen::Index t = 0;
    for (Eigen::Index row = 0; row < n; ++row) {
      if (!held[static_cast<std::size_t>(row)]) {
        train_target[t] = target[row];
        train_covariates.row(t) = covariates.row(row);
        ++t;
      }
    }
    const auto model = fit_nuisance(spec, train_covariates, train_target,
                                    target_name + " (fold " + std::to_string(f + 1) + ")");
    Eigen::MatrixXd fold_covariates(static_cast<Eigen::Index>(fold.size()),
                                    covariates.cols());
    for (std::size_t i = 0; i < fold.size(); ++i) {
      fold_covariates.row(static_cast<Eigen::Index>(i)) = covariates.row(fold[i]);
    }
    const Eigen::VectorXd predictions = model->predict(fold_covariates);
    for (std::size_t i = 0; i < fold.size(); ++i) {
      residuals[fold[i]] = target[fold[i]] - predictions[static_cast<Eigen::Index>(i)];
    }
  }
  return residuals;
}

}  // namespace

ResidualizedDesign residualize(const Dataset& data, const FocalSpec& focal,
                               const NuisanceSpec& nuisance) {
  const Eigen::Index n = data.unit_count();
  const Eigen::Index K = data.sub_treatment_count();

  NuisanceSpec effective = nuisance;
  const bool forced_mean = data.covariate_count() == 0 &&
                           nuisance.learner != NuisanceLearner::MeanOnly;
  if (data.covariate_count() == 0) {
    effective.learner = NuisanceLearner::MeanOnly;
  }
  if (effective.cross_fit_folds < 1) {
    throw ValidationError("cross_fit_folds must be >= 1, got " +
                          std::to_string(effective.cross_fit_folds));
  }
  if (effective.cross_fit_folds > n) {
    throw ValidationError("cross_fit_folds = " + std::to_string(effective.cross_fit_folds) +
                          " exceeds the number of observations (" + std::to_string(n) + ")");
  }

  // Seeded shuffle dealt round-robin: fold sizes differ by at most one.
  std::vector<std::vector<Eigen::Index>> folds;
  if (effective.cross_fit_folds > 1) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(effective.seed, 0);
    shuffle(order, rng);
    folds.resize(static_cast<std::size_t>(effective.cross_fit_folds));
    for (std::size_t i = 0; i < order.size(); ++i) {
      folds[i % folds.size()].push_back(order[i]);
    }
    for (std::size_t f = 0; f < folds.size(); ++f) {
      if (folds[f].size() < 2) {
        throw InsufficientDataError("cross-fitting fold " + std::to_string(f + 1) +
                                    " has " + std::to_string(folds[f].size()) +
                                    " observation(s); each fold needs at least 2");
      }
    }
  }

  ResidualizedDesign design;
  design.y_tilde =
      residualize_target(data.outcome, data.covariates, effective, folds, "outcome");
  const Eigen::VectorXd focal_column = apply_focal(data.treatments, focal);
  design.focal_tilde =
      residualize_target(focal_column, data.covariates, effective, folds, "focal column");
  design.treat_tilde.resize(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    design.treat_tilde.col(k) = residualize_target(
        data.treatments.col(k), data.covariates, effective, folds,
        "treatment '" + data.treatment_names[static_cast<std::size_t>(k)] + "'");
  }
  design.treatment_names = data.treatment_names;

  // Backstop against covariates that explain the focal column perfectly:
  // downstream ratios divide by this second moment.
  if (design.focal_tilde.squaredNorm() / static_cast<double>(n) < 1e-18) {
    throw ConstantFocalError(
        "the focal column has (numerically) zero residual variation after "
        "removing covariates; no identifying variation remains");
  }

  std::string description = learner_name(effective.learner);
  if (effective.learner == NuisanceLearner::KNearestNeighbors) {
    description += " (k=" + std::to_string(effective.knn_k) + ")";
  }
  if (forced_mean) {
    description += " [forced: no covariates]";
  }
  if (effective.cross_fit_folds > 1) {
    description += ", " + std::to_string(effective.cross_fit_folds) +
                   "-fold cross-fitting (seed " + std::to_string(effective.seed) + ")";
  } else {
    description += ", no cross-fitting";
  }
  design.provenance = description + " nuisance";
  return design;
}

}  // namespace focalridge
