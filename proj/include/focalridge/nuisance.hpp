#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>

namespace focalridge {

enum class NuisanceLearner { MeanOnly, LinearLeastSquares, KNearestNeighbors };

// Which conditional-expectation model removes the covariate signal, and how
// its predictions are cross-fitted.
struct NuisanceSpec {
  NuisanceLearner learner = NuisanceLearner::MeanOnly;
  int knn_k = 5;             // neighbor count; used only by KNearestNeighbors
  int cross_fit_folds = 1;   // 1 = fit and predict on the same rows
  std::uint64_t seed = 0;    // drives fold assignment only
};

std::string learner_name(NuisanceLearner learner);

// A fitted conditional-expectation model. Every built-in carries an
// intercept: an additive constant chosen so that training residuals average
// to zero (exact for the mean and linear learners by construction; enforced
// for KNN through a fitted offset).
class FittedNuisance {
 public:
  virtual ~FittedNuisance() = default;

  // Predictions for each covariate row; throws ValidationError on a
  // dimension mismatch with the training covariates.
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const = 0;
};

// Fits spec.learner to (covariates, target). target_name labels error
// messages so a failed fit reports which regression broke.
std::unique_ptr<FittedNuisance> fit_nuisance(const NuisanceSpec& spec,
                                             const Eigen::MatrixXd& covariates,
                                             const Eigen::VectorXd& target,
                                             const std::string& target_name);

Eigen::VectorXd predict_nuisance(const FittedNuisance& model,
                                 const Eigen::MatrixXd& covariate_rows);

}  // namespace focalridge
