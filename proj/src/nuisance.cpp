#include "focalridge/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "focalridge/errors.hpp"

namespace focalridge {

namespace {

void check_dimensions(Eigen::Index expected, const Eigen::MatrixXd& rows) {
  if (rows.cols() != expected) {
    throw ValidationError("covariate dimension mismatch: model was fitted on " +
                          std::to_string(expected) + " column(s), prediction rows have " +
                          std::to_string(rows.cols()));
  }
}

class MeanOnlyModel final : public FittedNuisance {
 public:
  MeanOnlyModel(double mean, Eigen::Index dimension) : mean_(mean), dimension_(dimension) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const override {
    check_dimensions(dimension_, covariates);
    return Eigen::VectorXd::Constant(covariates.rows(), mean_);
  }

 private:
  double mean_;
  Eigen::Index dimension_;
};

class LinearModel final : public FittedNuisance {
 public:
  LinearModel(double intercept, Eigen::VectorXd slopes)
      : intercept_(intercept), slopes_(std::move(slopes)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const override {
    check_dimensions(slopes_.size(), covariates);
    return (covariates * slopes_).array() + intercept_;
  }

 private:
  double intercept_;
  Eigen::VectorXd slopes_;
};

class KnnModel final : public FittedNuisance {
 public:
  KnnModel(Eigen::MatrixXd standardized_train, Eigen::VectorXd scales,
           Eigen::VectorXd targets, int k, double offset)
      : train_(std::move(standardized_train)),
        scales_(std::move(scales)),
        targets_(std::move(targets)),
        k_(k),
        offset_(offset) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const override {
    check_dimensions(train_.cols(), covariates);
    Eigen::VectorXd predictions(covariates.rows());
    std::vector<std::pair<double, Eigen::Index>> distances(
        static_cast<std::size_t>(train_.rows()));
    for (Eigen::Index r = 0; r < covariates.rows(); ++r) {
      Eigen::RowVectorXd query = covariates.row(r).array() / scales_.transpose().array();
      for (Eigen::Index t = 0; t < train_.rows(); ++t) {
        distances[static_cast<std::size_t>(t)] = {(train_.row(t) - query).squaredNorm(), t};
      }
      // Ties in distance break by training-row index, so neighbor sets are
      // deterministic even with duplicated covariate rows.
      std::nth_element(distances.begin(), distances.begin() + (k_ - 1), distances.end());
      double sum = 0.0;
      for (int i = 0; i < k_; ++i) {
        sum += targets_[distances[static_cast<std::size_t>(i)].second];
      }
      predictions[r] = sum / k_ + offset_;
    }
    return predictions;
  }

  // Raw neighborhood means before the intercept offset; used at fit time.
  Eigen::VectorXd raw_train_predictions() const {
    KnnModel raw(train_, Eigen::VectorXd::Ones(train_.cols()), targets_, k_, 0.0);
    return raw.predict(train_);
  }

 private:
  Eigen::MatrixXd train_;   // rows already divided by scales_
  Eigen::VectorXd scales_;  // per-column standard deviation (1 where degenerate)
  Eigen::VectorXd targets_;
  int k_;
  double offset_;
};

std::unique_ptr<FittedNuisance> fit_linear(const Eigen::MatrixXd& covariates,
                                           const Eigen::VectorXd& target,
                                           const std::string& target_name) {
  const Eigen::Index n = covariates.rows();
  const Eigen::Index p = covariates.cols() + 1;
  Eigen::MatrixXd design(n, p);
  design.col(0) = Eigen::VectorXd::Ones(n);
  design.rightCols(covariates.cols()) = covariates;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) {
    const Eigen::Index dependent =
        qr.colsPermutation().indices()(qr.rank());
    const std::string which =
        dependent == 0 ? "the intercept"
                       : "covariate column " + std::to_string(dependent);
    throw SingularDesignError("linear nuisance regression for '" + target_name +
                              "' is rank-deficient (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(p) + "): " + which +
                              " is collinear with the others");
  }
  Eigen::VectorXd coefficients = qr.solve(target);
  return std::make_unique<LinearModel>(coefficients[0], coefficients.tail(p - 1));
}

std::unique_ptr<FittedNuisance> fit_knn(const NuisanceSpec& spec,
                                        const Eigen::MatrixXd& covariates,
                                        const Eigen::VectorXd& target) {
  const Eigen::Index n = covariates.rows();
  if (spec.knn_k < 1 || spec.knn_k > n) {
    throw ValidationError("knn neighbor count k=" + std::to_string(spec.knn_k) +
                          " must satisfy 1 <= k <= " + std::to_string(n) +
                          " (the fitted sample size)");
  }
  // Standardize columns to unit variance so the Euclidean metric does not
  // privilege large-scale covariates; constant columns keep scale 1.
  Eigen::VectorXd scales(covariates.cols());
  for (Eigen::Index c = 0; c < covariates.cols(); ++c) {
    const double mean = covariates.col(c).mean();
    const double var = (covariates.col(c).array() - mean).square().mean();
    scales[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Eigen::MatrixXd standardized = covariates.array().rowwise() / scales.transpose().array();
  KnnModel unadjusted(standardized, scales, target, spec.knn_k, 0.0);
  // Intercept offset: make training residuals average exactly to zero.
  const double offset = (target - unadjusted.raw_train_predictions()).mean();
  return std::make_unique<KnnModel>(std::move(standardized), std::move(scales), target,
                                    spec.knn_k, offset);
}

}  // namespace

std::string learner_name(NuisanceLearner learner) {
  switch (learner) {
    case NuisanceLearner::MeanOnly:
      return "mean-only";
    case NuisanceLearner::LinearLeastSquares:
      return "linear-least-squares";
    case NuisanceLearner::KNearestNeighbors:
      return "k-nearest-neighbors";
  }
  return "unknown";
}

std::unique_ptr<FittedNuisance> fit_nuisance(const NuisanceSpec& spec,
                                             const Eigen::MatrixXd& covariates,
                                             const Eigen::VectorXd& target,
                                             const std::string& target_name) {
  if (covariates.rows() != target.size()) {
    throw RowCountMismatchError("nuisance fit for '" + target_name + "': " +
                                std::to_string(covariates.rows()) +
                                " covariate rows vs " + std::to_string(target.size()) +
                                " target values");
  }
  switch (spec.learner) {
    case NuisanceLearner::MeanOnly:
      return std::make_unique<MeanOnlyModel>(target.mean(), covariates.cols());
    case NuisanceLearner::LinearLeastSquares:
      return fit_linear(covariates, target, target_name);
    case NuisanceLearner::KNearestNeighbors:
      return fit_knn(spec, covariates, target);
  }
  throw ValidationError("unknown nuisance learner");
}

Eigen::VectorXd predict_nuisance(const FittedNuisance& model,
                                 const Eigen::MatrixXd& covariate_rows) {
  return model.predict(covariate_rows);
}

}  // namespace focalridge
