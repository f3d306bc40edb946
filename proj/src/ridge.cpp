#include "focalridge/ridge.hpp"

#include <cmath>
#include <string>

#include "focalridge/csv.hpp"
#include "focalridge/errors.hpp"

namespace focalridge {

namespace {

// Below this reciprocal condition estimate a double-precision factorization
// of the penalized normal equations is no longer trustworthy.
constexpr double kRcondThreshold = 1e-12;

void check_fit_matches_design(const RidgeFit& fit, const ResidualizedDesign& design) {
  if (fit.beta.size() != design.sub_treatment_count() ||
      fit.n != design.unit_count()) {
    throw ValidationError(
        "fit/design mismatch: fit has K=" + std::to_string(fit.beta.size()) + ", n=" +
        std::to_string(fit.n) + "; design has K=" +
        std::to_string(design.sub_treatment_count()) + ", n=" +
        std::to_string(design.unit_count()));
  }
}

Eigen::VectorXd stack_coefficients(const RidgeFit& fit) {
  Eigen::VectorXd coefficients(fit.p);
  coefficients[0] = fit.beta0;
  coefficients.tail(fit.beta.size()) = fit.beta;
  return coefficients;
}

Eigen::MatrixXd stacked_design(const ResidualizedDesign& design) {
  Eigen::MatrixXd x(design.unit_count(), design.sub_treatment_count() + 1);
  x.col(0) = design.focal_tilde;
  x.rightCols(design.sub_treatment_count()) = design.treat_tilde;
  return x;
}

// A^-1 M A^-1 for symmetric M via the Cholesky factor of A, symmetrized to
// remove the last bits of floating-point asymmetry.
Eigen::MatrixXd sandwich(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd half = llt.solve(m);
  Eigen::MatrixXd cov = llt.solve(half.transpose());
  return 0.5 * (cov + cov.transpose());
}

}  // namespace

std::string to_string(CovarianceKind kind) {
  return kind == CovarianceKind::Homoscedastic ? "homoscedastic" : "robust";
}

CovarianceKind covariance_kind_from_string(const std::string& text) {
  if (text == "homoscedastic") {
    return CovarianceKind::Homoscedastic;
  }
  if (text == "robust") {
    return CovarianceKind::Robust;
  }
  throw ValidationError("unknown covariance kind '" + text +
                        "' (expected 'homoscedastic' or 'robust')");
}

RidgeSolver::RidgeSolver(const ResidualizedDesign& design, bool standardize)
    : x_(stacked_design(design)),
      y_(design.y_tilde),
      scales_(Eigen::VectorXd::Ones(x_.cols())),
      standardized_(standardize) {
  if (standardize) {
    // Scale only the penalized columns; a constant column has no variance to
    // normalize and is left alone (it is degenerate at lambda = 0 anyway).
    const auto n = static_cast<double>(x_.rows());
    for (Eigen::Index k = 1; k < x_.cols(); ++k) {
      const double mean = x_.col(k).mean();
      const double variance = (x_.col(k).array() - mean).square().sum() / n;
      if (variance > 0.0) {
        scales_[k] = std::sqrt(variance);
        x_.col(k) /= scales_[k];
      }
    }
  }
  gram_ = x_.transpose() * x_;
  xty_ = x_.transpose() * y_;
  column_names_.reserve(static_cast<std::size_t>(x_.cols()));
  column_names_.push_back("focal");
  for (const std::string& name : design.treatment_names) {
    column_names_.push_back(name);
  }
  // Guaranteed upstream; repeated here because every fit divides by it.
  if (design.focal_tilde.squaredNorm() <= 0.0) {
    throw ConstantFocalError("focal column has zero second moment");
  }
}

RidgeFit RidgeSolver::fit(double lambda, CovarianceKind kind, bool with_inference) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be a finite nonnegative real, got " +
                          csv::format_double(lambda));
  }
  const Eigen::Index p = x_.cols();
  const Eigen::Index n = x_.rows();
  const Eigen::Index K = p - 1;

  // Penalized normal equations: the focal diagonal entry stays unpenalized.
  Eigen::MatrixXd penalized = gram_;
  penalized.diagonal().tail(K).array() += lambda;

  const Eigen::LLT<Eigen::MatrixXd> llt(penalized);
  if (llt.info() != Eigen::Success || llt.rcond() < kRcondThreshold) {
    // Diagnose which column broke the factorization so the error is
    // actionable rather than a bare "singular matrix".
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_);
    const Eigen::Index rank = qr.rank();
    const Eigen::Index suspect =
        qr.colsPermutation().indices()(rank < p ? rank : p - 1);
    const std::string column = column_names_[static_cast<std::size_t>(suspect)];
    throw SingularDesignError(
        "(X'X + penalty) at lambda=" + csv::format_double(lambda) +
        " is numerically singular (reciprocal condition " +
        csv::format_double(llt.info() == Eigen::Success ? llt.rcond() : 0.0) +
        "): column '" + column +
        "' is (near-)collinear with the others; a positive lambda makes the "
        "penalized block well-posed, or drop the offending column");
  }

  Eigen::VectorXd coefficients = llt.solve(xty_);
  // One step of iterative refinement keeps the unpenalized first-order
  // condition tight, which is what makes the reconstructed aggregate effect
  // penalty-invariant in practice.
  coefficients += llt.solve(xty_ - penalized * coefficients);

  // Map back to the original column scale (scales_ is all ones unless the
  // solver standardized; fitted values are identical either way).
  const Eigen::VectorXd original = coefficients.cwiseQuotient(scales_);

  RidgeFit fit;
  fit.lambda = lambda;
  fit.beta0 = original[0];
  fit.beta = original.tail(K);
  fit.covariance_kind = kind;
  fit.n = n;
  fit.p = p;
  if (standardized_) {
    fit.column_scales = scales_.tail(K);
  }
  if (with_inference && n > p) {
    const Eigen::VectorXd residuals = y_ - x_ * coefficients;
    fit.sigma2_hat = residuals.squaredNorm() / static_cast<double>(n - p);
    Eigen::MatrixXd inner;
    if (kind == CovarianceKind::Homoscedastic) {
      inner = *fit.sigma2_hat * gram_;
    } else {
      inner = x_.transpose() * residuals.array().square().matrix().asDiagonal() * x_;
    }
    Eigen::MatrixXd cov = sandwich(llt, inner);
    if (standardized_) {
      const Eigen::VectorXd inverse_scales = scales_.cwiseInverse();
      cov = inverse_scales.asDiagonal() * cov * inverse_scales.asDiagonal();
    }
    fit.covariance = cov;
  }
  return fit;
}

RidgeFit fit_ridge(const ResidualizedDesign& design, double lambda, CovarianceKind kind,
                   bool standardize) {
  return RidgeSolver(design, standardize).fit(lambda, kind);
}

Eigen::MatrixXd estimate_covariance(const RidgeFit& fit, const ResidualizedDesign& design,
                                    CovarianceKind kind) {
  check_fit_matches_design(fit, design);
  if (fit.n <= fit.p) {
    throw InsufficientDataError("covariance needs n > p; got n=" + std::to_string(fit.n) +
                                ", p=" + std::to_string(fit.p));
  }
  const Eigen::MatrixXd x = stacked_design(design);
  Eigen::MatrixXd penalized = x.transpose() * x;
  if (fit.column_scales.size() == fit.beta.size()) {
    // A standardized fit is, in original coordinates, a per-column penalty of
    // lambda times each column's variance.
    penalized.diagonal().tail(fit.beta.size()) +=
        fit.lambda * fit.column_scales.array().square().matrix();
  } else {
    penalized.diagonal().tail(fit.beta.size()).array() += fit.lambda;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(penalized);
  if (llt.info() != Eigen::Success) {
    throw SingularDesignError("penalized normal equations are singular");
  }
  const Eigen::VectorXd residuals = design.y_tilde - x * stack_coefficients(fit);
  Eigen::MatrixXd inner;
  if (kind == CovarianceKind::Homoscedastic) {
    const double sigma2 =
        residuals.squaredNorm() / static_cast<double>(fit.n - fit.p);
    inner = sigma2 * (x.transpose() * x);
  } else {
    inner = x.transpose() * residuals.array().square().matrix().asDiagonal() * x;
  }
  return sandwich(llt, inner);
}

double residual_variance(const RidgeFit& fit, const ResidualizedDesign& design) {
  check_fit_matches_design(fit, design);
  if (fit.n <= fit.p) {
    throw InsufficientDataError("residual variance needs n > p; got n=" +
                                std::to_string(fit.n) + ", p=" + std::to_string(fit.p));
  }
  const Eigen::MatrixXd x = stacked_design(design);
  const Eigen::VectorXd residuals = design.y_tilde - x * stack_coefficients(fit);
  return residuals.squaredNorm() / static_cast<double>(fit.n - fit.p);
}

}  // namespace focalridge
