#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "focalridge/residualize.hpp"

namespace focalridge {

enum class CovarianceKind { Homoscedastic, Robust };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(const std::string& text);

// One penalized fit. The focal coefficient beta0 is never penalized; the K
// sub-treatment coefficients share the common penalty lambda. sigma2_hat and
// covariance are unavailable (nullopt) when n <= p = K+1; the degrees of
// freedom in sigma2_hat are n - (K+1) at every lambda.
struct RidgeFit {
  double lambda = 0.0;
  double beta0 = 0.0;
  Eigen::VectorXd beta;  // K sub-treatment coefficients
  std::optional<double> sigma2_hat;
  std::optional<Eigen::MatrixXd> covariance;  // (K+1)x(K+1), [focal, D1..DK] order
  CovarianceKind covariance_kind = CovarianceKind::Homoscedastic;
  Eigen::Index n = 0;
  Eigen::Index p = 0;  // K+1: focal column plus K penalized columns
  // Per-column standard deviations used when the solver standardized the
  // penalized columns; empty for an unstandardized fit. Coefficients above
  // are always on the original column scale either way.
  Eigen::VectorXd column_scales;  // K, or empty
};

// Shares the stacked design, Gram matrix and moment vector across fits at
// many penalty values. fit() is pure: the same inputs give bitwise-identical
// outputs, so fits over a grid may run concurrently on one shared solver.
//
// With standardize = true the K penalized columns are scaled to unit sample
// variance before the common penalty applies, and coefficients and
// covariance are mapped back to the original scale. In original coordinates
// this is a per-column penalty of lambda * Var(column_k); the focal column
// is never scaled, so the aggregate-effect invariance is untouched. Off by
// default: residualized binary indicators already share a comparable scale.
class RidgeSolver {
 public:
  explicit RidgeSolver(const ResidualizedDesign& design, bool standardize = false);

  // with_inference=false skips sigma2_hat and the covariance (useful in
  // Monte Carlo loops that only need coefficients).
  RidgeFit fit(double lambda, CovarianceKind kind = CovarianceKind::Homoscedastic,
               bool with_inference = true) const;

  double gram_trace() const { return gram_.trace(); }
  const Eigen::MatrixXd& design_matrix() const { return x_; }
  const Eigen::VectorXd& outcome() const { return y_; }

 private:
  Eigen::MatrixXd x_;     // n x p stacked [focal_tilde, treat_tilde], scaled if standardized
  Eigen::VectorXd y_;     // y_tilde
  Eigen::MatrixXd gram_;  // X'X of the solved (possibly scaled) design
  Eigen::VectorXd xty_;   // X'y
  Eigen::VectorXd scales_;  // p per-column divisors; all ones when not standardizing
  bool standardized_ = false;
  std::vector<std::string> column_names_;  // "focal", then treatment labels
};

RidgeFit fit_ridge(const ResidualizedDesign& design, double lambda,
                   CovarianceKind kind = CovarianceKind::Homoscedastic,
                   bool standardize = false);

// Sandwich covariance of (beta0, beta) for an existing fit:
//   Homoscedastic: sigma2 * (X'X+L)^-1 X'X (X'X+L)^-1
//   Robust:        (X'X+L)^-1 X' diag(residual^2) X (X'X+L)^-1
// Throws InsufficientDataError when n <= p.
Eigen::MatrixXd estimate_covariance(const RidgeFit& fit, const ResidualizedDesign& design,
                                    CovarianceKind kind);

// ||y_tilde - X beta||^2 / (n - p) with p = K+1 at every lambda.
// Throws InsufficientDataError when n <= p.
double residual_variance(const RidgeFit& fit, const ResidualizedDesign& design);

}  // namespace focalridge
