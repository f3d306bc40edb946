#include "focalridge/reconstruct.hpp"

#include <cmath>
#include <string>

#include "focalridge/errors.hpp"

namespace focalridge {

namespace {

void check_fit_width(const RidgeFit& fit, Eigen::Index expected, const char* what) {
  if (fit.beta.size() != expected) {
    throw ValidationError(std::string(what) + ": fit has " +
                          std::to_string(fit.beta.size()) + " sub-treatment coefficients, " +
                          "expected " + std::to_string(expected));
  }
}

}  // namespace

Eigen::VectorXd moment_ratios(const ResidualizedDesign& design) {
  const double second_moment = design.focal_tilde.squaredNorm();
  if (second_moment <= 0.0) {
    throw ValidationError("zero focal second moment: cannot form moment ratios");
  }
  return design.treat_tilde.transpose() * design.focal_tilde / second_moment;
}

double reconstruct_tau0(const RidgeFit& fit, const ResidualizedDesign& design) {
  check_fit_width(fit, design.sub_treatment_count(), "reconstruct_tau0");
  if (fit.n != design.unit_count()) {
    throw ValidationError("reconstruct_tau0: fit was computed on n=" +
                          std::to_string(fit.n) + " rows, design has " +
                          std::to_string(design.unit_count()));
  }
  return fit.beta0 + fit.beta.dot(moment_ratios(design));
}

double univariate_projection(const ResidualizedDesign& design) {
  const double second_moment = design.focal_tilde.squaredNorm();
  if (second_moment <= 0.0) {
    throw ValidationError("zero focal second moment: univariate projection undefined");
  }
  return design.y_tilde.dot(design.focal_tilde) / second_moment;
}

double reconstruct_tau_j(const RidgeFit& fit, const Dataset& data, Eigen::Index j) {
  const Eigen::Index K = data.sub_treatment_count();
  check_fit_width(fit, K, "reconstruct_tau_j");
  if (j < 0 || j >= K) {
    throw ValidationError("reconstruct_tau_j: index " + std::to_string(j) +
                          " out of range for K=" + std::to_string(K));
  }
  const double count_j = data.treatments.col(j).sum();
  if (count_j <= 0.0) {
    throw ValidationError("no unit with '" +
                          data.treatment_names[static_cast<std::size_t>(j)] +
                          "' = 1: conditional frequencies are undefined");
  }
  double spillover = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (k == j) {
      continue;
    }
    const double joint_count = data.treatments.col(j).dot(data.treatments.col(k));
    spillover += fit.beta[k] * (joint_count / count_j);
  }
  return fit.beta[j] + fit.beta0 + spillover;
}

ReconstructedEffects reconstruct_effects(const RidgeFit& fit,
                                         const ResidualizedDesign& design,
                                         const Dataset& data) {
  const Eigen::Index K = data.sub_treatment_count();
  ReconstructedEffects effects;
  effects.lambda_used = fit.lambda;
  effects.moment_ratios = moment_ratios(design);
  effects.tau0 = reconstruct_tau0(fit, design);
  effects.tau.resize(K);
  Eigen::MatrixXd cond(K, K);
  for (Eigen::Index j = 0; j < K; ++j) {
    effects.tau[j] = reconstruct_tau_j(fit, data, j);
    const double count_j = data.treatments.col(j).sum();
    for (Eigen::Index k = 0; k < K; ++k) {
      cond(j, k) = data.treatments.col(j).dot(data.treatments.col(k)) / count_j;
    }
  }
  effects.cond_probs = std::move(cond);
  return effects;
}

double analytic_tau0_binary_max(const Eigen::VectorXd& prevalences, double beta0,
                                const Eigen::VectorXd& beta) {
  if (prevalences.size() != beta.size() || prevalences.size() == 0) {
    throw ValidationError("analytic_tau0_binary_max: prevalences and beta must have the "
                          "same positive length");
  }
  double none_treated = 1.0;
  for (Eigen::Index k = 0; k < prevalences.size(); ++k) {
    const double p = prevalences[k];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("prevalence " + std::to_string(k + 1) +
                            " must lie in [0, 1], got " + std::to_string(p));
    }
    none_treated *= 1.0 - p;
  }
  const double any_treated = 1.0 - none_treated;
  if (any_treated <= 0.0) {
    throw ValidationError("all prevalences are zero: the focal column never activates");
  }
  return beta0 + beta.dot(prevalences) / any_treated;
}

SumFocalDecomposition sum_focal_decomposition(const Eigen::Matrix2d& joint, double beta0,
                                              double beta1, double beta2) {
  double total = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (joint(a, b) < -1e-15) {
        throw ValidationError("joint distribution has a negative probability");
      }
      total += joint(a, b);
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("joint distribution must sum to 1, sums to " +
                          std::to_string(total));
  }
  const double p_one = joint(1, 0) + joint(0, 1);  // P(D' = 1)
  const double p_two = joint(1, 1);                // P(D' = 2)
  if (p_one + p_two <= 0.0) {
    throw ValidationError("P(D' >= 1) = 0: no unit is ever treated");
  }
  const double second_moment = p_one + 4.0 * p_two;  // E[D'^2]

  SumFocalDecomposition result;
  result.w1 = p_one / second_moment;
  result.w2 = 2.0 * p_two / second_moment;
  double weighted = 0.0;
  if (p_one > 0.0) {
    result.mean_given_one =
        beta0 + beta1 * (joint(1, 0) / p_one) + beta2 * (joint(0, 1) / p_one);
    weighted += result.w1 * *result.mean_given_one;
  }
  if (p_two > 0.0) {
    result.mean_given_two = 2.0 * beta0 + beta1 + beta2;
    weighted += result.w2 * *result.mean_given_two;
  }

  // Population moments: Y(a,b) = beta0 (a+b) + beta1 a + beta2 b, D' = a+b.
  const double e_yd = joint(1, 0) * (beta0 + beta1) + joint(0, 1) * (beta0 + beta2) +
                      joint(1, 1) * (2.0 * beta0 + beta1 + beta2) * 2.0;
  result.tau0 = e_yd / second_moment;

  if (std::abs(result.tau0 - weighted) > 1e-12 * std::max(1.0, std::abs(result.tau0))) {
    throw Error("sum-focal decomposition identity violated: moments give " +
                std::to_string(result.tau0) + ", weighted conditional means give " +
                std::to_string(weighted));
  }
  return result;
}

}  // namespace focalridge
