#pragma once

#include <Eigen/Dense>
#include <optional>

#include "focalridge/dataset.hpp"
#include "focalridge/residualize.hpp"
#include "focalridge/ridge.hpp"

namespace focalridge {

// Aggregate and per-sub-treatment effects rebuilt from a penalized fit.
// moment_ratios holds m_k = <focal_tilde, treat_tilde_k> / <focal_tilde,
// focal_tilde>; cond_probs(j, k) is the sample frequency of D_k = 1 among
// units with D_j = 1 (meaningful for binary treatments without confounding
// adjustment).
struct ReconstructedEffects {
  double tau0 = 0.0;
  Eigen::VectorXd tau;            // K per-sub-treatment effects
  Eigen::VectorXd moment_ratios;  // K
  std::optional<Eigen::MatrixXd> cond_probs;  // K x K
  double lambda_used = 0.0;
};

// m_k for every sub-treatment column. Sample moments share a 1/n
// normalization, so the ratios are normalization-free.
Eigen::VectorXd moment_ratios(const ResidualizedDesign& design);

// Aggregate effect from any fit: beta0 + sum_k beta_k m_k. Invariant to the
// penalty, because the unpenalized coordinate's first-order condition pins
// the same linear combination at every lambda.
double reconstruct_tau0(const RidgeFit& fit, const ResidualizedDesign& design);

// <y_tilde, focal_tilde> / <focal_tilde, focal_tilde>: the coefficient from
// projecting the outcome on the focal column alone, which reconstruct_tau0
// matches at every penalty.
double univariate_projection(const ResidualizedDesign& design);

// Expected impact of sub-treatment j including spillover through
// co-occurring treatments: beta_j + beta0 + sum_{k != j} beta_k P(D_k=1 |
// D_j=1), with conditional probabilities plugged in as raw sample
// frequencies (valid without covariate confounding).
double reconstruct_tau_j(const RidgeFit& fit, const Dataset& data, Eigen::Index j);

// Everything above in one pass over a binary dataset.
ReconstructedEffects reconstruct_effects(const RidgeFit& fit,
                                         const ResidualizedDesign& design,
                                         const Dataset& data);

// Closed form for independent binary sub-treatments under the max focal:
// beta0 + sum_k beta_k p_k / (1 - prod_m (1 - p_m)).
double analytic_tau0_binary_max(const Eigen::VectorXd& prevalences, double beta0,
                                const Eigen::VectorXd& beta);

// Two-sub-treatment sum-focal decomposition. The weights satisfy
// w1 + 2 w2 = 1 exactly, and tau0 computed from population moments agrees
// with w1 E[Y|D'=1] + w2 E[Y|D'=2] (checked internally to 1e-12).
struct SumFocalDecomposition {
  double tau0 = 0.0;
  double w1 = 0.0;  // P(D'=1) / E[D'^2]
  double w2 = 0.0;  // 2 P(D'=2) / E[D'^2]
  std::optional<double> mean_given_one;  // E[Y | D'=1]; empty when P(D'=1)=0
  std::optional<double> mean_given_two;  // E[Y | D'=2]; empty when P(D'=2)=0
};

// joint(a, b) = P(D1=a, D2=b) over {0,1}^2, must sum to 1.
SumFocalDecomposition sum_focal_decomposition(const Eigen::Matrix2d& joint, double beta0,
                                              double beta1, double beta2);

}  // namespace focalridge
