#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "focalridge/errors.hpp"
#include "focalridge/residualize.hpp"
#include "focalridge/ridge.hpp"
#include "focalridge/rng.hpp"

using namespace focalridge;

namespace {

ResidualizedDesign make_design(Eigen::VectorXd y, Eigen::VectorXd focal,
                               Eigen::MatrixXd treat, std::vector<std::string> names) {
  ResidualizedDesign design;
  design.y_tilde = std::move(y);
  design.focal_tilde = std::move(focal);
  design.treat_tilde = std::move(treat);
  design.treatment_names = std::move(names);
  design.provenance = "hand-built test design";
  return design;
}

// The four-row fixture whose normal equations solve by hand:
// [[3,2],[2,2]] beta = [6,5] at lambda = 0 and [[3,2],[2,4]] beta = [6,5]
// at lambda = 2.
ResidualizedDesign hand_fixture() {
  Eigen::VectorXd y(4);
  y << 3, 1, 2, 0;
  Eigen::VectorXd focal(4);
  focal << 1, 1, 1, 0;
  Eigen::MatrixXd treat(4, 1);
  treat << 1, 0, 1, 0;
  return make_design(y, focal, treat, {"D1"});
}

// Random mean-centered design with noise; suitable for every generic check.
ResidualizedDesign random_design(Eigen::Index n, Eigen::Index K, std::uint64_t stream,
                                 double noise_sd = 1.0, Eigen::VectorXd* truth = nullptr) {
  CounterRng rng(555, stream);
  Eigen::MatrixXd treat(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) {
      treat(i, k) = rng.bernoulli(0.15 + 0.5 * static_cast<double>(k) / static_cast<double>(K));
    }
  }
  Eigen::VectorXd focal(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    focal[i] = treat.row(i).maxCoeff();
  }
  Eigen::VectorXd coef(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    coef[k] = -1.0 + 2.0 * rng.uniform();
  }
  Eigen::VectorXd y = 1.5 * focal + treat * coef;
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] += noise_sd * rng.normal();
  }
  // Center everything so the design resembles residualizer output.
  focal.array() -= focal.mean();
  y.array() -= y.mean();
  for (Eigen::Index k = 0; k < K; ++k) {
    treat.col(k).array() -= treat.col(k).mean();
  }
  if (truth != nullptr) {
    *truth = coef;
  }
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < K; ++k) {
    names.push_back("D" + std::to_string(k + 1));
  }
  return make_design(y, focal, treat, names);
}

Eigen::MatrixXd stacked(const ResidualizedDesign& design) {
  Eigen::MatrixXd x(design.unit_count(), design.sub_treatment_count() + 1);
  x.col(0) = design.focal_tilde;
  x.rightCols(design.sub_treatment_count()) = design.treat_tilde;
  return x;
}

double rss(const RidgeFit& fit, const ResidualizedDesign& design) {
  Eigen::VectorXd coef(fit.p);
  coef[0] = fit.beta0;
  coef.tail(fit.beta.size()) = fit.beta;
  return (design.y_tilde - stacked(design) * coef).squaredNorm();
}

}  // namespace

TEST_SUITE("ridge_solver") {

TEST_CASE("hand fixture: zero penalty solves the 2x2 normal equations") {
  const RidgeFit fit = fit_ridge(hand_fixture(), 0.0);
  CHECK(fit.beta0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.beta[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(fit.n == 4);
  CHECK(fit.p == 2);
}

TEST_CASE("hand fixture: penalty 2 shifts only per the penalized normal equations") {
  const RidgeFit fit = fit_ridge(hand_fixture(), 2.0);
  CHECK(fit.beta0 == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(fit.beta[0] == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("hand fixture: huge penalty collapses onto the univariate projection") {
  const RidgeFit fit = fit_ridge(hand_fixture(), 1e8);
  CHECK(std::abs(fit.beta0 - 2.0) < 1e-4);  // <y, focal>/<focal, focal> = 6/3
  CHECK(std::abs(fit.beta[0]) < 1e-4);
}

TEST_CASE("hand fixture: residual variance is 0.25 at zero penalty") {
  const ResidualizedDesign design = hand_fixture();
  const RidgeFit fit = fit_ridge(design, 0.0);
  REQUIRE(fit.sigma2_hat.has_value());
  CHECK(*fit.sigma2_hat == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(residual_variance(fit, design) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("an outcome inside the column span has zero residual variance") {
  ResidualizedDesign design = hand_fixture();
  design.y_tilde = 2.0 * design.focal_tilde - 0.5 * design.treat_tilde.col(0);
  const RidgeFit fit = fit_ridge(design, 0.0);
  REQUIRE(fit.sigma2_hat.has_value());
  CHECK(*fit.sigma2_hat < 1e-24);
  // And the covariance collapses with it, for both kinds.
  for (const CovarianceKind kind : {CovarianceKind::Homoscedastic, CovarianceKind::Robust}) {
    const Eigen::MatrixXd cov = estimate_covariance(fit, design, kind);
    CHECK(cov.lpNorm<Eigen::Infinity>() < 1e-20);
  }
}

TEST_CASE("zero-penalty homoscedastic covariance is the classical least-squares formula") {
  const ResidualizedDesign design = random_design(300, 3, 1);
  const RidgeFit fit = fit_ridge(design, 0.0);
  REQUIRE(fit.covariance.has_value());
  const Eigen::MatrixXd x = stacked(design);
  const Eigen::MatrixXd classical =
      *fit.sigma2_hat * (x.transpose() * x).fullPivLu().inverse();
  CHECK((*fit.covariance - classical).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("residual variance tracks the true noise level on a pure-noise design") {
  const Eigen::Index n = 20000;
  CounterRng rng(17, 0);
  ResidualizedDesign design = random_design(n, 2, 2, /*noise_sd=*/0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.y_tilde[i] = 2.0 * rng.normal();  // variance 4, no signal at all
  }
  const RidgeFit fit = fit_ridge(design, 0.0);
  REQUIRE(fit.sigma2_hat.has_value());
  CHECK(std::abs(*fit.sigma2_hat - 4.0) < 0.2);  // within 5%
}

TEST_CASE("robust and homoscedastic agree under homoscedastic noise") {
  const ResidualizedDesign design = random_design(5000, 3, 3, /*noise_sd=*/1.0);
  const RidgeFit homo = fit_ridge(design, 0.5, CovarianceKind::Homoscedastic);
  const RidgeFit robust = fit_ridge(design, 0.5, CovarianceKind::Robust);
  REQUIRE(homo.covariance.has_value());
  REQUIRE(robust.covariance.has_value());
  for (Eigen::Index i = 0; i < homo.covariance->rows(); ++i) {
    const double a = (*homo.covariance)(i, i);
    const double b = (*robust.covariance)(i, i);
    CHECK(std::abs(a - b) / a < 0.15);
  }
}

TEST_CASE("the unpenalized first-order condition holds exactly at every penalty") {
  const ResidualizedDesign design = random_design(800, 4, 4);
  const RidgeSolver solver(design);
  const double scale =
      design.y_tilde.norm() * design.focal_tilde.norm() /
      static_cast<double>(design.unit_count());
  for (const double lambda : {0.0, 1e-3, 1.0, 1e3, 1e8}) {
    const RidgeFit fit = solver.fit(lambda);
    Eigen::VectorXd coef(fit.p);
    coef[0] = fit.beta0;
    coef.tail(fit.beta.size()) = fit.beta;
    const Eigen::VectorXd residuals = design.y_tilde - stacked(design) * coef;
    const double foc = std::abs(residuals.dot(design.focal_tilde));
    CHECK(foc < 1e-8 * static_cast<double>(design.unit_count()) * std::max(1.0, scale));
  }
}

TEST_CASE("in-sample residual sum of squares never decreases with the penalty") {
  const ResidualizedDesign design = random_design(400, 5, 5);
  double previous = -1.0;
  for (const double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4, 1e6}) {
    const double current = rss(fit_ridge(design, lambda), design);
    CHECK(current >= previous - 1e-9 * std::max(1.0, current));
    previous = current;
  }
}

TEST_CASE("coefficients are invariant to row permutation") {
  const ResidualizedDesign design = random_design(150, 3, 6);
  const Eigen::Index n = design.unit_count();
  // Reverse the rows: a permutation with no RNG dependence.
  ResidualizedDesign reversed = design;
  reversed.y_tilde = design.y_tilde.reverse();
  reversed.focal_tilde = design.focal_tilde.reverse();
  reversed.treat_tilde = design.treat_tilde.colwise().reverse();
  REQUIRE(reversed.y_tilde[0] == design.y_tilde[n - 1]);

  const RidgeFit a = fit_ridge(design, 3.0);
  const RidgeFit b = fit_ridge(reversed, 3.0);
  CHECK(std::abs(a.beta0 - b.beta0) < 1e-12);
  CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("an exactly collinear design is singular at zero penalty but not above it") {
  ResidualizedDesign design = random_design(100, 2, 7);
  Eigen::MatrixXd widened(design.unit_count(), 3);
  widened << design.treat_tilde, design.treat_tilde.col(1);  // duplicate column
  design.treat_tilde = widened;
  design.treatment_names = {"D1", "D2", "D2_copy"};

  CHECK_THROWS_WITH_AS(fit_ridge(design, 0.0), doctest::Contains("positive lambda"),
                       SingularDesignError);
  try {
    fit_ridge(design, 0.0);
  } catch (const SingularDesignError& e) {
    // The diagnosis names one of the two interchangeable duplicates.
    const std::string what = e.what();
    CHECK(what.find("D2") != std::string::npos);
  }

  const RidgeFit fit = fit_ridge(design, 1.0);
  CHECK(std::isfinite(fit.beta0));
  // The duplicated columns share the penalized coefficient equally.
  CHECK(fit.beta[1] == doctest::Approx(fit.beta[2]).epsilon(1e-8));
}

TEST_CASE("invalid penalties are rejected") {
  const ResidualizedDesign design = hand_fixture();
  CHECK_THROWS_AS(fit_ridge(design, -1.0), ValidationError);
  CHECK_THROWS_AS(fit_ridge(design, std::nan("")), ValidationError);
  CHECK_THROWS_AS(fit_ridge(design, std::numeric_limits<double>::infinity()),
                  ValidationError);
}

TEST_CASE("inference is unavailable when observations do not exceed parameters") {
  // n = 3 rows, p = K+1 = 3 parameters.
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Eigen::VectorXd focal(3);
  focal << 1, 0, 1;
  Eigen::MatrixXd treat(3, 2);
  treat << 1, 0,
           0, 1,
           1, 1;
  const ResidualizedDesign design = make_design(y, focal, treat, {"D1", "D2"});
  const RidgeFit fit = fit_ridge(design, 0.5);
  CHECK_FALSE(fit.sigma2_hat.has_value());
  CHECK_FALSE(fit.covariance.has_value());
  CHECK_THROWS_AS(residual_variance(fit, design), InsufficientDataError);
  CHECK_THROWS_AS(estimate_covariance(fit, design, CovarianceKind::Homoscedastic),
                  InsufficientDataError);
}

TEST_CASE("a shared solver reproduces one-shot fits bitwise across a grid") {
  const ResidualizedDesign design = random_design(250, 4, 8);
  const RidgeSolver solver(design);
  for (const double lambda : {0.0, 0.5, 12.0, 4000.0}) {
    const RidgeFit one_shot = fit_ridge(design, lambda, CovarianceKind::Robust);
    const RidgeFit shared = solver.fit(lambda, CovarianceKind::Robust);
    CHECK(one_shot.beta0 == shared.beta0);
    CHECK((one_shot.beta - shared.beta).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(*one_shot.sigma2_hat == *shared.sigma2_hat);
    CHECK((*one_shot.covariance - *shared.covariance).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("with_inference=false skips the covariance work but not the coefficients") {
  const ResidualizedDesign design = random_design(200, 3, 9);
  const RidgeSolver solver(design);
  const RidgeFit full = solver.fit(2.0);
  const RidgeFit lean = solver.fit(2.0, CovarianceKind::Homoscedastic, false);
  CHECK_FALSE(lean.sigma2_hat.has_value());
  CHECK_FALSE(lean.covariance.has_value());
  CHECK(lean.beta0 == full.beta0);
  CHECK((lean.beta - full.beta).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("the standalone covariance matches the fit-time covariance") {
  const ResidualizedDesign design = random_design(350, 3, 10);
  for (const CovarianceKind kind : {CovarianceKind::Homoscedastic, CovarianceKind::Robust}) {
    const RidgeFit fit = fit_ridge(design, 7.0, kind);
    REQUIRE(fit.covariance.has_value());
    const Eigen::MatrixXd standalone = estimate_covariance(fit, design, kind);
    CHECK((standalone - *fit.covariance).lpNorm<Eigen::Infinity>() <
          1e-10 * std::max(1.0, fit.covariance->lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("fit/design mismatches are rejected") {
  const ResidualizedDesign design = random_design(100, 3, 11);
  const ResidualizedDesign other = random_design(100, 2, 12);
  const RidgeFit fit = fit_ridge(design, 1.0);
  CHECK_THROWS_AS(residual_variance(fit, other), ValidationError);
  CHECK_THROWS_AS(estimate_covariance(fit, other, CovarianceKind::Robust), ValidationError);
}

TEST_CASE("covariance kind names round-trip; unknown names are rejected") {
  CHECK(to_string(CovarianceKind::Homoscedastic) == "homoscedastic");
  CHECK(to_string(CovarianceKind::Robust) == "robust");
  CHECK(covariance_kind_from_string("homoscedastic") == CovarianceKind::Homoscedastic);
  CHECK(covariance_kind_from_string("robust") == CovarianceKind::Robust);
  CHECK_THROWS_AS(covariance_kind_from_string("sandwich"), ValidationError);
}

TEST_CASE("standardization is a no-op at zero penalty") {
  const ResidualizedDesign design = random_design(300, 4, 13);
  const RidgeFit plain = fit_ridge(design, 0.0);
  const RidgeFit scaled = fit_ridge(design, 0.0, CovarianceKind::Homoscedastic, true);
  CHECK(std::abs(plain.beta0 - scaled.beta0) < 1e-10);
  CHECK((plain.beta - scaled.beta).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((*plain.covariance - *scaled.covariance).lpNorm<Eigen::Infinity>() <
        1e-10 * plain.covariance->lpNorm<Eigen::Infinity>());
  CHECK(scaled.column_scales.size() == 4);
  CHECK(plain.column_scales.size() == 0);
}

TEST_CASE("standardization reports coefficients on the original scale") {
  // Blow one column up by 100x: on the raw design the common penalty hits it
  // far harder per unit of original coefficient; standardization equalizes.
  ResidualizedDesign design = random_design(500, 2, 14);
  ResidualizedDesign inflated = design;
  inflated.treat_tilde.col(0) *= 100.0;

  const RidgeFit scaled_original = fit_ridge(design, 50.0, CovarianceKind::Homoscedastic, true);
  const RidgeFit scaled_inflated =
      fit_ridge(inflated, 50.0, CovarianceKind::Homoscedastic, true);
  // A standardized fit is scale-equivariant: inflating a column by c divides
  // its reported coefficient by exactly c and changes nothing else.
  CHECK(scaled_inflated.beta[0] * 100.0 ==
        doctest::Approx(scaled_original.beta[0]).epsilon(1e-10));
  CHECK(scaled_inflated.beta[1] == doctest::Approx(scaled_original.beta[1]).epsilon(1e-10));
  CHECK(scaled_inflated.beta0 == doctest::Approx(scaled_original.beta0).epsilon(1e-10));

  // The unstandardized fit is not scale-equivariant at a positive penalty.
  const RidgeFit raw_original = fit_ridge(design, 50.0);
  const RidgeFit raw_inflated = fit_ridge(inflated, 50.0);
  CHECK(std::abs(raw_inflated.beta[0] * 100.0 - raw_original.beta[0]) >
        1e-6 * std::abs(raw_original.beta[0]));

  // Recorded scales are the per-column standard deviations.
  const Eigen::VectorXd col = design.treat_tilde.col(0);
  const double sd = std::sqrt((col.array() - col.mean()).square().sum() /
                              static_cast<double>(col.size()));
  CHECK(scaled_original.column_scales[0] == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("standardized fits keep the exact focal first-order condition") {
  const ResidualizedDesign design = random_design(400, 3, 15);
  const RidgeSolver solver(design, true);
  for (const double lambda : {0.0, 1.0, 1e3}) {
    const RidgeFit fit = solver.fit(lambda);
    Eigen::VectorXd coef(fit.p);
    coef[0] = fit.beta0;
    coef.tail(fit.beta.size()) = fit.beta;
    const Eigen::VectorXd residuals = design.y_tilde - stacked(design) * coef;
    CHECK(std::abs(residuals.dot(design.focal_tilde)) <
          1e-8 * static_cast<double>(design.unit_count()));
  }
}

TEST_CASE("the standalone covariance understands standardized fits") {
  const ResidualizedDesign design = random_design(350, 3, 16);
  for (const CovarianceKind kind : {CovarianceKind::Homoscedastic, CovarianceKind::Robust}) {
    const RidgeFit fit = fit_ridge(design, 25.0, kind, true);
    REQUIRE(fit.covariance.has_value());
    const Eigen::MatrixXd standalone = estimate_covariance(fit, design, kind);
    CHECK((standalone - *fit.covariance).lpNorm<Eigen::Infinity>() <
          1e-10 * std::max(1.0, fit.covariance->lpNorm<Eigen::Infinity>()));
  }
}

}  // TEST_SUITE
