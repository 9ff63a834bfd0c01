#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "medml/dgp.hpp"
#include "medml/math.hpp"

using namespace medml;

namespace {

// Independent closed-form oracle for the truth: every potential variable
// depends on the covariates only through the Gaussian index s = x'beta, so
// E[M(d)] = Phi(0.5 d / sqrt(1 + Var(s))) and the effects follow in closed
// form from E[Y(d, m)] = 0.5 d + m + 0.5 d m.
struct ClosedFormTruth {
  double delta, theta1, theta0, delta1, delta0;

  explicit ClosedFormTruth(double scale, int p = 200,
                           SigmaKind kind = SigmaKind::Toeplitz) {
    const double var_s = index_sd(scale, p, kind) * index_sd(scale, p, kind);
    const double em1 = normal_cdf(0.5 / std::sqrt(1.0 + var_s));
    const double em0 = 0.5;
    auto ey = [](double d, double em) { return 0.5 * d + em + 0.5 * d * em; };
    delta = ey(1, em1) - ey(0, em0);
    theta1 = ey(1, em1) - ey(0, em1);
    theta0 = ey(1, em0) - ey(0, em0);
    delta1 = ey(1, em1) - ey(1, em0);
    delta0 = ey(0, em1) - ey(0, em0);
  }
};

}  // namespace

TEST_CASE("generated data are bit-identical under a fixed seed", "[dgp]") {
  SimulationDesign design;
  design.n = 200;
  design.p = 20;
  const Dataset a = generate_dgp(design, 123);
  const Dataset b = generate_dgp(design, 123);
  REQUIRE(a.outcome == b.outcome);
  REQUIRE(a.treatment == b.treatment);
  REQUIRE(a.mediator == b.mediator);
  REQUIRE(a.covariates == b.covariates);
  const Dataset c = generate_dgp(design, 124);
  REQUIRE(a.outcome != c.outcome);
}

TEST_CASE("negligible confounding gives a balanced treatment", "[dgp]") {
  SimulationDesign design;
  design.n = 10000;
  design.p = 10;
  design.coef_scale = 1e-9;
  design.sigma = SigmaKind::Identity;
  const Dataset data = generate_dgp(design, 7);
  const double share = data.treatment.cast<double>().mean();
  REQUIRE(std::fabs(share - 0.5) <= 3.0 * 0.5 / std::sqrt(10000.0));
}

TEST_CASE("large-sample R2 of the outcome regression is near 0.22", "[dgp]") {
  SimulationDesign design;
  design.n = 50000;
  design.p = 200;
  design.coef_scale = 0.3;
  const Dataset data = generate_dgp(design, 99);
  const Eigen::Index n = data.n();
  Eigen::MatrixXd x = data.covariates;
  x.rowwise() -= data.covariates.colwise().mean();
  Eigen::VectorXd y = data.outcome.array() - data.outcome.mean();
  const Eigen::VectorXd coef =
      (x.transpose() * x).ldlt().solve(x.transpose() * y);
  const double r2 = 1.0 - (y - x * coef).squaredNorm() / y.squaredNorm();
  REQUIRE(r2 == Catch::Approx(0.22).margin(0.02));
}

TEST_CASE("structural truth reproduces the reported values, scale 0.3",
          "[dgp]") {
  const TrueEffects t = true_effects_oracle(0.3, 1000000, 2024);
  // reported true column
  REQUIRE(t.delta == Catch::Approx(1.02).margin(0.01));
  REQUIRE(t.theta1 == Catch::Approx(0.84).margin(0.01));
  REQUIRE(t.theta0 == Catch::Approx(0.75).margin(0.01));
  REQUIRE(t.delta1 == Catch::Approx(0.27).margin(0.01));
  REQUIRE(t.delta0 == Catch::Approx(0.18).margin(0.01));
  // independent closed-form oracle, tighter
  const ClosedFormTruth cf(0.3);
  REQUIRE(t.delta == Catch::Approx(cf.delta).margin(0.005));
  REQUIRE(t.theta1 == Catch::Approx(cf.theta1).margin(0.005));
  REQUIRE(t.theta0 == Catch::Approx(cf.theta0).margin(0.005));
  REQUIRE(t.delta1 == Catch::Approx(cf.delta1).margin(0.005));
  REQUIRE(t.delta0 == Catch::Approx(cf.delta0).margin(0.005));
}

TEST_CASE("structural truth reproduces the reported values, scale 0.5",
          "[dgp]") {
  const TrueEffects t = true_effects_oracle(0.5, 1000000, 2025);
  REQUIRE(t.delta == Catch::Approx(1.00).margin(0.01));
  REQUIRE(t.theta1 == Catch::Approx(0.83).margin(0.01));
  REQUIRE(t.theta0 == Catch::Approx(0.75).margin(0.01));
  REQUIRE(t.delta1 == Catch::Approx(0.25).margin(0.01));
  REQUIRE(t.delta0 == Catch::Approx(0.17).margin(0.01));
  const ClosedFormTruth cf(0.5);
  REQUIRE(t.delta == Catch::Approx(cf.delta).margin(0.005));
  REQUIRE(t.delta1 == Catch::Approx(cf.delta1).margin(0.005));
}

TEST_CASE("decomposition identity holds exactly within the oracle sample",
          "[dgp]") {
  for (double scale : {0.3, 0.5, 0.8}) {
    const TrueEffects t = true_effects_oracle(scale, 50000, 11);
    REQUIRE(std::fabs(t.theta1 + t.delta0 - t.delta) <= 1e-12);
    REQUIRE(std::fabs(t.theta0 + t.delta1 - t.delta) <= 1e-12);
  }
}

TEST_CASE("observed outcomes follow the structural coefficients at beta ~ 0",
          "[dgp]") {
  SimulationDesign design;
  design.n = 100000;
  design.p = 5;
  design.coef_scale = 1e-9;
  design.sigma = SigmaKind::Identity;
  const Dataset data = generate_dgp(design, 17);

  // regression of Y on (1, D, M, DM); with the mediator coefficient 1 in the
  // outcome equation the coefficients are (0, 0.5, 1.0, 0.5)
  const Eigen::Index n = data.n();
  Eigen::MatrixXd design_matrix(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    design_matrix(i, 0) = 1.0;
    design_matrix(i, 1) = data.treatment[i];
    design_matrix(i, 2) = data.mediator[i];
    design_matrix(i, 3) = data.treatment[i] * data.mediator[i];
  }
  const Eigen::VectorXd coef =
      design_matrix.colPivHouseholderQr().solve(data.outcome);
  const double se_bound = 3.0 * 4.0 / std::sqrt(static_cast<double>(n));
  REQUIRE(std::fabs(coef[1] - 0.5) <= se_bound);
  REQUIRE(std::fabs(coef[2] - 1.0) <= se_bound);
  REQUIRE(std::fabs(coef[3] - 0.5) <= se_bound);
}

TEST_CASE("oracle sample matches its own analytic nuisances", "[dgp]") {
  const OracleSample s = draw_oracle_sample(0.3, 200000, 555);
  const long n = s.n();
  double d_gap = 0.0, m_gap = 0.0;
  for (long i = 0; i < n; ++i) {
    d_gap += s.treatment[i] - OracleNuisance::treat_prob(s.index[i]);
    m_gap += s.mediator[i] -
             OracleNuisance::mediator_prob(s.treatment[i], s.index[i]);
  }
  const double bound = 3.0 * 0.5 / std::sqrt(static_cast<double>(n));
  REQUIRE(std::fabs(d_gap / n) <= bound);
  REQUIRE(std::fabs(m_gap / n) <= bound);

  // x1 is drawn jointly with the index: its variance is 1 and its covariance
  // with the index matches (Sigma beta)_1
  const double x1_var = s.x1.squaredNorm() / n - std::pow(s.x1.mean(), 2);
  REQUIRE(x1_var == Catch::Approx(1.0).margin(0.02));
  const Eigen::VectorXd beta = make_beta(0.3, 200);
  const double expected_cov = (make_sigma(SigmaKind::Toeplitz, 200) * beta)(0);
  const double cov = s.x1.dot(s.index) / n - s.x1.mean() * s.index.mean();
  REQUIRE(cov == Catch::Approx(expected_cov).margin(0.02));
}

TEST_CASE("conditional-mean oracle field matches subgroup averages", "[dgp]") {
  const OracleSample s = draw_oracle_sample(0.5, 400000, 31);
  double sum[2] = {0.0, 0.0}, pred[2] = {0.0, 0.0};
  long count[2] = {0, 0};
  for (long i = 0; i < s.n(); ++i) {
    const int d = s.treatment[i];
    sum[d] += s.outcome[i];
    pred[d] += OracleNuisance::outcome_mean_dx(d, s.index[i]);
    ++count[d];
  }
  for (int d = 0; d < 2; ++d) {
    REQUIRE(sum[d] / count[d] == Catch::Approx(pred[d] / count[d]).margin(0.02));
  }
}
