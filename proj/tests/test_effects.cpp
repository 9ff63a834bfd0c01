#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "medml/effects.hpp"
#include "medml/rng.hpp"

using namespace medml;

namespace {

ScoreVector make_scores(ScoreTarget target, int d,
                        const std::vector<double>& values,
                        const std::vector<char>& trimmed) {
  ScoreVector s;
  s.target = target;
  s.d = d;
  s.threshold = 0.05;
  s.values = Eigen::Map<const Eigen::VectorXd>(
      values.data(), static_cast<Eigen::Index>(values.size()));
  s.trimmed = trimmed;
  return s;
}

CounterfactualEstimate wrap(ScoreVector s) {
  CounterfactualEstimate est;
  est.retained_n = s.retained_count();
  est.trimmed_n = static_cast<int>(s.n()) - est.retained_n;
  est.point = s.retained_mean();
  est.score_vector = std::move(s);
  return est;
}

CounterfactualEstimate random_estimate(ScoreTarget target, int d,
                                       std::uint64_t seed, int n,
                                       double trim_rate = 0.1) {
  Rng rng(seed);
  std::vector<double> values;
  std::vector<char> trimmed;
  for (int i = 0; i < n; ++i) {
    values.push_back(rng.normal() + 0.5);
    trimmed.push_back(rng.uniform() < trim_rate ? 1 : 0);
  }
  // keep at least a few retained
  trimmed[0] = trimmed[1] = trimmed[2] = 0;
  return wrap(make_scores(target, d, values, trimmed));
}

}  // namespace

TEST_CASE("equal counterfactuals give zero effects", "[effects]") {
  const std::vector<double> values = {1.0, 2.0, 3.0, 4.0};
  const std::vector<char> keep = {0, 0, 0, 0};
  const auto est = wrap(make_scores(ScoreTarget::AlphaD, 1, values, keep));
  const EffectReport report = assemble_effects(est, est, est, est);
  REQUIRE(report.delta.estimate == 0.0);
  REQUIRE(report.theta1.estimate == 0.0);
  REQUIRE(report.delta0.estimate == 0.0);
  REQUIRE(report.delta.se == 0.0);
}

TEST_CASE("decomposition identities hold to machine precision", "[effects]") {
  const int n = 500;
  const auto lambda1 = random_estimate(ScoreTarget::AlphaD, 1, 1, n);
  const auto lambda0 = random_estimate(ScoreTarget::AlphaD, 0, 2, n);
  const auto psi1 = random_estimate(ScoreTarget::PsiD, 1, 3, n);
  const auto psi0 = random_estimate(ScoreTarget::PsiD, 0, 4, n);
  const EffectReport report = assemble_effects(lambda1, lambda0, psi1, psi0);
  REQUIRE(std::fabs(report.theta1.estimate + report.delta0.estimate -
                    report.delta.estimate) <= 1e-12);
  REQUIRE(std::fabs(report.theta0.estimate + report.delta1.estimate -
                    report.delta.estimate) <= 1e-12);
  REQUIRE(report.retained_n + report.trimmed_n == n);
}

TEST_CASE("two-point toy reproduces the hand-computed standard error",
          "[effects]") {
  const auto a = make_scores(ScoreTarget::AlphaD, 1, {1.0, 3.0}, {0, 0});
  const auto b = make_scores(ScoreTarget::PsiD, 0, {0.0, 0.0}, {0, 0});
  // differences (1, 3): centered squares (1, 1), mean 1, se = 1/sqrt(2)
  REQUIRE(effect_se(a, b) ==
          Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
}

TEST_CASE("identical score vectors have zero standard error", "[effects]") {
  const auto a = make_scores(ScoreTarget::PsiD, 1, {0.5, 1.5, -2.0}, {0, 0, 0});
  REQUIRE(effect_se(a, a) == 0.0);
}

TEST_CASE("se is invariant to shifting one score vector by a constant",
          "[effects]") {
  const auto a = random_estimate(ScoreTarget::AlphaD, 1, 7, 200, 0.0);
  const auto b = random_estimate(ScoreTarget::PsiD, 0, 8, 200, 0.0);
  ScoreVector shifted = b.score_vector;
  shifted.values.array() += 17.5;
  REQUIRE(effect_se(a.score_vector, b.score_vector) ==
          Catch::Approx(effect_se(a.score_vector, shifted)).margin(1e-12));
}

TEST_CASE("pairwise se uses the intersection of retained sets", "[effects]") {
  const auto a =
      make_scores(ScoreTarget::AlphaD, 1, {1.0, 3.0, 100.0}, {0, 0, 1});
  const auto b =
      make_scores(ScoreTarget::PsiD, 0, {0.0, 0.0, -100.0}, {0, 0, 0});
  REQUIRE(effect_se(a, b) ==
          Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
}

TEST_CASE("p-values follow the two-sided normal convention", "[effects]") {
  REQUIRE(p_value(0.0, 1.0) == Catch::Approx(1.0));
  REQUIRE(p_value(1.96, 1.0) == Catch::Approx(0.05).margin(1e-3));
  REQUIRE(p_value(-1.96, 1.0) == Catch::Approx(0.05).margin(1e-3));
  REQUIRE(p_value(40.0, 1.0) < 1e-12);
  try {
    p_value(1.0, 0.0);
    FAIL("expected ZeroSe");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::ZeroSe);
  }
}

TEST_CASE("variance estimator matches the fold-weighted decomposition",
          "[effects]") {
  const auto a = random_estimate(ScoreTarget::PsiD, 1, 11, 300, 0.08);
  const ScoreVector& s = a.score_vector;
  const double se = effect_se(s);

  // retained-count weighted per-fold means of squared centered scores
  double mean = 0.0;
  int retained = 0;
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    if (!s.trimmed[static_cast<std::size_t>(i)]) {
      mean += s.values[i];
      ++retained;
    }
  }
  mean /= retained;
  double weighted_sum = 0.0;
  const int K = 3;
  for (int k = 0; k < K; ++k) {
    double fold_sum = 0.0;
    for (Eigen::Index i = k; i < s.n(); i += K) {
      if (!s.trimmed[static_cast<std::size_t>(i)]) {
        fold_sum += (s.values[i] - mean) * (s.values[i] - mean);
      }
    }
    weighted_sum += fold_sum;
  }
  const double sigma2 = weighted_sum / retained;
  REQUIRE(se == Catch::Approx(std::sqrt(sigma2 / retained)).margin(1e-12));
}

TEST_CASE("degenerate retained sets are rejected", "[effects]") {
  const auto all_trimmed =
      make_scores(ScoreTarget::AlphaD, 1, {1.0, 2.0}, {1, 1});
  const auto fine = make_scores(ScoreTarget::PsiD, 0, {1.0, 2.0}, {0, 0});
  REQUIRE_THROWS_AS(effect_se(all_trimmed, fine), Error);

  const auto short_vector = make_scores(ScoreTarget::PsiD, 0, {1.0}, {0});
  try {
    effect_se(fine, short_vector);
    FAIL("expected InconsistentFolds");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::InconsistentFolds);
  }
}
