#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "medml/crossfit.hpp"
#include "medml/dgp.hpp"

using namespace medml;

namespace {

Dataset worksheet_data() {
  Dataset d;
  d.outcome = Eigen::VectorXd{{2.0, 1.0, 0.5, 3.0, 1.5, -1.0}};
  d.treatment = Eigen::VectorXi{{1, 0, 1, 0, 1, 0}};
  d.mediator = Eigen::VectorXi{{1, 0, 0, 1, 1, 0}};
  d.covariates = Eigen::MatrixXd{{0.1}, {0.2}, {0.3}, {0.4}, {0.5}, {0.6}};
  return d;
}

// Every fold learns the same constants, so cross-fitting must reproduce a
// no-split evaluation.
Theorem1Trainer constant_trainer() {
  return [](const Dataset&, const std::vector<int>&) {
    NuisanceFns fns;
    fns.treat_prob = [](const CovariateRow&) { return 0.6; };
    fns.mediator_prob = [](int d, const CovariateRow&) {
      return d ? 0.7 : 0.4;
    };
    fns.outcome_mean = [](int d, int m, const CovariateRow&) {
      return 1.0 + 0.5 * d + 2.0 * m;
    };
    return fns;
  };
}

Theorem1Trainer oracle_theorem1_trainer(Eigen::VectorXd beta) {
  return [beta = std::move(beta)](const Dataset&, const std::vector<int>&) {
    NuisanceFns fns;
    fns.treat_prob = [beta](const CovariateRow& x) {
      return OracleNuisance::treat_prob(x.dot(beta));
    };
    fns.mediator_prob = [beta](int d, const CovariateRow& x) {
      return OracleNuisance::mediator_prob(d, x.dot(beta));
    };
    fns.outcome_mean = [beta](int d, int m, const CovariateRow& x) {
      return OracleNuisance::outcome_mean(d, m, x.dot(beta));
    };
    return fns;
  };
}

AteTrainer oracle_ate_trainer(Eigen::VectorXd beta) {
  return [beta = std::move(beta)](const Dataset&, const std::vector<int>&) {
    NuisanceFns fns;
    fns.treat_prob = [beta](const CovariateRow& x) {
      return OracleNuisance::treat_prob(x.dot(beta));
    };
    fns.outcome_mean_dx = [beta](int d, const CovariateRow& x) {
      return OracleNuisance::outcome_mean_dx(d, x.dot(beta));
    };
    return fns;
  };
}

}  // namespace

TEST_CASE("six-row worksheet matches the no-split hand computation",
          "[crossfit]") {
  const Dataset data = worksheet_data();
  const auto folds = make_folds(6, 3, 17);
  const auto [psi1, psi0] =
      run_algorithm1_folds(data, folds, 0.05, constant_trainer());

  // hand numbers: nu(0) for d=1 is 3.5*0.4 + 1.5*0.6 = 2.3; treated rows use
  // the density-ratio weight, control rows the bracket adjustment
  REQUIRE(psi1.trimmed_n == 0);
  REQUIRE(psi1.point == Catch::Approx(6.1333333333333333 / 6.0).margin(1e-12));

  // identical constants under K=2 reproduce the same pooled value
  const auto folds2 = make_folds(6, 2, 91);
  const auto [psi1_k2, psi0_k2] =
      run_algorithm1_folds(data, folds2, 0.05, constant_trainer());
  REQUIRE(psi1_k2.point == Catch::Approx(psi1.point).margin(1e-14));

  // per-observation spot checks from the worksheet
  REQUIRE(psi1.score_vector.values[3] == Catch::Approx(5.3).margin(1e-12));
  REQUIRE(psi1.score_vector.values[2] ==
          Catch::Approx(-10.0 / 3.0 + 2.3).margin(1e-12));
}

TEST_CASE("cross-fitting is deterministic under a fixed seed", "[crossfit]") {
  SimulationDesign design;
  design.n = 300;
  design.p = 15;
  const Dataset data = generate_dgp(design, 61);
  const CounterfactualEstimate a = run_algorithm1(data, 3, 5, 0.05, 1);
  const CounterfactualEstimate b = run_algorithm1(data, 3, 5, 0.05, 1);
  REQUIRE(a.point == b.point);
  REQUIRE(a.retained_n == b.retained_n);

  const CounterfactualEstimate c = run_algorithm2(data, 3, 5, 0.05, 0);
  const CounterfactualEstimate d = run_algorithm2(data, 3, 5, 0.05, 0);
  REQUIRE(c.point == d.point);

  const CounterfactualEstimate e = run_ate_arm(data, 3, 5, 0.05, 1);
  const CounterfactualEstimate f = run_ate_arm(data, 3, 5, 0.05, 1);
  REQUIRE(e.point == f.point);

  const CounterfactualEstimate g = run_controlled(data, 3, 5, 0.05, 1, 1);
  const CounterfactualEstimate h = run_controlled(data, 3, 5, 0.05, 1, 1);
  REQUIRE(g.point == h.point);
}

TEST_CASE("oracle nuisances make the estimate insensitive to K",
          "[crossfit]") {
  SimulationDesign design;
  design.n = 5000;
  design.p = 30;
  design.coef_scale = 0.3;
  const Dataset data = generate_dgp(design, 62);
  const Eigen::VectorXd beta = make_beta(design.coef_scale, design.p);
  const auto trainer = oracle_theorem1_trainer(beta);

  double reference = 0.0;
  bool first = true;
  for (int k : {2, 3, 5}) {
    const auto folds = make_folds(design.n, k, 1234);
    const auto [psi1, psi0] = run_algorithm1_folds(data, folds, 0.05, trainer);
    if (first) {
      reference = psi1.point;
      first = false;
    } else {
      REQUIRE(psi1.point == Catch::Approx(reference).margin(1e-10));
    }
  }
}

TEST_CASE("pooled mean equals the retained-count weighted fold means",
          "[crossfit]") {
  SimulationDesign design;
  design.n = 700;
  design.p = 20;
  design.coef_scale = 0.5;
  const Dataset data = generate_dgp(design, 63);
  const auto folds = make_folds(design.n, 3, 7);
  const Eigen::VectorXd beta = make_beta(design.coef_scale, design.p);
  const auto [psi1, psi0] = run_algorithm1_folds(
      data, folds, 0.05, oracle_theorem1_trainer(beta));

  double weighted = 0.0;
  int total = 0;
  for (const auto& fold : folds.folds()) {
    double sum = 0.0;
    int count = 0;
    for (int i : fold) {
      if (!psi1.score_vector.trimmed[static_cast<std::size_t>(i)]) {
        sum += psi1.score_vector.values[i];
        ++count;
      }
    }
    weighted += sum;
    total += count;
  }
  REQUIRE(psi1.point == Catch::Approx(weighted / total).margin(1e-12));
  REQUIRE(total == psi1.retained_n);
}

TEST_CASE("ATE arm reduces to the constant under a constant outcome",
          "[crossfit]") {
  SimulationDesign design;
  design.n = 240;
  design.p = 6;
  Dataset data = generate_dgp(design, 64);
  data.outcome.setConstant(2.5);
  const CounterfactualEstimate lambda1 = run_ate_arm(data, 3, 11, 0.05, 1);
  REQUIRE(lambda1.point == Catch::Approx(2.5).margin(1e-10));
  const CounterfactualEstimate lambda0 = run_ate_arm(data, 3, 11, 0.05, 0);
  REQUIRE(lambda0.point == Catch::Approx(2.5).margin(1e-10));
}

TEST_CASE("oracle ATE difference reproduces the scale-0.3 truth",
          "[crossfit]") {
  SimulationDesign design;
  design.n = 100000;
  design.p = 200;
  design.coef_scale = 0.3;
  const Dataset data = generate_dgp(design, 65);
  const auto folds = make_folds(design.n, 3, 2);
  const Eigen::VectorXd beta = make_beta(design.coef_scale, design.p);
  const auto [lambda1, lambda0] =
      run_ate_folds(data, folds, 0.05, oracle_ate_trainer(beta));
  REQUIRE(lambda1.point - lambda0.point == Catch::Approx(1.02).margin(0.05));
}

TEST_CASE("theorem 2 with consistent constants equals theorem 1 exactly",
          "[crossfit]") {
  const Dataset data = worksheet_data();
  const auto folds = make_folds(6, 3, 29);

  // fp-exact constants: p = 0.5 everywhere, f identical across arms, so the
  // two weighting forms coincide and nu == omega
  const Theorem1Trainer t1 = [](const Dataset&, const std::vector<int>&) {
    NuisanceFns fns;
    fns.treat_prob = [](const CovariateRow&) { return 0.5; };
    fns.mediator_prob = [](int, const CovariateRow&) { return 0.5; };
    fns.outcome_mean = [](int d, int m, const CovariateRow&) {
      return 1.0 + 0.5 * d + 2.0 * m;
    };
    return fns;
  };
  const Theorem2Trainer t2 = [](const Dataset&, const std::vector<int>&,
                                std::uint64_t) {
    NuisanceFns fns;
    fns.treat_prob = [](const CovariateRow&) { return 0.5; };
    fns.treat_prob_mx = [](int, const CovariateRow&) { return 0.5; };
    fns.outcome_mean = [](int d, int m, const CovariateRow&) {
      return 1.0 + 0.5 * d + 2.0 * m;
    };
    fns.nested_mean = [](int d, const CovariateRow&) {
      return 2.0 + 0.5 * d;  // (3 + 0.5 d) / 2 + (1 + 0.5 d) / 2
    };
    return fns;
  };
  const auto [psi1, psi0] = run_algorithm1_folds(data, folds, 0.05, t1);
  const auto [star1, star0] = run_algorithm2_folds(data, folds, 0.05, 99, t2);
  REQUIRE(psi1.point == star1.point);
  REQUIRE(psi0.point == star0.point);
}

TEST_CASE("fold failures abort with a located diagnostic", "[crossfit]") {
  SimulationDesign design;
  design.n = 90;
  design.p = 4;
  const Dataset data = generate_dgp(design, 66);
  int calls = 0;
  const Theorem1Trainer failing = [&calls](const Dataset&,
                                           const std::vector<int>&) {
    if (calls++ == 1) {
      throw Error(ErrorCode::EmptyArm, "synthetic failure");
    }
    NuisanceFns fns;
    fns.treat_prob = [](const CovariateRow&) { return 0.5; };
    fns.mediator_prob = [](int, const CovariateRow&) { return 0.5; };
    fns.outcome_mean = [](int, int, const CovariateRow&) { return 0.0; };
    return fns;
  };
  const auto folds = make_folds(design.n, 3, 3);
  try {
    run_algorithm1_folds(data, folds, 0.05, failing);
    FAIL("expected the fold failure to propagate");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::EmptyArm);
    REQUIRE(std::string(e.what()).find("fold 1") != std::string::npos);
  }
}

TEST_CASE("controlled runs require a populated treatment-mediator cell",
          "[crossfit]") {
  Dataset data;
  const int n = 60;
  data.covariates = Eigen::MatrixXd::Random(n, 3);
  data.outcome = Eigen::VectorXd::Random(n);
  data.treatment.resize(n);
  data.mediator.resize(n);
  for (int i = 0; i < n; ++i) {
    data.treatment[i] = i % 2;
    // the (d=1, m=1) cell is empty
    data.mediator[i] = data.treatment[i] == 1 ? 0 : i % 2;
  }
  try {
    run_controlled(data, 3, 1, 0.05, 1, 1);
    FAIL("expected EmptyCell");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::EmptyCell);
  }
}

TEST_CASE("a constant mediator makes the controlled score match the ATE form",
          "[crossfit]") {
  // with M == m for every row, psi_dm equals alpha_d evaluated with the
  // product denominator f(m|d,X) * p_d(X)
  Dataset data;
  data.outcome = Eigen::VectorXd{{1.0, -2.0, 0.5, 2.0}};
  data.treatment = Eigen::VectorXi{{1, 0, 1, 0}};
  data.mediator = Eigen::VectorXi{{1, 1, 1, 1}};
  data.covariates = Eigen::MatrixXd{{0.0}, {1.0}, {2.0}, {3.0}};

  NuisanceFns fns;
  fns.treat_prob = [](const CovariateRow& x) { return 0.3 + 0.1 * x[0]; };
  fns.mediator_prob = [](int d, const CovariateRow&) { return d ? 0.8 : 0.6; };
  fns.outcome_mean = [](int d, int m, const CovariateRow& x) {
    return d + 0.5 * m + 0.1 * x[0];
  };
  NuisanceNeeds needs;
  needs.p_x = needs.mediator = needs.mu = true;
  const NuisanceSet set = materialize(data, {0, 1, 2, 3}, fns, needs);
  ScoreVector controlled =
      detail::blank_scores(ScoreTarget::PsiDM, 1, 1, 0.05, 4);
  evaluate_psi_dm_into(data, set, 1, 1, 0.05, controlled);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double denom = set.f(1, 1, i) * set.p_dx(1, i);
    const double expected = score_alpha(data.outcome[i], data.treatment[i], 1,
                                        denom, set.mu_dm(1, 1, i));
    REQUIRE(controlled.values[i] == Catch::Approx(expected).margin(1e-14));
  }
}
