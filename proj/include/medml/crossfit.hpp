#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "medml/common.hpp"
#include "medml/data.hpp"
#include "medml/nuisance.hpp"
#include "medml/rng.hpp"
#include "medml/scores.hpp"

namespace medml {

// One counterfactual mean: the average of retained cross-fitted scores.
struct CounterfactualEstimate {
  std::string target;
  double point = 0.0;
  ScoreVector score_vector;
  int retained_n = 0;
  int trimmed_n = 0;
};

// Nuisance training callbacks per fold complement. The defaults fit the
// post-lasso models; tests inject analytic oracles through the same surface.
using Theorem1Trainer =
    std::function<NuisanceFns(const Dataset&, const std::vector<int>&)>;
using Theorem2Trainer = std::function<NuisanceFns(
    const Dataset&, const std::vector<int>&, std::uint64_t half_seed)>;
using AteTrainer =
    std::function<NuisanceFns(const Dataset&, const std::vector<int>&)>;

inline Theorem1Trainer default_theorem1_trainer() {
  return [](const Dataset& data, const std::vector<int>& rows) {
    auto propensity = std::make_shared<PropensityModel>(
        fit_treatment_propensity(data, rows, false));
    auto mediator = std::make_shared<MediatorModel>(
        fit_mediator_density(data, rows));
    auto outcome = std::make_shared<OutcomeModel>(fit_outcome_mean(data, rows));
    NuisanceFns fns;
    fns.treat_prob = [propensity](const CovariateRow& x) {
      return propensity->prob(x);
    };
    fns.mediator_prob = [mediator](int d, const CovariateRow& x) {
      return mediator->prob1(d, x);
    };
    fns.outcome_mean = [outcome](int d, int m, const CovariateRow& x) {
      return outcome->mu(d, m, x);
    };
    return fns;
  };
}

// Algorithm 2 trains the propensities on the full complement, then splits it
// into two halves: the outcome mean on half A, the nested means (one per
// target arm) on half B with pseudo-outcomes from the half-A model.
inline Theorem2Trainer default_theorem2_trainer() {
  return [](const Dataset& data, const std::vector<int>& rows,
            std::uint64_t half_seed) {
    auto propensity = std::make_shared<PropensityModel>(
        fit_treatment_propensity(data, rows, false));
    auto propensity_mx = std::make_shared<PropensityModel>(
        fit_treatment_propensity(data, rows, true));

    std::vector<int> shuffled = rows;
    Rng rng(half_seed);
    rng.shuffle(shuffled);
    const std::size_t half = (shuffled.size() + 1) / 2;
    std::vector<int> half_a(shuffled.begin(),
                            shuffled.begin() + static_cast<long>(half));
    std::vector<int> half_b(shuffled.begin() + static_cast<long>(half),
                            shuffled.end());

    auto outcome =
        std::make_shared<OutcomeModel>(fit_outcome_mean(data, half_a));
    OutcomeMeanFn mu_fn = [outcome](int d, int m, const CovariateRow& x) {
      return outcome->mu(d, m, x);
    };
    auto nested0 = std::make_shared<NestedMeanModel>(
        fit_nested_mean(data, half_a, half_b, 0, mu_fn));
    auto nested1 = std::make_shared<NestedMeanModel>(
        fit_nested_mean(data, half_a, half_b, 1, mu_fn));

    NuisanceFns fns;
    fns.treat_prob = [propensity](const CovariateRow& x) {
      return propensity->prob(x);
    };
    fns.treat_prob_mx = [propensity_mx](int m, const CovariateRow& x) {
      return propensity_mx->prob(m, x);
    };
    fns.outcome_mean = mu_fn;
    fns.nested_mean = [nested0, nested1](int d, const CovariateRow& x) {
      return d == 0 ? nested0->value(x) : nested1->value(x);
    };
    return fns;
  };
}

inline AteTrainer default_ate_trainer() {
  return [](const Dataset& data, const std::vector<int>& rows) {
    auto propensity = std::make_shared<PropensityModel>(
        fit_treatment_propensity(data, rows, false));
    auto mean0 = std::make_shared<ConditionalMeanModel>(
        fit_conditional_mean_d(data, rows, 0));
    auto mean1 = std::make_shared<ConditionalMeanModel>(
        fit_conditional_mean_d(data, rows, 1));
    NuisanceFns fns;
    fns.treat_prob = [propensity](const CovariateRow& x) {
      return propensity->prob(x);
    };
    fns.outcome_mean_dx = [mean0, mean1](int d, const CovariateRow& x) {
      return d == 0 ? mean0->value(x) : mean1->value(x);
    };
    return fns;
  };
}

namespace detail {

inline CounterfactualEstimate finalize_estimate(ScoreVector score,
                                                ScoreTarget target, int d,
                                                int m = -1) {
  CounterfactualEstimate est;
  est.target = score_target_name(target, d, m);
  est.retained_n = score.retained_count();
  est.trimmed_n = static_cast<int>(score.n()) - est.retained_n;
  est.point = score.retained_mean();
  est.score_vector = std::move(score);
  return est;
}

inline ScoreVector blank_scores(ScoreTarget target, int d, int m,
                                double threshold, Eigen::Index n) {
  ScoreVector s;
  s.target = target;
  s.d = d;
  s.m = m;
  s.threshold = threshold;
  s.values = Eigen::VectorXd::Zero(n);
  s.trimmed.assign(static_cast<std::size_t>(n), 0);
  return s;
}

template <typename TrainFn>
inline NuisanceFns train_fold(const TrainFn& train, int k) {
  try {
    return train();
  } catch (const Error& e) {
    throw Error(e.code(),
                "fold " + std::to_string(k) + " failed: " + e.what());
  }
}

}  // namespace detail

// --- fold-level engines: both treatment arms from one set of fold models ---

inline std::pair<CounterfactualEstimate, CounterfactualEstimate>
run_algorithm1_folds(const Dataset& data, const FoldAssignment& folds,
                     double threshold,
                     const Theorem1Trainer& trainer = default_theorem1_trainer()) {
  const Eigen::Index n = data.n();
  ScoreVector psi1 = detail::blank_scores(ScoreTarget::PsiD, 1, -1, threshold, n);
  ScoreVector psi0 = detail::blank_scores(ScoreTarget::PsiD, 0, -1, threshold, n);
  NuisanceNeeds needs;
  needs.p_x = needs.mediator = needs.mu = true;

  const auto fold_rows = folds.folds();
  for (int k = 0; k < folds.K; ++k) {
    const NuisanceFns fns = detail::train_fold(
        [&] { return trainer(data, folds.complement(k)); }, k);
    const NuisanceSet set = materialize(data, fold_rows[static_cast<std::size_t>(k)], fns, needs);
    evaluate_psi_into(data, set, 1, threshold, psi1);
    evaluate_psi_into(data, set, 0, threshold, psi0);
  }
  return {detail::finalize_estimate(std::move(psi1), ScoreTarget::PsiD, 1),
          detail::finalize_estimate(std::move(psi0), ScoreTarget::PsiD, 0)};
}

inline std::pair<CounterfactualEstimate, CounterfactualEstimate>
run_algorithm2_folds(const Dataset& data, const FoldAssignment& folds,
                     double threshold, std::uint64_t seed,
                     const Theorem2Trainer& trainer = default_theorem2_trainer()) {
  const Eigen::Index n = data.n();
  ScoreVector star1 = detail::blank_scores(ScoreTarget::PsiStarD, 1, -1, threshold, n);
  ScoreVector star0 = detail::blank_scores(ScoreTarget::PsiStarD, 0, -1, threshold, n);
  NuisanceNeeds needs;
  needs.p_x = needs.p_mx = needs.mu = needs.omega = true;

  const auto fold_rows = folds.folds();
  for (int k = 0; k < folds.K; ++k) {
    // One half-split stream per fold, derived from the run seed.
    const std::uint64_t half_seed = derive_seed(seed, 0x8000u + static_cast<std::uint64_t>(k));
    const NuisanceFns fns = detail::train_fold(
        [&] { return trainer(data, folds.complement(k), half_seed); }, k);
    const NuisanceSet set = materialize(data, fold_rows[static_cast<std::size_t>(k)], fns, needs);
    evaluate_psi_star_into(data, set, 1, threshold, star1);
    evaluate_psi_star_into(data, set, 0, threshold, star0);
  }
  return {detail::finalize_estimate(std::move(star1), ScoreTarget::PsiStarD, 1),
          detail::finalize_estimate(std::move(star0), ScoreTarget::PsiStarD, 0)};
}

inline std::pair<CounterfactualEstimate, CounterfactualEstimate>
run_ate_folds(const Dataset& data, const FoldAssignment& folds,
              double threshold,
              const AteTrainer& trainer = default_ate_trainer()) {
  const Eigen::Index n = data.n();
  ScoreVector a1 = detail::blank_scores(ScoreTarget::AlphaD, 1, -1, threshold, n);
  ScoreVector a0 = detail::blank_scores(ScoreTarget::AlphaD, 0, -1, threshold, n);
  NuisanceNeeds needs;
  needs.p_x = needs.mu_dx = true;

  const auto fold_rows = folds.folds();
  for (int k = 0; k < folds.K; ++k) {
    const NuisanceFns fns = detail::train_fold(
        [&] { return trainer(data, folds.complement(k)); }, k);
    const NuisanceSet set = materialize(data, fold_rows[static_cast<std::size_t>(k)], fns, needs);
    evaluate_alpha_into(data, set, 1, threshold, a1);
    evaluate_alpha_into(data, set, 0, threshold, a0);
  }
  return {detail::finalize_estimate(std::move(a1), ScoreTarget::AlphaD, 1),
          detail::finalize_estimate(std::move(a0), ScoreTarget::AlphaD, 0)};
}

inline std::pair<CounterfactualEstimate, CounterfactualEstimate>
run_controlled_folds(const Dataset& data, const FoldAssignment& folds,
                     double threshold, int m,
                     const Theorem1Trainer& trainer = default_theorem1_trainer()) {
  for (int d = 0; d < 2; ++d) {
    bool found = false;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.treatment[i] == d && data.mediator[i] == m) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::EmptyCell,
                  "cell (d=" + std::to_string(d) + ", m=" + std::to_string(m) +
                      ") has no observations");
    }
  }
  const Eigen::Index n = data.n();
  ScoreVector s1 = detail::blank_scores(ScoreTarget::PsiDM, 1, m, threshold, n);
  ScoreVector s0 = detail::blank_scores(ScoreTarget::PsiDM, 0, m, threshold, n);
  NuisanceNeeds needs;
  needs.p_x = needs.mediator = needs.mu = true;

  const auto fold_rows = folds.folds();
  for (int k = 0; k < folds.K; ++k) {
    const NuisanceFns fns = detail::train_fold(
        [&] { return trainer(data, folds.complement(k)); }, k);
    const NuisanceSet set = materialize(data, fold_rows[static_cast<std::size_t>(k)], fns, needs);
    evaluate_psi_dm_into(data, set, 1, m, threshold, s1);
    evaluate_psi_dm_into(data, set, 0, m, threshold, s0);
  }
  return {detail::finalize_estimate(std::move(s1), ScoreTarget::PsiDM, 1, m),
          detail::finalize_estimate(std::move(s0), ScoreTarget::PsiDM, 0, m)};
}

// --- single-arm entry points ------------------------------------------------

inline CounterfactualEstimate run_algorithm1(const Dataset& data, int K,
                                             std::uint64_t seed,
                                             double threshold, int d) {
  const auto folds = make_folds(static_cast<int>(data.n()), K, seed);
  auto both = run_algorithm1_folds(data, folds, threshold);
  return d == 1 ? std::move(both.first) : std::move(both.second);
}

inline CounterfactualEstimate run_algorithm2(const Dataset& data, int K,
                                             std::uint64_t seed,
                                             double threshold, int d) {
  const auto folds = make_folds(static_cast<int>(data.n()), K, seed);
  auto both = run_algorithm2_folds(data, folds, threshold, seed);
  return d == 1 ? std::move(both.first) : std::move(both.second);
}

inline CounterfactualEstimate run_ate_arm(const Dataset& data, int K,
                                          std::uint64_t seed, double threshold,
                                          int d) {
  const auto folds = make_folds(static_cast<int>(data.n()), K, seed);
  auto both = run_ate_folds(data, folds, threshold);
  return d == 1 ? std::move(both.first) : std::move(both.second);
}

inline CounterfactualEstimate run_controlled(const Dataset& data, int K,
                                             std::uint64_t seed,
                                             double threshold, int d, int m) {
  const auto folds = make_folds(static_cast<int>(data.n()), K, seed);
  auto both = run_controlled_folds(data, folds, threshold, m);
  return d == 1 ? std::move(both.first) : std::move(both.second);
}

}  // namespace medml
