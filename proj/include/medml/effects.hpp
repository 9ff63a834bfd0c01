#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "medml/common.hpp"
#include "medml/crossfit.hpp"
#include "medml/math.hpp"
#include "medml/scores.hpp"

namespace medml {

struct EffectStat {
  double estimate = 0.0;
  double se = 0.0;
  double p = std::numeric_limits<double>::quiet_NaN();
};

// The five natural/total effects with score-based standard errors, plus the
// mean potential outcome under non-treatment. All point estimates live on one
// common retained set so the decomposition identities hold to machine
// precision.
struct EffectReport {
  EffectStat delta;    // Lambda1 - Lambda0
  EffectStat theta1;   // Lambda1 - Psi0
  EffectStat theta0;   // Psi1 - Lambda0
  EffectStat delta1;   // Lambda1 - Psi1
  EffectStat delta0;   // Psi0 - Lambda0
  EffectStat mean_y00; // Lambda0
  int n = 0;
  int retained_n = 0;
  int trimmed_n = 0;
};

// Controlled direct effect for one prescribed mediator value.
struct ControlledReport {
  int m = 0;
  EffectStat gamma;
  int n = 0;
  int retained_n = 0;
  int trimmed_n = 0;
};

inline double p_value(double effect, double se) {
  if (!(se > 0.0)) {
    throw Error(ErrorCode::ZeroSe, "standard error must be positive");
  }
  return 2.0 * (1.0 - normal_cdf(std::fabs(effect) / se));
}

namespace detail {

inline std::vector<int> common_retained(
    std::initializer_list<const ScoreVector*> scores) {
  const ScoreVector* first = *scores.begin();
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < first->n(); ++i) {
    bool keep = true;
    for (const ScoreVector* s : scores) {
      if (s->n() != first->n()) {
        throw Error(ErrorCode::InconsistentFolds,
                    "score vectors cover different sample sizes");
      }
      if (s->trimmed[static_cast<std::size_t>(i)]) {
        keep = false;
        break;
      }
    }
    if (keep) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

inline double mean_on(const ScoreVector& s, const std::vector<int>& rows) {
  double sum = 0.0;
  for (int i : rows) sum += s.values[i];
  return sum / static_cast<double>(rows.size());
}

// se of a difference of score means: sd of the per-observation differences
// over sqrt(retained count). Passing b = nullptr gives the single-score case.
inline double se_on(const ScoreVector& a, const ScoreVector* b,
                    const std::vector<int>& rows) {
  if (rows.empty()) {
    throw Error(ErrorCode::EmptyRetainedSet,
                "no observations retained for variance estimation");
  }
  const double n_ret = static_cast<double>(rows.size());
  double mean = 0.0;
  for (int i : rows) mean += a.values[i] - (b ? b->values[i] : 0.0);
  mean /= n_ret;
  double ssq = 0.0;
  for (int i : rows) {
    const double centered = a.values[i] - (b ? b->values[i] : 0.0) - mean;
    ssq += centered * centered;
  }
  return std::sqrt(ssq / n_ret / n_ret);
}

inline EffectStat make_stat(double estimate, double se) {
  EffectStat stat;
  stat.estimate = estimate;
  stat.se = se;
  stat.p = se > 0.0 ? p_value(estimate, se)
                    : std::numeric_limits<double>::quiet_NaN();
  return stat;
}

}  // namespace detail

// Variance of the difference in the score functions of the two potential
// outcomes, evaluated on the scores' common retained set.
inline double effect_se(const ScoreVector& score_a, const ScoreVector& score_b) {
  const auto rows = detail::common_retained({&score_a, &score_b});
  return detail::se_on(score_a, &score_b, rows);
}

inline double effect_se(const ScoreVector& score_a) {
  const auto rows = detail::common_retained({&score_a});
  return detail::se_on(score_a, nullptr, rows);
}

// Assembles the effect estimates from the four counterfactual score vectors.
// The common retained set is the intersection of the four retained sets, so
// theta1 + delta0 and theta0 + delta1 both reproduce delta.
inline EffectReport assemble_effects(const CounterfactualEstimate& lambda1,
                                     const CounterfactualEstimate& lambda0,
                                     const CounterfactualEstimate& psi1,
                                     const CounterfactualEstimate& psi0) {
  const ScoreVector& l1 = lambda1.score_vector;
  const ScoreVector& l0 = lambda0.score_vector;
  const ScoreVector& s1 = psi1.score_vector;
  const ScoreVector& s0 = psi0.score_vector;
  const auto rows = detail::common_retained({&l1, &l0, &s1, &s0});
  if (rows.empty()) {
    throw Error(ErrorCode::EmptyRetainedSet,
                "trimming removed every observation");
  }

  const double m_l1 = detail::mean_on(l1, rows);
  const double m_l0 = detail::mean_on(l0, rows);
  const double m_s1 = detail::mean_on(s1, rows);
  const double m_s0 = detail::mean_on(s0, rows);

  EffectReport report;
  report.n = static_cast<int>(l1.n());
  report.retained_n = static_cast<int>(rows.size());
  report.trimmed_n = report.n - report.retained_n;
  report.delta = detail::make_stat(m_l1 - m_l0, detail::se_on(l1, &l0, rows));
  report.theta1 = detail::make_stat(m_l1 - m_s0, detail::se_on(l1, &s0, rows));
  report.theta0 = detail::make_stat(m_s1 - m_l0, detail::se_on(s1, &l0, rows));
  report.delta1 = detail::make_stat(m_l1 - m_s1, detail::se_on(l1, &s1, rows));
  report.delta0 = detail::make_stat(m_s0 - m_l0, detail::se_on(s0, &l0, rows));
  report.mean_y00 = detail::make_stat(m_l0, detail::se_on(l0, nullptr, rows));
  return report;
}

inline ControlledReport assemble_controlled(const CounterfactualEstimate& psi_1m,
                                            const CounterfactualEstimate& psi_0m) {
  const ScoreVector& s1 = psi_1m.score_vector;
  const ScoreVector& s0 = psi_0m.score_vector;
  const auto rows = detail::common_retained({&s1, &s0});
  if (rows.empty()) {
    throw Error(ErrorCode::EmptyRetainedSet,
                "trimming removed every observation");
  }
  ControlledReport report;
  report.m = s1.m;
  report.n = static_cast<int>(s1.n());
  report.retained_n = static_cast<int>(rows.size());
  report.trimmed_n = report.n - report.retained_n;
  report.gamma = detail::make_stat(
      detail::mean_on(s1, rows) - detail::mean_on(s0, rows),
      detail::se_on(s1, &s0, rows));
  return report;
}

}  // namespace medml
