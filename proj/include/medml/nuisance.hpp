#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "medml/common.hpp"
#include "medml/data.hpp"
#include "medml/logistic.hpp"
#include "medml/math.hpp"

namespace medml {

using CovariateRow = Eigen::Ref<const Eigen::RowVectorXd>;

// Nuisance functions in evaluation form. Trained models and analytic oracles
// share this surface, so the cross-fitting engine never cares which it got.
struct NuisanceFns {
  std::function<double(const CovariateRow&)> treat_prob;                 // Pr(D=1 | X=x)
  std::function<double(int m, const CovariateRow&)> treat_prob_mx;       // Pr(D=1 | M=m, X=x)
  std::function<double(int d, const CovariateRow&)> mediator_prob;       // Pr(M=1 | D=d, X=x)
  std::function<double(int d, int m, const CovariateRow&)> outcome_mean; // E[Y | D=d, M=m, X=x]
  std::function<double(int d, const CovariateRow&)> outcome_mean_dx;     // E[Y | D=d, X=x]
  std::function<double(int d, const CovariateRow&)> nested_mean;         // omega(1-d, x), indexed by target arm d
};

namespace detail {

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X,
                               const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

template <typename Vec>
inline Vec subset(const Vec& v, const std::vector<int>& rows) {
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Concrete nuisance fits (logistic lasso / post-lasso on training rows).
// ---------------------------------------------------------------------------

// Pr(D=1 | X) or Pr(D=1 | M, X): logistic lasso of D on X, optionally with the
// mediator prepended as a regressor.
struct PropensityModel {
  LogisticModel model;
  bool with_mediator = false;

  double prob(const CovariateRow& x) const {
    return predict_proba(model, x);
  }
  double prob(int m, const CovariateRow& x) const {
    Eigen::RowVectorXd row(x.size() + 1);
    row[0] = static_cast<double>(m);
    row.tail(x.size()) = x;
    return predict_proba(model, row);
  }
};

inline PropensityModel fit_treatment_propensity(const Dataset& data,
                                                const std::vector<int>& rows,
                                                bool include_mediator) {
  const Eigen::Index p = data.p();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()),
                         include_mediator ? p + 1 : p);
  Eigen::VectorXi response(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (include_mediator) {
      design(r, 0) = static_cast<double>(data.mediator[rows[i]]);
      design.row(r).tail(p) = data.covariates.row(rows[i]);
    } else {
      design.row(r) = data.covariates.row(rows[i]);
    }
    response[r] = data.treatment[rows[i]];
  }
  PropensityModel out;
  out.with_mediator = include_mediator;
  out.model = fit_logistic_post_lasso(design, response);
  return out;
}

// Pr(M=1 | D, X): one logistic lasso of M on X within each treatment arm;
// f(m | d, x) reads the arm-d model. Per-arm fits track the reference
// pipeline's dispersion, which the trimming counts are sensitive to.
struct MediatorModel {
  LogisticModel arm0;
  LogisticModel arm1;

  double prob1(int d, const CovariateRow& x) const {
    return predict_proba(d ? arm1 : arm0, x);
  }
};

inline MediatorModel fit_mediator_density(const Dataset& data,
                                          const std::vector<int>& rows) {
  const Eigen::Index p = data.p();
  MediatorModel out;
  for (int d = 0; d < 2; ++d) {
    std::vector<int> arm_rows;
    for (int r : rows) {
      if (data.treatment[r] == d) arm_rows.push_back(r);
    }
    if (arm_rows.size() < 2) {
      throw Error(ErrorCode::EmptyArm,
                  "treatment arm " + std::to_string(d) +
                      " has fewer than 2 training observations");
    }
    Eigen::MatrixXd design(static_cast<Eigen::Index>(arm_rows.size()), p);
    Eigen::VectorXi response(static_cast<Eigen::Index>(arm_rows.size()));
    for (std::size_t i = 0; i < arm_rows.size(); ++i) {
      design.row(static_cast<Eigen::Index>(i)) =
          data.covariates.row(arm_rows[i]);
      response[static_cast<Eigen::Index>(i)] = data.mediator[arm_rows[i]];
    }
    (d ? out.arm1 : out.arm0) = fit_logistic_post_lasso(design, response);
  }
  return out;
}

// E[Y | D, M, X]: one post-lasso regression of Y on [D, M, DM, X]; the four
// (d, m) cells are evaluated by plugging in the combination.
struct OutcomeModel {
  LinearModel model;

  double mu(int d, int m, const CovariateRow& x) const {
    Eigen::RowVectorXd row(x.size() + 3);
    row[0] = static_cast<double>(d);
    row[1] = static_cast<double>(m);
    row[2] = static_cast<double>(d * m);
    row.tail(x.size()) = x;
    return predict_mean(model, row);
  }
};

inline OutcomeModel fit_outcome_mean(const Dataset& data,
                                     const std::vector<int>& rows) {
  if (rows.empty()) {
    throw Error(ErrorCode::TooFewObservations, "empty training sample");
  }
  const Eigen::Index p = data.p();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), p + 3);
  Eigen::VectorXd response(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int d = data.treatment[rows[i]];
    const int m = data.mediator[rows[i]];
    design(r, 0) = static_cast<double>(d);
    design(r, 1) = static_cast<double>(m);
    design(r, 2) = static_cast<double>(d * m);
    design.row(r).tail(p) = data.covariates.row(rows[i]);
    response[r] = data.outcome[rows[i]];
  }
  OutcomeModel out;
  out.model = fit_post_lasso_linear(design, response);
  return out;
}

// E[Y | D=d, X]: post-lasso regression of Y on X within the D=d subsample.
struct ConditionalMeanModel {
  LinearModel model;
  int arm = 0;

  double value(const CovariateRow& x) const { return predict_mean(model, x); }
};

inline ConditionalMeanModel fit_conditional_mean_d(const Dataset& data,
                                                   const std::vector<int>& rows,
                                                   int d) {
  std::vector<int> arm_rows;
  for (int r : rows) {
    if (data.treatment[r] == d) arm_rows.push_back(r);
  }
  if (arm_rows.size() < 2) {
    throw Error(ErrorCode::EmptyArm,
                "treatment arm " + std::to_string(d) +
                    " has fewer than 2 training observations");
  }
  ConditionalMeanModel out;
  out.arm = d;
  out.model = fit_post_lasso_linear(
      detail::rows_of(data.covariates, arm_rows),
      detail::subset(data.outcome, arm_rows));
  return out;
}

// omega(1-d, x) = E[mu(d, M, X) | D=1-d, X=x]: pseudo-outcomes from a model
// fitted on train_mu are regressed on X within the D=1-d rows of train_nest.
// The two samples must be disjoint.
struct NestedMeanModel {
  LinearModel model;
  int arm = 0;  // the target arm d; the regression ran within D = 1-d

  double value(const CovariateRow& x) const { return predict_mean(model, x); }
};

using OutcomeMeanFn = std::function<double(int d, int m, const CovariateRow&)>;

inline NestedMeanModel fit_nested_mean(const Dataset& data,
                                       const std::vector<int>& train_mu,
                                       const std::vector<int>& train_nest,
                                       int d, const OutcomeMeanFn& mu_fn) {
  std::unordered_set<int> mu_set(train_mu.begin(), train_mu.end());
  for (int r : train_nest) {
    if (mu_set.count(r)) {
      throw Error(ErrorCode::DisjointnessViolated,
                  "row " + std::to_string(r) +
                      " appears in both nested-mean training samples");
    }
  }
  std::vector<int> nest_rows;
  for (int r : train_nest) {
    if (data.treatment[r] == 1 - d) nest_rows.push_back(r);
  }
  if (nest_rows.size() < 2) {
    throw Error(ErrorCode::EmptyArm,
                "arm " + std::to_string(1 - d) +
                    " has fewer than 2 observations in the nested-mean sample");
  }
  Eigen::VectorXd pseudo(static_cast<Eigen::Index>(nest_rows.size()));
  for (std::size_t i = 0; i < nest_rows.size(); ++i) {
    const int r = nest_rows[i];
    pseudo[static_cast<Eigen::Index>(i)] =
        mu_fn(d, data.mediator[r], data.covariates.row(r));
  }
  NestedMeanModel out;
  out.arm = d;
  out.model = fit_post_lasso_linear(detail::rows_of(data.covariates, nest_rows),
                                    pseudo);
  return out;
}

// ---------------------------------------------------------------------------
// Materialized per-observation predictions on an evaluation fold.
// ---------------------------------------------------------------------------

// Which nuisance fields a pipeline needs.
struct NuisanceNeeds {
  bool p_x = false;      // p_d(X)
  bool p_mx = false;     // p_d(M, X)
  bool mediator = false; // f(M | D, X)
  bool mu = false;       // mu(d, m, X), all four cells
  bool mu_dx = false;    // mu(d, X)
  bool omega = false;    // omega(1-d, X)
};

// Held-out predictions for one evaluation fold, aligned with eval_rows.
// Probabilities are clipped; nu is assembled by the binary-mediator sum.
struct NuisanceSet {
  std::vector<int> eval_rows;
  Eigen::VectorXd p1x;    // Pr(D=1 | X)
  Eigen::VectorXd p1mx;   // Pr(D=1 | M_i, X_i), evaluated at the observed M
  Eigen::MatrixXd f1dx;   // col d: Pr(M=1 | D=d, X)
  Eigen::MatrixXd mu;     // col 2d+m: mu(d, m, X)
  Eigen::MatrixXd mu_dx;  // col d: mu(d, X)
  Eigen::MatrixXd nu;     // col d: nu(1-d, X)
  Eigen::MatrixXd omega;  // col d: omega(1-d, X)

  Eigen::Index size() const { return static_cast<Eigen::Index>(eval_rows.size()); }

  double p_dx(int d, Eigen::Index i) const { return d ? p1x[i] : 1.0 - p1x[i]; }
  double p_dmx(int d, Eigen::Index i) const { return d ? p1mx[i] : 1.0 - p1mx[i]; }
  double f(int m, int d, Eigen::Index i) const {
    return m ? f1dx(i, d) : 1.0 - f1dx(i, d);
  }
  double mu_dm(int d, int m, Eigen::Index i) const { return mu(i, 2 * d + m); }
  double mu_d(int d, Eigen::Index i) const { return mu_dx(i, d); }
  double nu_d(int d, Eigen::Index i) const { return nu(i, d); }
  double omega_d(int d, Eigen::Index i) const { return omega(i, d); }
};

inline NuisanceSet materialize(const Dataset& data,
                               std::vector<int> eval_rows,
                               const NuisanceFns& fns,
                               const NuisanceNeeds& needs) {
  NuisanceSet set;
  set.eval_rows = std::move(eval_rows);
  const auto n = static_cast<Eigen::Index>(set.eval_rows.size());
  if (needs.p_x) set.p1x.resize(n);
  if (needs.p_mx) set.p1mx.resize(n);
  if (needs.mediator) set.f1dx.resize(n, 2);
  if (needs.mu) set.mu.resize(n, 4);
  if (needs.mu_dx) set.mu_dx.resize(n, 2);
  if (needs.mu && needs.mediator) set.nu.resize(n, 2);
  if (needs.omega) set.omega.resize(n, 2);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int row = set.eval_rows[static_cast<std::size_t>(i)];
    const auto x = data.covariates.row(row);
    if (needs.p_x) set.p1x[i] = clip_probability(fns.treat_prob(x));
    if (needs.p_mx) {
      set.p1mx[i] = clip_probability(fns.treat_prob_mx(data.mediator[row], x));
    }
    if (needs.mediator) {
      set.f1dx(i, 0) = clip_probability(fns.mediator_prob(0, x));
      set.f1dx(i, 1) = clip_probability(fns.mediator_prob(1, x));
    }
    if (needs.mu) {
      for (int d = 0; d < 2; ++d) {
        for (int m = 0; m < 2; ++m) {
          set.mu(i, 2 * d + m) = fns.outcome_mean(d, m, x);
        }
      }
    }
    if (needs.mu_dx) {
      set.mu_dx(i, 0) = fns.outcome_mean_dx(0, x);
      set.mu_dx(i, 1) = fns.outcome_mean_dx(1, x);
    }
    if (needs.mu && needs.mediator) {
      for (int d = 0; d < 2; ++d) {
        const double f1 = set.f1dx(i, 1 - d);
        set.nu(i, d) = set.mu(i, 2 * d + 1) * f1 +
                       set.mu(i, 2 * d + 0) * (1.0 - f1);
      }
    }
    if (needs.omega) {
      set.omega(i, 0) = fns.nested_mean(0, x);
      set.omega(i, 1) = fns.nested_mean(1, x);
    }
  }
  return set;
}

}  // namespace medml
