#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "medml/common.hpp"
#include "medml/data.hpp"
#include "medml/nuisance.hpp"

namespace medml {

enum class ScoreTarget {
  PsiD,      // efficient score for E[Y(d, M(1-d))], mediator-density form
  PsiStarD,  // Bayes-transformed score for E[Y(d, M(1-d))]
  AlphaD,    // doubly robust score for E[Y(d, M(d))]
  PsiDM,     // doubly robust score for E[Y(d, m)]
};

inline std::string score_target_name(ScoreTarget t, int d, int m = -1) {
  switch (t) {
    case ScoreTarget::PsiD: return "Psi" + std::to_string(d);
    case ScoreTarget::PsiStarD: return "PsiStar" + std::to_string(d);
    case ScoreTarget::AlphaD: return "Lambda" + std::to_string(d);
    case ScoreTarget::PsiDM:
      return "Psi" + std::to_string(d) + std::to_string(m);
  }
  return "?";
}

// Per-observation score values plus trim flags for one counterfactual target.
// Values are stored for every observation; flags depend only on nuisance
// probabilities and the threshold, never on Y.
struct ScoreVector {
  ScoreTarget target = ScoreTarget::PsiD;
  int d = 1;
  int m = -1;  // only meaningful for PsiDM
  double threshold = 0.05;
  Eigen::VectorXd values;
  std::vector<char> trimmed;

  Eigen::Index n() const { return values.size(); }
  int retained_count() const {
    int count = 0;
    for (char t : trimmed) count += t == 0;
    return count;
  }
  double retained_mean() const {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (!trimmed[static_cast<std::size_t>(i)]) {
        sum += values[i];
        ++count;
      }
    }
    if (count == 0) {
      throw Error(ErrorCode::EmptyRetainedSet, "all observations trimmed");
    }
    return sum / static_cast<double>(count);
  }
};

// --- per-observation score evaluations -------------------------------------

// Efficient score for E[Y(d, M(1-d))] (mediator-density form). The integral
// over the mediator enters through nu, already reduced to the binary sum.
inline double score_psi(double y, int obs_d, int d, double p_dx, double f_m_d,
                        double f_m_1md, double mu_d_m, double nu_1md) {
  double value = nu_1md;
  if (obs_d == d) {
    value += f_m_1md / (p_dx * f_m_d) * (y - mu_d_m);
  } else {
    value += (mu_d_m - nu_1md) / (1.0 - p_dx);
  }
  return value;
}

// Bayes-transformed score for E[Y(d, M(1-d))], mediator densities replaced by
// the mediator-augmented propensity and a nested outcome mean.
inline double score_psi_star(double y, int obs_d, int d, double p_dx,
                             double p_dmx, double mu_d_m, double omega_1md) {
  double value = omega_1md;
  if (obs_d == d) {
    value += (1.0 - p_dmx) / (p_dmx * (1.0 - p_dx)) * (y - mu_d_m);
  } else {
    value += (mu_d_m - omega_1md) / (1.0 - p_dx);
  }
  return value;
}

// Doubly robust ATE score for E[Y(d, M(d))].
inline double score_alpha(double y, int obs_d, int d, double p_dx,
                          double mu_d) {
  double value = mu_d;
  if (obs_d == d) {
    value += (y - mu_d) / p_dx;
  }
  return value;
}

// Controlled-direct-effect score for E[Y(d, m)]; the joint cell probability
// factorizes as f(m|d,X) * p_d(X).
inline double score_psi_dm(double y, int obs_d, int obs_m, int d, int m,
                           double p_dx, double f_m_d, double mu_d_m) {
  double value = mu_d_m;
  if (obs_d == d && obs_m == m) {
    value += (y - mu_d_m) / (f_m_d * p_dx);
  }
  return value;
}

// Trimming indicator: flags an observation whenever any denominator quantity
// of the given target falls below the threshold. Depends only on nuisance
// probabilities, never on Y.
inline bool trim_flag(ScoreTarget target, int d, int m, double p_dx,
                      double f_m_d, double p_dmx, double threshold) {
  switch (target) {
    case ScoreTarget::PsiD:
      return std::min(p_dx * f_m_d, 1.0 - p_dx) < threshold;
    case ScoreTarget::PsiStarD:
      return std::min(p_dmx * (1.0 - p_dx), 1.0 - p_dx) < threshold;
    case ScoreTarget::AlphaD:
      return p_dx < threshold;
    case ScoreTarget::PsiDM:
      return f_m_d * p_dx < threshold;
  }
  return false;
}

// --- fold-level evaluation over a materialized nuisance set ----------------
// Each writer fills the global positions of the evaluation rows inside `out`.

inline void evaluate_psi_into(const Dataset& data, const NuisanceSet& nu_set,
                              int d, double threshold, ScoreVector& out) {
  for (Eigen::Index i = 0; i < nu_set.size(); ++i) {
    const int row = nu_set.eval_rows[static_cast<std::size_t>(i)];
    const int obs_d = data.treatment[row];
    const int obs_m = data.mediator[row];
    const double p_dx = nu_set.p_dx(d, i);
    const double f_m_d = nu_set.f(obs_m, d, i);
    const double f_m_1md = nu_set.f(obs_m, 1 - d, i);
    out.values[row] = score_psi(data.outcome[row], obs_d, d, p_dx, f_m_d,
                                f_m_1md, nu_set.mu_dm(d, obs_m, i),
                                nu_set.nu_d(d, i));
    out.trimmed[static_cast<std::size_t>(row)] =
        trim_flag(ScoreTarget::PsiD, d, -1, p_dx, f_m_d, 0.0, threshold);
  }
}

inline void evaluate_psi_star_into(const Dataset& data,
                                   const NuisanceSet& nu_set, int d,
                                   double threshold, ScoreVector& out) {
  for (Eigen::Index i = 0; i < nu_set.size(); ++i) {
    const int row = nu_set.eval_rows[static_cast<std::size_t>(i)];
    const int obs_d = data.treatment[row];
    const int obs_m = data.mediator[row];
    const double p_dx = nu_set.p_dx(d, i);
    const double p_dmx = nu_set.p_dmx(d, i);
    out.values[row] = score_psi_star(data.outcome[row], obs_d, d, p_dx, p_dmx,
                                     nu_set.mu_dm(d, obs_m, i),
                                     nu_set.omega_d(d, i));
    out.trimmed[static_cast<std::size_t>(row)] =
        trim_flag(ScoreTarget::PsiStarD, d, -1, p_dx, 0.0, p_dmx, threshold);
  }
}

inline void evaluate_alpha_into(const Dataset& data,
                                const NuisanceSet& nu_set, int d,
                                double threshold, ScoreVector& out) {
  for (Eigen::Index i = 0; i < nu_set.size(); ++i) {
    const int row = nu_set.eval_rows[static_cast<std::size_t>(i)];
    const double p_dx = nu_set.p_dx(d, i);
    out.values[row] = score_alpha(data.outcome[row], data.treatment[row], d,
                                  p_dx, nu_set.mu_d(d, i));
    out.trimmed[static_cast<std::size_t>(row)] =
        trim_flag(ScoreTarget::AlphaD, d, -1, p_dx, 0.0, 0.0, threshold);
  }
}

inline void evaluate_psi_dm_into(const Dataset& data,
                                 const NuisanceSet& nu_set, int d, int m,
                                 double threshold, ScoreVector& out) {
  for (Eigen::Index i = 0; i < nu_set.size(); ++i) {
    const int row = nu_set.eval_rows[static_cast<std::size_t>(i)];
    const double p_dx = nu_set.p_dx(d, i);
    const double f_m_d = nu_set.f(m, d, i);
    out.values[row] =
        score_psi_dm(data.outcome[row], data.treatment[row],
                     data.mediator[row], d, m, p_dx, f_m_d,
                     nu_set.mu_dm(d, m, i));
    out.trimmed[static_cast<std::size_t>(row)] =
        trim_flag(ScoreTarget::PsiDM, d, m, p_dx, f_m_d, 0.0, threshold);
  }
}

}  // namespace medml
