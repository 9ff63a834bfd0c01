#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "medml/crossfit.hpp"
#include "medml/data.hpp"
#include "medml/dgp.hpp"
#include "medml/effects.hpp"
#include "medml/math.hpp"
#include "medml/montecarlo.hpp"
#include "medml/scores.hpp"

namespace medml {
namespace checks {

// Nuisance bundle over an oracle sample, expressed per observation so that
// perturbation directions and deliberate misspecifications compose freely.
struct EtaFns {
  std::function<double(long)> p1;                 // Pr(D=1 | X_i)
  std::function<double(int, long)> f1;            // Pr(M=1 | d, X_i)
  std::function<double(int, int, long)> mu;       // E[Y | d, m, X_i]
  std::function<double(int, long)> p1mx;          // Pr(D=1 | M=m, X_i)
  std::function<double(int, long)> omega;         // omega(1-d, X_i), by target arm d
  std::function<double(int, long)> mu_dx;         // E[Y | d, X_i]
};

inline EtaFns oracle_eta(const OracleSample& sample) {
  const Eigen::VectorXd& s = sample.index;
  EtaFns eta;
  eta.p1 = [&s](long i) { return OracleNuisance::treat_prob(s[i]); };
  eta.f1 = [&s](int d, long i) { return OracleNuisance::mediator_prob(d, s[i]); };
  eta.mu = [&s](int d, int m, long i) {
    return OracleNuisance::outcome_mean(d, m, s[i]);
  };
  eta.p1mx = [&s](int m, long i) {
    return OracleNuisance::treat_prob_mx(1, m, s[i]);
  };
  eta.omega = [&s](int d, long i) { return OracleNuisance::nested_mean(d, s[i]); };
  eta.mu_dx = [&s](int d, long i) {
    return OracleNuisance::outcome_mean_dx(d, s[i]);
  };
  return eta;
}

enum class ScoreKind { Psi, PsiStar, Alpha, PsiDm, PlugInControl };

inline const char* score_kind_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::Psi: return "psi";
    case ScoreKind::PsiStar: return "psi_star";
    case ScoreKind::Alpha: return "alpha";
    case ScoreKind::PsiDm: return "psi_dm";
    case ScoreKind::PlugInControl: return "plugin_control";
  }
  return "?";
}

// Mean and standard deviation of a score evaluated with the supplied
// nuisances. nu is always assembled from mu and f1, mirroring the estimator.
// PlugInControl is the deliberately non-orthogonal g-formula plug-in used as
// the power check for the orthogonality suite.
struct ScoreMoments {
  double mean = 0.0;
  double sd = 0.0;
};

inline ScoreMoments score_moments(ScoreKind kind, int d, int m,
                                  const OracleSample& sample,
                                  const EtaFns& eta) {
  const long n = sample.n();
  double sum = 0.0, ssq = 0.0;
  for (long i = 0; i < n; ++i) {
    const int obs_d = sample.treatment[i];
    const int obs_m = sample.mediator[i];
    const double y = sample.outcome[i];
    const double p1 = clip_probability(eta.p1(i));
    const double p_dx = d == 1 ? p1 : 1.0 - p1;
    double value = 0.0;
    switch (kind) {
      case ScoreKind::Psi: {
        const double f1_d = clip_probability(eta.f1(d, i));
        const double f1_md = clip_probability(eta.f1(1 - d, i));
        const double f_m_d = obs_m ? f1_d : 1.0 - f1_d;
        const double f_m_1md = obs_m ? f1_md : 1.0 - f1_md;
        const double nu = eta.mu(d, 1, i) * f1_md +
                          eta.mu(d, 0, i) * (1.0 - f1_md);
        value = score_psi(y, obs_d, d, p_dx, f_m_d, f_m_1md,
                          eta.mu(d, obs_m, i), nu);
        break;
      }
      case ScoreKind::PsiStar: {
        const double p1mx = clip_probability(eta.p1mx(obs_m, i));
        const double p_dmx = d == 1 ? p1mx : 1.0 - p1mx;
        value = score_psi_star(y, obs_d, d, p_dx, p_dmx, eta.mu(d, obs_m, i),
                               eta.omega(d, i));
        break;
      }
      case ScoreKind::Alpha:
        value = score_alpha(y, obs_d, d, p_dx, eta.mu_dx(d, i));
        break;
      case ScoreKind::PsiDm: {
        const double f1_d = clip_probability(eta.f1(d, i));
        const double f_m_d = m ? f1_d : 1.0 - f1_d;
        value = score_psi_dm(y, obs_d, obs_m, d, m, p_dx, f_m_d,
                             eta.mu(d, m, i));
        break;
      }
      case ScoreKind::PlugInControl: {
        const double f1_md = clip_probability(eta.f1(1 - d, i));
        value = eta.mu(d, 1, i) * f1_md + eta.mu(d, 0, i) * (1.0 - f1_md);
        break;
      }
    }
    sum += value;
    ssq += value * value;
  }
  ScoreMoments out;
  out.mean = sum / static_cast<double>(n);
  out.sd = std::sqrt(std::max(0.0, ssq / static_cast<double>(n) -
                                       out.mean * out.mean));
  return out;
}

// Same-sample potential-outcome mean of the target the score identifies.
inline double potential_truth(ScoreKind kind, int d, int m,
                              const OracleSample& sample) {
  const long n = sample.n();
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    int pot_m;
    switch (kind) {
      case ScoreKind::Psi:
      case ScoreKind::PsiStar:
      case ScoreKind::PlugInControl:
        pot_m = d == 1 ? sample.m0[i] : sample.m1[i];
        break;
      case ScoreKind::Alpha:
        pot_m = d == 1 ? sample.m1[i] : sample.m0[i];
        break;
      case ScoreKind::PsiDm:
        pot_m = m;
        break;
    }
    sum += structural_outcome(d, pot_m, sample.index[i], sample.noise_u[i]);
  }
  return sum / static_cast<double>(n);
}

// --- perturbation directions -----------------------------------------------

// A direction is a bounded per-observation delta added to one nuisance along
// eta_0 + r * delta. Probability deltas use 0.8 * p(1-p) so the whole segment
// r in [-1, 1] stays inside the unit interval; tilts modulate by tanh(x1).
struct Direction {
  std::string name;
  std::function<EtaFns(const EtaFns&, double r)> apply;
};

namespace detail {

enum class Slot { Mu, F, P, Pmx, Omega, MuDx };

inline Direction make_direction(const OracleSample& sample, Slot slot,
                                bool tilt) {
  const Eigen::VectorXd* x1 = &sample.x1;
  auto weight = [x1, tilt](long i) {
    return tilt ? std::tanh((*x1)[i]) : 1.0;
  };
  std::string name;
  switch (slot) {
    case Slot::Mu: name = "mu"; break;
    case Slot::F: name = "f"; break;
    case Slot::P: name = "p_x"; break;
    case Slot::Pmx: name = "p_mx"; break;
    case Slot::Omega: name = "omega"; break;
    case Slot::MuDx: name = "mu_dx"; break;
  }
  name += tilt ? "_tilt" : "_shift";

  Direction dir;
  dir.name = name;
  dir.apply = [slot, weight](const EtaFns& base, double r) {
    EtaFns eta = base;
    switch (slot) {
      case Slot::Mu:
        eta.mu = [base, weight, r](int d, int m, long i) {
          return base.mu(d, m, i) + r * 0.5 * weight(i);
        };
        break;
      case Slot::MuDx:
        eta.mu_dx = [base, weight, r](int d, long i) {
          return base.mu_dx(d, i) + r * 0.5 * weight(i);
        };
        break;
      case Slot::Omega:
        eta.omega = [base, weight, r](int d, long i) {
          return base.omega(d, i) + r * 0.5 * weight(i);
        };
        break;
      case Slot::F:
        eta.f1 = [base, weight, r](int d, long i) {
          const double f = base.f1(d, i);
          return f + r * 0.8 * f * (1.0 - f) * weight(i);
        };
        break;
      case Slot::P:
        eta.p1 = [base, weight, r](long i) {
          const double p = base.p1(i);
          return p + r * 0.8 * p * (1.0 - p) * weight(i);
        };
        break;
      case Slot::Pmx:
        eta.p1mx = [base, weight, r](int m, long i) {
          const double p = base.p1mx(m, i);
          return p + r * 0.8 * p * (1.0 - p) * weight(i);
        };
        break;
    }
    return eta;
  };
  return dir;
}

}  // namespace detail

inline std::vector<Direction> directions_for(ScoreKind kind,
                                             const OracleSample& sample) {
  using detail::Slot;
  std::vector<Slot> slots;
  switch (kind) {
    case ScoreKind::Psi:
      slots = {Slot::Mu, Slot::F, Slot::P};
      break;
    case ScoreKind::PsiStar:
      slots = {Slot::Mu, Slot::Omega, Slot::Pmx, Slot::P};
      break;
    case ScoreKind::Alpha:
      slots = {Slot::MuDx, Slot::P};
      break;
    case ScoreKind::PsiDm:
      slots = {Slot::Mu, Slot::F, Slot::P};
      break;
    case ScoreKind::PlugInControl:
      slots = {Slot::Mu};
      break;
  }
  std::vector<Direction> dirs;
  for (Slot slot : slots) {
    dirs.push_back(detail::make_direction(sample, slot, false));
    dirs.push_back(detail::make_direction(sample, slot, true));
  }
  return dirs;
}

// Central finite difference of the mean score along one nuisance direction.
inline double orthogonality_derivative(ScoreKind kind, int d, int m,
                                       const OracleSample& sample,
                                       const EtaFns& eta,
                                       const Direction& direction,
                                       double step = 1e-3) {
  const double up =
      score_moments(kind, d, m, sample, direction.apply(eta, step)).mean;
  const double down =
      score_moments(kind, d, m, sample, direction.apply(eta, -step)).mean;
  return (up - down) / (2.0 * step);
}

// --- deliberate misspecifications for the robustness grid -------------------

enum class Corruption { Mu, F, P, Pmx, Omega, MuDx };

inline const char* corruption_name(Corruption c) {
  switch (c) {
    case Corruption::Mu: return "mu";
    case Corruption::F: return "f";
    case Corruption::P: return "p_x";
    case Corruption::Pmx: return "p_mx";
    case Corruption::Omega: return "omega";
    case Corruption::MuDx: return "mu_dx";
  }
  return "?";
}

// Fixed wrong functions: outcome means are shifted by 0.8, probabilities are
// evaluated at an index shifted by 0.7.
inline EtaFns corrupt(const EtaFns& base, const OracleSample& sample,
                      Corruption what) {
  const Eigen::VectorXd* s = &sample.index;
  EtaFns eta = base;
  switch (what) {
    case Corruption::Mu:
      eta.mu = [base](int d, int m, long i) { return base.mu(d, m, i) + 0.8; };
      break;
    case Corruption::MuDx:
      eta.mu_dx = [base](int d, long i) { return base.mu_dx(d, i) + 0.8; };
      break;
    case Corruption::Omega:
      eta.omega = [base](int d, long i) { return base.omega(d, i) + 0.8; };
      break;
    case Corruption::F:
      eta.f1 = [s](int d, long i) {
        return OracleNuisance::mediator_prob(d, (*s)[i] + 0.7);
      };
      break;
    case Corruption::P:
      eta.p1 = [s](long i) {
        return OracleNuisance::treat_prob((*s)[i] + 0.7);
      };
      break;
    case Corruption::Pmx:
      eta.p1mx = [s](int m, long i) {
        return OracleNuisance::treat_prob_mx(1, m, (*s)[i] + 0.7);
      };
      break;
  }
  return eta;
}

inline std::vector<Corruption> single_corruptions(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Psi:
    case ScoreKind::PsiDm:
      return {Corruption::Mu, Corruption::F, Corruption::P};
    case ScoreKind::PsiStar:
      return {Corruption::Mu, Corruption::Omega, Corruption::Pmx,
              Corruption::P};
    case ScoreKind::Alpha:
      return {Corruption::MuDx, Corruption::P};
    case ScoreKind::PlugInControl:
      return {};
  }
  return {};
}

inline std::pair<Corruption, Corruption> double_corruption(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Psi:
    case ScoreKind::PsiDm:
      return {Corruption::Mu, Corruption::F};
    case ScoreKind::PsiStar:
      return {Corruption::Mu, Corruption::Pmx};
    default:
      return {Corruption::MuDx, Corruption::P};
  }
}

// --- report ------------------------------------------------------------------

struct CheckItem {
  std::string suite;
  std::string name;
  double statistic = 0.0;
  double bound = 0.0;
  bool expect_within = true;  // false: power checks that must exceed the bound
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckItem> items;

  bool all_pass() const {
    for (const auto& item : items) {
      if (!item.pass) return false;
    }
    return true;
  }
};

struct VerifyOptions {
  long n_mc = 100000;
  double coef_scale = 0.3;
  std::uint64_t seed = 90210;
  double fd_step = 1e-3;
  double orthogonality_bound = 0.02;
  bool inject_nonorthogonal = false;  // treat the control score as orthogonal
};

inline VerifyReport run_verify_suites(const VerifyOptions& opt) {
  VerifyReport report;
  const OracleSample sample =
      draw_oracle_sample(opt.coef_scale, opt.n_mc, opt.seed);
  const EtaFns eta = oracle_eta(sample);
  const double root_n = std::sqrt(static_cast<double>(opt.n_mc));

  struct TargetSpec {
    ScoreKind kind;
    int d;
    int m;
  };
  const std::vector<TargetSpec> targets = {
      {ScoreKind::Psi, 1, -1},   {ScoreKind::Psi, 0, -1},
      {ScoreKind::PsiStar, 1, -1}, {ScoreKind::PsiStar, 0, -1},
      {ScoreKind::Alpha, 1, -1}, {ScoreKind::Alpha, 0, -1},
      {ScoreKind::PsiDm, 1, 1},  {ScoreKind::PsiDm, 1, 0},
      {ScoreKind::PsiDm, 0, 1},  {ScoreKind::PsiDm, 0, 0}};

  auto target_label = [](const TargetSpec& t) {
    std::string label = std::string(score_kind_name(t.kind)) +
                        "(d=" + std::to_string(t.d);
    if (t.m >= 0) label += ",m=" + std::to_string(t.m);
    return label + ")";
  };

  // (a) moment condition at the true nuisances
  for (const auto& t : targets) {
    const ScoreMoments moments = score_moments(t.kind, t.d, t.m, sample, eta);
    const double truth = potential_truth(t.kind, t.d, t.m, sample);
    CheckItem item;
    item.suite = "moment";
    item.name = target_label(t);
    item.statistic = std::fabs(moments.mean - truth);
    item.bound = 3.0 * moments.sd / root_n;
    item.pass = item.statistic <= item.bound;
    report.items.push_back(item);
  }

  // (b) Neyman orthogonality by central finite differences, plus the
  // non-orthogonal plug-in control that must show a derivative near 0.5
  for (const auto& t : targets) {
    for (const auto& dir : directions_for(t.kind, sample)) {
      CheckItem item;
      item.suite = "orthogonality";
      item.name = target_label(t) + " / " + dir.name;
      item.statistic = std::fabs(orthogonality_derivative(
          t.kind, t.d, t.m, sample, eta, dir, opt.fd_step));
      item.bound = opt.orthogonality_bound;
      item.pass = item.statistic <= item.bound;
      report.items.push_back(item);
    }
  }
  {
    const Direction dir = directions_for(ScoreKind::PlugInControl, sample)[0];
    const double derivative = orthogonality_derivative(
        ScoreKind::PlugInControl, 1, -1, sample, eta, dir, opt.fd_step);
    CheckItem item;
    item.suite = "orthogonality";
    item.name = "plugin_control(d=1) / mu_shift (power check)";
    item.statistic = std::fabs(derivative);
    if (opt.inject_nonorthogonal) {
      // Hidden failure mode: pretend the control score were orthogonal.
      item.bound = opt.orthogonality_bound;
      item.pass = item.statistic <= item.bound;
    } else {
      item.expect_within = false;
      item.bound = 0.25;
      item.pass = item.statistic > item.bound &&
                  std::fabs(item.statistic - 0.5) < 0.1;
    }
    report.items.push_back(item);
  }

  // (c) multiple robustness: every admissible single misspecification keeps
  // the mean on target; the designated double corruption must break it
  for (const auto& t : targets) {
    const double truth = potential_truth(t.kind, t.d, t.m, sample);
    for (Corruption c : single_corruptions(t.kind)) {
      const EtaFns bad = corrupt(eta, sample, c);
      const ScoreMoments moments = score_moments(t.kind, t.d, t.m, sample, bad);
      CheckItem item;
      item.suite = "robustness";
      item.name = target_label(t) + " / wrong " + corruption_name(c);
      item.statistic = std::fabs(moments.mean - truth);
      item.bound = 3.0 * moments.sd / root_n;
      item.pass = item.statistic <= item.bound;
      report.items.push_back(item);
    }
    {
      const auto [c1, c2] = double_corruption(t.kind);
      const EtaFns bad = corrupt(corrupt(eta, sample, c1), sample, c2);
      const ScoreMoments moments = score_moments(t.kind, t.d, t.m, sample, bad);
      CheckItem item;
      item.suite = "robustness";
      item.name = target_label(t) + " / wrong " + corruption_name(c1) + "+" +
                  corruption_name(c2) + " (power check)";
      item.statistic = std::fabs(moments.mean - truth);
      item.bound = 3.0 * moments.sd / root_n;
      item.expect_within = false;
      item.pass = item.statistic > item.bound;
      report.items.push_back(item);
    }
  }

  // (d) Bayes identity between the two weighting representations, and the
  // observation-wise equality of the two scores at the oracle
  {
    double max_weight_gap = 0.0;
    double max_score_gap = 0.0;
    for (long i = 0; i < sample.n(); ++i) {
      const int obs_m = sample.mediator[i];
      const double s = sample.index[i];
      for (int d = 0; d < 2; ++d) {
        const double p_dx = d == 1 ? OracleNuisance::treat_prob(s)
                                   : 1.0 - OracleNuisance::treat_prob(s);
        const double f_m_d = OracleNuisance::mediator_density(obs_m, d, s);
        const double f_m_1md =
            OracleNuisance::mediator_density(obs_m, 1 - d, s);
        const double p_dmx = OracleNuisance::treat_prob_mx(d, obs_m, s);
        const double w1 = f_m_1md / (p_dx * f_m_d);
        const double w2 = (1.0 - p_dmx) / (p_dmx * (1.0 - p_dx));
        max_weight_gap = std::max(max_weight_gap, std::fabs(w1 - w2));

        const double mu_dm =
            OracleNuisance::outcome_mean(d, obs_m, s);
        const double nested = OracleNuisance::nested_mean(d, s);
        const double psi =
            score_psi(sample.outcome[i], sample.treatment[i], d, p_dx, f_m_d,
                      f_m_1md, mu_dm, nested);
        const double psi_star =
            score_psi_star(sample.outcome[i], sample.treatment[i], d, p_dx,
                           p_dmx, mu_dm, nested);
        max_score_gap = std::max(max_score_gap, std::fabs(psi - psi_star));
      }
    }
    CheckItem weights;
    weights.suite = "bayes";
    weights.name = "weight identity, max per-observation gap";
    weights.statistic = max_weight_gap;
    weights.bound = 1e-10;
    weights.pass = max_weight_gap <= 1e-10;
    report.items.push_back(weights);

    CheckItem scores_item;
    scores_item.suite = "bayes";
    scores_item.name = "psi vs psi_star at the oracle, max gap";
    scores_item.statistic = max_score_gap;
    scores_item.bound = 1e-10;
    scores_item.pass = max_score_gap <= 1e-10;
    report.items.push_back(scores_item);
  }

  // (e) decomposition identities on an estimated pipeline
  {
    SimulationDesign design;
    design.n = 1500;
    design.p = 60;
    design.coef_scale = opt.coef_scale;
    design.replications = 1;
    design.base_seed = derive_seed(opt.seed, 0xE);
    const ReplicationResult run = run_replication(design, design.base_seed);
    for (const auto& [label, rep] :
         {std::pair<const char*, const EffectReport*>{"theorem1",
                                                      &run.theorem1},
          std::pair<const char*, const EffectReport*>{"theorem2",
                                                      &run.theorem2}}) {
      CheckItem item;
      item.suite = "decomposition";
      item.name = std::string(label) + ": theta1+delta0 and theta0+delta1 vs delta";
      item.statistic = std::max(
          std::fabs(rep->theta1.estimate + rep->delta0.estimate -
                    rep->delta.estimate),
          std::fabs(rep->theta0.estimate + rep->delta1.estimate -
                    rep->delta.estimate));
      item.bound = 1e-12;
      item.pass = item.statistic <= item.bound;
      report.items.push_back(item);
    }
  }

  return report;
}

}  // namespace checks
}  // namespace medml
