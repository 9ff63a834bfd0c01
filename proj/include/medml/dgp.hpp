#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "medml/common.hpp"
#include "medml/data.hpp"
#include "medml/math.hpp"
#include "medml/rng.hpp"

namespace medml {

enum class SigmaKind { Toeplitz, Identity };

// Simulation design: covariate dimension, confounding strength beta_i =
// coef_scale / i^2, covariance kind, replication controls.
struct SimulationDesign {
  int n = 1000;
  int p = 200;
  double coef_scale = 0.3;
  SigmaKind sigma = SigmaKind::Toeplitz;
  int replications = 250;
  int K = 3;
  double threshold = 0.05;
  std::uint64_t base_seed = 20240501;

  void validate() const {
    if (!(coef_scale > 0.0) || p < 1 || replications < 1 || n < 2 * K ||
        K < 2 || !(threshold > 0.0 && threshold < 0.5)) {
      throw Error(ErrorCode::InvalidConfig, "invalid simulation design");
    }
  }
};

inline Eigen::VectorXd make_beta(double scale, int p) {
  Eigen::VectorXd beta(p);
  for (int i = 0; i < p; ++i) {
    const double rank = static_cast<double>(i + 1);
    beta[i] = scale / (rank * rank);
  }
  return beta;
}

inline Eigen::MatrixXd make_sigma(SigmaKind kind, int p) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);
  if (kind == SigmaKind::Toeplitz) {
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        sigma(i, j) = std::pow(0.5, std::abs(i - j));
      }
    }
  }
  return sigma;
}

// sqrt(beta' Sigma beta): the standard deviation of the confounding index.
inline double index_sd(double scale, int p, SigmaKind kind) {
  const Eigen::VectorXd beta = make_beta(scale, p);
  if (kind == SigmaKind::Identity) return beta.norm();
  double total = 0.0;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      total += beta[i] * beta[j] * std::pow(0.5, std::abs(i - j));
    }
  }
  return std::sqrt(total);
}

// Structural equations. The published table of true effects and the stated
// large-sample R^2 of the outcome regression both pin the mediator's outcome
// coefficient at 1, so the outcome equation is
//   Y = 0.5 D + M + 0.5 D M + X'beta + U.
inline double structural_outcome(int d, int m, double index, double u) {
  return 0.5 * d + static_cast<double>(m) + 0.5 * d * m + index + u;
}

inline Dataset generate_dgp(const SimulationDesign& design,
                            std::uint64_t seed) {
  design.validate();
  const int n = design.n;
  const int p = design.p;
  Rng rng(seed);

  Eigen::MatrixXd X(n, p);
  if (design.sigma == SigmaKind::Toeplitz) {
    Eigen::MatrixXd Z(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
    }
    const Eigen::MatrixXd L =
        Eigen::LLT<Eigen::MatrixXd>(make_sigma(design.sigma, p)).matrixL();
    X.noalias() = Z * L.transpose();
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    }
  }

  const Eigen::VectorXd beta = make_beta(design.coef_scale, p);
  const Eigen::VectorXd index = X * beta;

  Dataset data;
  data.covariates = std::move(X);
  data.outcome.resize(n);
  data.treatment.resize(n);
  data.mediator.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.normal();
    const double v = rng.normal();
    const double w = rng.normal();
    const int d = index[i] + w > 0.0 ? 1 : 0;
    const int m = 0.5 * d + index[i] + v > 0.0 ? 1 : 0;
    data.treatment[i] = d;
    data.mediator[i] = m;
    data.outcome[i] = structural_outcome(d, m, index[i], u);
  }
  return data;
}

struct TrueEffects {
  double delta = 0.0;
  double theta1 = 0.0;
  double theta0 = 0.0;
  double delta1 = 0.0;
  double delta0 = 0.0;
  double mean_y00 = 0.0;
};

// Ground truth by structural Monte Carlo: potential mediators and outcomes
// are drawn directly from the equations and the defining contrasts averaged.
// Only the scalar confounding index X'beta enters any potential variable, so
// it is drawn marginally (exactly N(0, beta' Sigma beta)) instead of
// materializing the full covariate matrix.
inline TrueEffects true_effects_oracle(double coef_scale, long n_mc,
                                       std::uint64_t seed, int p = 200,
                                       SigmaKind kind = SigmaKind::Toeplitz) {
  const double sd = index_sd(coef_scale, p, kind);
  Rng rng(seed);
  double y11 = 0.0, y10 = 0.0, y01 = 0.0, y00 = 0.0;
  for (long i = 0; i < n_mc; ++i) {
    const double s = sd * rng.normal();
    const double u = rng.normal();
    const double v = rng.normal();
    const int m0 = s + v > 0.0 ? 1 : 0;
    const int m1 = 0.5 + s + v > 0.0 ? 1 : 0;
    y11 += structural_outcome(1, m1, s, u);
    y10 += structural_outcome(1, m0, s, u);
    y01 += structural_outcome(0, m1, s, u);
    y00 += structural_outcome(0, m0, s, u);
  }
  const double inv = 1.0 / static_cast<double>(n_mc);
  y11 *= inv;
  y10 *= inv;
  y01 *= inv;
  y00 *= inv;

  TrueEffects truth;
  truth.delta = y11 - y00;
  truth.theta1 = y11 - y01;
  truth.theta0 = y10 - y00;
  truth.delta1 = y11 - y10;
  truth.delta0 = y01 - y00;
  truth.mean_y00 = y00;
  return truth;
}

// Structural draws for oracle-nuisance checks: observed (index, D, M, Y) plus
// the potential mediators, the outcome noise, and the first covariate (drawn
// jointly with the index for tilt-style perturbation directions).
struct OracleSample {
  Eigen::VectorXd index;
  Eigen::VectorXd x1;
  Eigen::VectorXi treatment;
  Eigen::VectorXi mediator;
  Eigen::VectorXd outcome;
  Eigen::VectorXi m0;
  Eigen::VectorXi m1;
  Eigen::VectorXd noise_u;
  double index_sd = 0.0;

  long n() const { return index.size(); }
};

inline OracleSample draw_oracle_sample(double coef_scale, long n,
                                       std::uint64_t seed, int p = 200,
                                       SigmaKind kind = SigmaKind::Toeplitz) {
  OracleSample s;
  s.index_sd = index_sd(coef_scale, p, kind);
  const Eigen::VectorXd beta = make_beta(coef_scale, p);
  const Eigen::MatrixXd sigma = make_sigma(kind, p);
  // Cov(x1, index) = (Sigma beta)_1; x1 has unit variance.
  const double cov_x1 = (sigma * beta)(0);
  const double var_s = s.index_sd * s.index_sd;
  const double resid_sd = std::sqrt(std::max(0.0, 1.0 - cov_x1 * cov_x1 / var_s));

  s.index.resize(n);
  s.x1.resize(n);
  s.treatment.resize(n);
  s.mediator.resize(n);
  s.outcome.resize(n);
  s.m0.resize(n);
  s.m1.resize(n);
  s.noise_u.resize(n);
  Rng rng(seed);
  for (long i = 0; i < n; ++i) {
    const double sv = s.index_sd * rng.normal();
    s.index[i] = sv;
    s.x1[i] = (cov_x1 / var_s) * sv + resid_sd * rng.normal();
    const double u = rng.normal();
    const double v = rng.normal();
    const double w = rng.normal();
    const int d = sv + w > 0.0 ? 1 : 0;
    const int m0 = sv + v > 0.0 ? 1 : 0;
    const int m1 = 0.5 + sv + v > 0.0 ? 1 : 0;
    const int m = d ? m1 : m0;
    s.treatment[i] = d;
    s.m0[i] = m0;
    s.m1[i] = m1;
    s.mediator[i] = m;
    s.noise_u[i] = u;
    s.outcome[i] = structural_outcome(d, m, sv, u);
  }
  return s;
}

// Exact nuisance functions implied by the data generating process, expressed
// in the confounding index s = x'beta.
struct OracleNuisance {
  // Pr(D=1 | X=x)
  static double treat_prob(double s) { return normal_cdf(s); }
  // Pr(M=1 | D=d, X=x)
  static double mediator_prob(int d, double s) {
    return normal_cdf(0.5 * d + s);
  }
  // f(m | d, x)
  static double mediator_density(int m, int d, double s) {
    const double p1 = mediator_prob(d, s);
    return m ? p1 : 1.0 - p1;
  }
  // E[Y | D=d, M=m, X=x]
  static double outcome_mean(int d, int m, double s) {
    return structural_outcome(d, m, s, 0.0);
  }
  // Pr(D=d | M=m, X=x) by Bayes
  static double treat_prob_mx(int d, int m, double s) {
    const double p1 = treat_prob(s);
    const double joint1 = mediator_density(m, 1, s) * p1;
    const double joint0 = mediator_density(m, 0, s) * (1.0 - p1);
    const double p1mx = joint1 / (joint1 + joint0);
    return d ? p1mx : 1.0 - p1mx;
  }
  // nu(1-d, x) = sum_m mu(d,m,x) f(m | 1-d, x); equals omega(1-d, x) at the truth
  static double nested_mean(int d, double s) {
    const double f1 = mediator_prob(1 - d, s);
    return outcome_mean(d, 1, s) * f1 + outcome_mean(d, 0, s) * (1.0 - f1);
  }
  // E[Y | D=d, X=x]
  static double outcome_mean_dx(int d, double s) {
    const double f1 = mediator_prob(d, s);
    return outcome_mean(d, 1, s) * f1 + outcome_mean(d, 0, s) * (1.0 - f1);
  }
};

}  // namespace medml
