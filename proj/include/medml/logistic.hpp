#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "medml/common.hpp"
#include "medml/lasso.hpp"
#include "medml/math.hpp"

namespace medml {

struct LogisticModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  std::vector<int> selected_support;
  double lambda = 0.0;
  bool converged = true;
  bool separation_detected = false;  // refit rejected, penalized fit retained
};

// Plug-in penalty for the logistic case: the Bernoulli bound 0.5 replaces the
// residual noise scale.
inline double plugin_lambda_logistic(int n, int p) {
  return plugin_lambda(n, p, 0.5);
}

inline double predict_proba(const LogisticModel& model,
                            const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != model.coefficients.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "prediction row has length " + std::to_string(x.size()) +
                    ", model expects " +
                    std::to_string(model.coefficients.size()));
  }
  return clip_probability(
      sigmoid(model.intercept + x.dot(model.coefficients.transpose())));
}

namespace detail {

inline double binomial_deviance(const Eigen::VectorXd& eta,
                                const Eigen::VectorXi& y) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // -2 log-likelihood, numerically stable via log1p(exp(-|eta|)).
    const double a = std::fabs(eta[i]);
    const double log1pe = std::log1p(std::exp(-a)) + std::max(eta[i], 0.0);
    dev += 2.0 * (log1pe - (y[i] ? eta[i] : 0.0));
  }
  return dev;
}

// Unpenalized logistic refit by Newton's method with step halving on a
// standardized design (intercept included). Returns false if it failed to
// move the deviance downhill.
inline bool logistic_newton(const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
                            double& intercept, Eigen::VectorXd& beta) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index p = Z.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  if (p > 0) design.rightCols(p) = Z;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  theta[0] = intercept;
  theta.tail(p) = beta;
  Eigen::VectorXd eta = design * theta;
  double dev = binomial_deviance(eta, y);

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
    }
    Eigen::VectorXd grad = design.transpose() *
                           (y.cast<double>() - prob);
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) return false;
    Eigen::VectorXd step = ldlt.solve(grad);

    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd cand = theta + scale * step;
      Eigen::VectorXd cand_eta = design * cand;
      const double cand_dev = binomial_deviance(cand_eta, y);
      if (cand_dev <= dev + 1e-12) {
        const double change = (cand - theta).cwiseAbs().maxCoeff();
        theta = std::move(cand);
        eta = std::move(cand_eta);
        improved = true;
        if (std::fabs(dev - cand_dev) < 1e-10 || change < 1e-10) {
          dev = cand_dev;
          intercept = theta[0];
          beta = theta.tail(p);
          return true;
        }
        dev = cand_dev;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  intercept = theta[0];
  beta = theta.tail(p);
  return true;
}

}  // namespace detail

// Penalized logistic regression by IRLS with an inner coordinate-descent lasso
// on the working response, followed by an unpenalized refit on the selected
// support (post-lasso logit). Outer tolerance 1e-6 on deviance, 100 iterations
// at most. A refit with any standardized coefficient beyond magnitude 30 is
// treated as separation: the penalized fit is kept and flagged.
inline LogisticModel fit_logistic_lasso(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXi& y,
                                        double lambda) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n != y.size() || n < 2) {
    throw Error(ErrorCode::LengthMismatch,
                "design and response must share n >= 2 rows");
  }
  const int ones = y.sum();
  if (ones == 0 || ones == n) {
    throw Error(ErrorCode::OneClassOnly,
                "binary response has a single class in the training sample");
  }

  const auto std_info = detail::Standardizer::fit(X);
  const Eigen::MatrixXd Z = std_info.transform(X);
  const Eigen::Index q = Z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda_over_n = lambda * inv_n;

  const double ybar = static_cast<double>(ones) * inv_n;
  double intercept = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, intercept);
  double deviance = detail::binomial_deviance(eta, y);
  bool converged = false;

  Eigen::VectorXd w(n), z_work(n);
  for (int outer = 0; outer < 100; ++outer) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = std::clamp(sigmoid(eta[i]), 1e-9, 1.0 - 1e-9);
      w[i] = pr * (1.0 - pr);
      z_work[i] = eta[i] + (static_cast<double>(y[i]) - pr) / w[i];
    }
    // Weighted coordinate descent on the working response.
    Eigen::VectorXd residual = z_work - Eigen::VectorXd::Constant(n, intercept) - Z * beta;
    const double sum_w = w.sum();
    for (int sweep = 0; sweep < 1000; ++sweep) {
      double max_change = 0.0;
      {  // intercept (never penalized)
        const double delta = w.dot(residual) / sum_w;
        intercept += delta;
        residual.array() -= delta;
        max_change = std::fabs(delta);
      }
      for (Eigen::Index j = 0; j < q; ++j) {
        const double denom = inv_n * Z.col(j).cwiseProduct(w).dot(Z.col(j));
        if (!(denom > 0.0)) continue;
        const double old = beta[j];
        const double zj =
            inv_n * Z.col(j).cwiseProduct(w).dot(residual) + denom * old;
        const double value = detail::soft_threshold(zj, lambda_over_n) / denom;
        if (value != old) {
          residual.noalias() -= Z.col(j) * (value - old);
          beta[j] = value;
          max_change = std::max(max_change, std::fabs(value - old));
        }
      }
      if (max_change < 1e-7) break;
    }
    eta = Eigen::VectorXd::Constant(n, intercept) + Z * beta;
    const double new_deviance = detail::binomial_deviance(eta, y);
    const double rel = std::fabs(deviance - new_deviance) /
                       (std::fabs(deviance) + 0.1);
    deviance = new_deviance;
    if (rel < 1e-6) {
      converged = true;
      break;
    }
  }

  // Collect support on the standardized scale.
  std::vector<int> support_std;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (beta[j] != 0.0) support_std.push_back(static_cast<int>(j));
  }

  auto build_model = [&](double b0, const Eigen::VectorXd& b_std) {
    LogisticModel model;
    model.lambda = lambda;
    model.converged = converged;
    model.coefficients = Eigen::VectorXd::Zero(p);
    double offset = 0.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      if (b_std[j] != 0.0) {
        const int col = std_info.active_cols[static_cast<std::size_t>(j)];
        model.coefficients[col] = b_std[j] / std_info.scale[col];
        offset += model.coefficients[col] * std_info.mean[col];
        model.selected_support.push_back(col);
      }
    }
    model.intercept = b0 - offset;
    return model;
  };

  // Unpenalized refit on the selected support.
  Eigen::MatrixXd Z_support(n, static_cast<Eigen::Index>(support_std.size()));
  for (std::size_t c = 0; c < support_std.size(); ++c) {
    Z_support.col(static_cast<Eigen::Index>(c)) = Z.col(support_std[c]);
  }
  double refit_intercept = intercept;
  Eigen::VectorXd refit_beta(static_cast<Eigen::Index>(support_std.size()));
  for (std::size_t c = 0; c < support_std.size(); ++c) {
    refit_beta[static_cast<Eigen::Index>(c)] = beta[support_std[c]];
  }
  const bool refit_ok = detail::logistic_newton(Z_support, y, refit_intercept, refit_beta);
  const double refit_max =
      std::max(std::fabs(refit_intercept),
               refit_beta.size() > 0 ? refit_beta.cwiseAbs().maxCoeff() : 0.0);
  if (!refit_ok || refit_max > 30.0) {
    LogisticModel model = build_model(intercept, beta);
    model.separation_detected = true;
    return model;
  }
  Eigen::VectorXd full_beta = Eigen::VectorXd::Zero(q);
  for (std::size_t c = 0; c < support_std.size(); ++c) {
    full_beta[support_std[c]] = refit_beta[static_cast<Eigen::Index>(c)];
  }
  return build_model(refit_intercept, full_beta);
}

// Convenience wrapper: plug-in penalty, then post-lasso logit. As in the
// linear case, the (1/2n)-style working objective takes half the plug-in
// level to reproduce the reference exclusion rule.
inline LogisticModel fit_logistic_post_lasso(const Eigen::MatrixXd& X,
                                             const Eigen::VectorXi& y) {
  return fit_logistic_lasso(
      X, y,
      0.5 * plugin_lambda_logistic(static_cast<int>(X.rows()),
                                   static_cast<int>(std::max<Eigen::Index>(
                                       X.cols(), 1))));
}

}  // namespace medml
