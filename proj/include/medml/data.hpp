#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "medml/common.hpp"
#include "medml/rng.hpp"

namespace medml {

// The observed sample W = (Y, M, D, X). Immutable after validation; shared
// read-only across fold workers.
struct Dataset {
  Eigen::VectorXd outcome;     // Y
  Eigen::VectorXi treatment;   // D, binary
  Eigen::VectorXi mediator;    // M, binary
  Eigen::MatrixXd covariates;  // X, n x p

  Eigen::Index n() const { return outcome.size(); }
  Eigen::Index p() const { return covariates.cols(); }
};

inline Dataset validate_dataset(Dataset raw) {
  const Eigen::Index n = raw.outcome.size();
  if (n < 1) {
    throw Error(ErrorCode::LengthMismatch, "dataset is empty");
  }
  if (raw.treatment.size() != n || raw.mediator.size() != n ||
      raw.covariates.rows() != n) {
    throw Error(ErrorCode::LengthMismatch,
                "outcome, treatment, mediator, and covariate containers must "
                "share length n=" + std::to_string(n));
  }
  int treated = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int d = raw.treatment[i];
    const int m = raw.mediator[i];
    if (d != 0 && d != 1) {
      throw Error(ErrorCode::NonBinaryColumn,
                  "treatment value " + std::to_string(d) + " at row " +
                      std::to_string(i));
    }
    if (m != 0 && m != 1) {
      throw Error(ErrorCode::NonBinaryColumn,
                  "mediator value " + std::to_string(m) + " at row " +
                      std::to_string(i));
    }
    treated += d;
    if (!std::isfinite(raw.outcome[i])) {
      throw Error(ErrorCode::NonFiniteCovariate,
                  "non-finite outcome at row " + std::to_string(i));
    }
  }
  if (treated == 0 || treated == n) {
    throw Error(ErrorCode::EmptyArm,
                treated == 0 ? "no treated observations"
                             : "no control observations");
  }
  if (!raw.covariates.allFinite()) {
    throw Error(ErrorCode::NonFiniteCovariate,
                "covariate matrix contains non-finite entries");
  }
  return raw;
}

// K-fold assignment: a seeded uniform permutation chopped into K contiguous
// blocks, sizes differing by at most one. Deterministic in (n, K, seed).
struct FoldAssignment {
  std::vector<int> fold_of;  // length n, values in {0,...,K-1}
  int K = 0;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(fold_of.size()); }

  // Indices per fold, each ascending.
  std::vector<std::vector<int>> folds() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(K));
    for (int i = 0; i < n(); ++i) {
      out[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])]
          .push_back(i);
    }
    return out;
  }

  // Complement of fold k, ascending.
  std::vector<int> complement(int k) const {
    std::vector<int> out;
    out.reserve(fold_of.size());
    for (int i = 0; i < n(); ++i) {
      if (fold_of[static_cast<std::size_t>(i)] != k) out.push_back(i);
    }
    return out;
  }
};

inline FoldAssignment make_folds(int n, int K, std::uint64_t seed) {
  if (K < 2) {
    throw Error(ErrorCode::InvalidConfig, "fold count K must be at least 2");
  }
  if (n < K) {
    throw Error(ErrorCode::TooFewObservations,
                "n=" + std::to_string(n) + " is below K=" + std::to_string(K));
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  FoldAssignment assignment;
  assignment.fold_of.assign(static_cast<std::size_t>(n), 0);
  assignment.K = K;
  assignment.seed = seed;
  // The first n % K folds take the one-larger size.
  const int base = n / K;
  const int remainder = n % K;
  int pos = 0;
  for (int k = 0; k < K; ++k) {
    const int size = base + (k < remainder ? 1 : 0);
    for (int j = 0; j < size; ++j) {
      assignment.fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = k;
    }
  }
  return assignment;
}

}  // namespace medml
