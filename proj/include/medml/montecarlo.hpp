#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "medml/crossfit.hpp"
#include "medml/data.hpp"
#include "medml/dgp.hpp"
#include "medml/effects.hpp"
#include "medml/rng.hpp"

namespace medml {

inline constexpr std::array<const char*, 5> kEffectNames = {
    "delta", "theta1", "theta0", "delta1", "delta0"};

// abias/sd/rmse of the point estimates against the structural truth, plus the
// same summary for the estimated standard errors against the replication sd.
struct EffectCells {
  double truth = 0.0;
  double abias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  double se_mean = 0.0;
  double se_abias = 0.0;
  double se_sd = 0.0;
  double se_rmse = 0.0;
};

struct EstimatorPanel {
  std::array<EffectCells, 5> effects;
  double mean_trimmed = 0.0;
};

struct MetricsTable {
  SimulationDesign design;
  TrueEffects truth;
  EstimatorPanel theorem1;
  EstimatorPanel theorem2;
  int replications_done = 0;
  int failures = 0;
};

namespace detail {

struct ReplicationDraw {
  std::array<double, 5> estimate{};
  std::array<double, 5> se{};
  double trimmed = 0.0;
  bool ok = false;
};

inline std::array<double, 5> effect_array(const EffectReport& r) {
  return {r.delta.estimate, r.theta1.estimate, r.theta0.estimate,
          r.delta1.estimate, r.delta0.estimate};
}

inline std::array<double, 5> se_array(const EffectReport& r) {
  return {r.delta.se, r.theta1.se, r.theta0.se, r.delta1.se, r.delta0.se};
}

inline EstimatorPanel summarize_panel(
    const std::vector<ReplicationDraw>& draws,
    const std::array<double, 5>& truth) {
  EstimatorPanel panel;
  int used = 0;
  for (const auto& d : draws) used += d.ok ? 1 : 0;
  if (used == 0) return panel;
  const double inv = 1.0 / static_cast<double>(used);

  for (std::size_t e = 0; e < 5; ++e) {
    double mean = 0.0, mean_se = 0.0;
    for (const auto& d : draws) {
      if (!d.ok) continue;
      mean += d.estimate[e];
      mean_se += d.se[e];
    }
    mean *= inv;
    mean_se *= inv;
    double var = 0.0, mse = 0.0, var_se = 0.0;
    for (const auto& d : draws) {
      if (!d.ok) continue;
      var += (d.estimate[e] - mean) * (d.estimate[e] - mean);
      mse += (d.estimate[e] - truth[e]) * (d.estimate[e] - truth[e]);
      var_se += (d.se[e] - mean_se) * (d.se[e] - mean_se);
    }
    var *= inv;
    mse *= inv;
    var_se *= inv;

    EffectCells& cells = panel.effects[e];
    cells.truth = truth[e];
    cells.abias = std::fabs(mean - truth[e]);
    cells.sd = std::sqrt(var);
    cells.rmse = std::sqrt(mse);
    cells.se_mean = mean_se;
    cells.se_abias = std::fabs(mean_se - cells.sd);
    cells.se_sd = std::sqrt(var_se);
    double mse_se = 0.0;
    for (const auto& d : draws) {
      if (!d.ok) continue;
      mse_se += (d.se[e] - cells.sd) * (d.se[e] - cells.sd);
    }
    cells.se_rmse = std::sqrt(mse_se * inv);
  }
  double trimmed = 0.0;
  for (const auto& d : draws) {
    if (d.ok) trimmed += d.trimmed;
  }
  panel.mean_trimmed = trimmed * inv;
  return panel;
}

}  // namespace detail

// One replication of the full pipeline: generate, cross-fit both scores plus
// the ATE arms, assemble both effect reports. trimmed_total_* sums the four
// counterfactuals' trimmed counts, the accounting the reference tables use;
// the reports' trimmed_n stays the union that the effect estimates drop.
struct ReplicationResult {
  EffectReport theorem1;
  EffectReport theorem2;
  int trimmed_total_t1 = 0;
  int trimmed_total_t2 = 0;
};

inline ReplicationResult run_replication(const SimulationDesign& design,
                                         std::uint64_t replication_seed) {
  const Dataset data =
      validate_dataset(generate_dgp(design, derive_seed(replication_seed, 1)));
  const auto folds = make_folds(design.n, design.K,
                                derive_seed(replication_seed, 2));
  const std::uint64_t algo2_seed = derive_seed(replication_seed, 3);

  auto [lambda1, lambda0] = run_ate_folds(data, folds, design.threshold);
  auto [psi1, psi0] = run_algorithm1_folds(data, folds, design.threshold);
  auto [star1, star0] = run_algorithm2_folds(data, folds, design.threshold,
                                             algo2_seed);

  ReplicationResult result;
  result.theorem1 = assemble_effects(lambda1, lambda0, psi1, psi0);
  result.theorem2 = assemble_effects(lambda1, lambda0, star1, star0);
  result.trimmed_total_t1 = psi1.trimmed_n + psi0.trimmed_n +
                            lambda1.trimmed_n + lambda0.trimmed_n;
  result.trimmed_total_t2 = star1.trimmed_n + star0.trimmed_n +
                            lambda1.trimmed_n + lambda0.trimmed_n;
  return result;
}

// Replication study over seeds base_seed + r. Replications run on a small
// worker pool with independent streams; results land in slots indexed by r,
// so aggregation order is fixed regardless of scheduling. Failed replications
// are counted and excluded.
inline MetricsTable run_monte_carlo(const SimulationDesign& design,
                                    int threads = 0,
                                    bool progress = false) {
  design.validate();
  const TrueEffects truth =
      true_effects_oracle(design.coef_scale, 1000000,
                          derive_seed(design.base_seed, 0xABCDEF), design.p,
                          design.sigma);
  const std::array<double, 5> truth_arr = {truth.delta, truth.theta1,
                                           truth.theta0, truth.delta1,
                                           truth.delta0};

  const int R = design.replications;
  std::vector<detail::ReplicationDraw> draws1(static_cast<std::size_t>(R));
  std::vector<detail::ReplicationDraw> draws2(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  std::atomic<int> done{0};

  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= R) return;
      try {
        const ReplicationResult result = run_replication(
            design, design.base_seed + static_cast<std::uint64_t>(r));
        auto& d1 = draws1[static_cast<std::size_t>(r)];
        auto& d2 = draws2[static_cast<std::size_t>(r)];
        d1.estimate = detail::effect_array(result.theorem1);
        d1.se = detail::se_array(result.theorem1);
        d1.trimmed = result.trimmed_total_t1;
        d1.ok = true;
        d2.estimate = detail::effect_array(result.theorem2);
        d2.se = detail::se_array(result.theorem2);
        d2.trimmed = result.trimmed_total_t2;
        d2.ok = true;
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        if (progress) {
          std::cerr << "replication " << r << " failed: " << e.what() << "\n";
        }
      }
      const int completed = done.fetch_add(1) + 1;
      if (progress && completed % 10 == 0) {
        std::cerr << "\rreplications " << completed << "/" << R << std::flush;
      }
    }
  };

  int worker_count = threads > 0
                         ? threads
                         : static_cast<int>(std::thread::hardware_concurrency());
  if (worker_count < 1) worker_count = 1;
  worker_count = std::min(worker_count, R);
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (progress) std::cerr << "\n";

  MetricsTable table;
  table.design = design;
  table.truth = truth;
  table.theorem1 = detail::summarize_panel(draws1, truth_arr);
  table.theorem2 = detail::summarize_panel(draws2, truth_arr);
  table.failures = failures.load();
  table.replications_done = R - table.failures;
  return table;
}

}  // namespace medml
