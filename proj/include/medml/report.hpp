#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "medml/checks.hpp"
#include "medml/effects.hpp"
#include "medml/montecarlo.hpp"

namespace medml {

using OrderedJson = nlohmann::ordered_json;

namespace detail {

inline OrderedJson stat_json(const EffectStat& stat) {
  OrderedJson j;
  j["estimate"] = stat.estimate;
  j["se"] = stat.se;
  j["p"] = std::isfinite(stat.p) ? OrderedJson(stat.p) : OrderedJson(nullptr);
  return j;
}

inline std::string format_cell(double value, int width = 8, int digits = 4) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%*.*f", width, digits, value);
  return buffer;
}

}  // namespace detail

inline OrderedJson effect_report_json(const EffectReport& report) {
  OrderedJson j;
  j["delta"] = detail::stat_json(report.delta);
  j["theta1"] = detail::stat_json(report.theta1);
  j["theta0"] = detail::stat_json(report.theta0);
  j["delta1"] = detail::stat_json(report.delta1);
  j["delta0"] = detail::stat_json(report.delta0);
  j["mean_y00"] = detail::stat_json(report.mean_y00);
  return j;
}

inline OrderedJson counterfactual_json(const CounterfactualEstimate& est) {
  OrderedJson j;
  j["estimate"] = est.point;
  j["se"] = effect_se(est.score_vector);
  j["retained"] = est.retained_n;
  j["trimmed"] = est.trimmed_n;
  return j;
}

inline OrderedJson metrics_json(const MetricsTable& table) {
  OrderedJson j;
  OrderedJson truth;
  truth["delta"] = table.truth.delta;
  truth["theta1"] = table.truth.theta1;
  truth["theta0"] = table.truth.theta0;
  truth["delta1"] = table.truth.delta1;
  truth["delta0"] = table.truth.delta0;
  j["truth"] = truth;
  for (const auto& [label, panel] :
       {std::pair<const char*, const EstimatorPanel*>{"theorem1",
                                                      &table.theorem1},
        std::pair<const char*, const EstimatorPanel*>{"theorem2",
                                                      &table.theorem2}}) {
    OrderedJson p;
    for (std::size_t e = 0; e < kEffectNames.size(); ++e) {
      const EffectCells& cells = panel->effects[e];
      OrderedJson c;
      c["abias"] = cells.abias;
      c["sd"] = cells.sd;
      c["rmse"] = cells.rmse;
      c["se_mean"] = cells.se_mean;
      c["se_abias"] = cells.se_abias;
      c["se_sd"] = cells.se_sd;
      c["se_rmse"] = cells.se_rmse;
      p[kEffectNames[e]] = c;
    }
    p["mean_trimmed"] = panel->mean_trimmed;
    j[label] = p;
  }
  j["replications"] = table.replications_done;
  j["failures"] = table.failures;
  return j;
}

// Aligned text table mirroring the simulation-study layout: one row per
// effect with abias/sd/rmse per estimator, the truth column, and the average
// trimmed count per estimator.
inline std::string metrics_text(const MetricsTable& table) {
  std::string out;
  out += "            ----------- theorem 1 -----------   ----------- theorem 2 -----------\n";
  out += "effect         abias       sd     rmse             abias       sd     rmse     true\n";
  const std::array<double, 5> truths = {table.truth.delta, table.truth.theta1,
                                        table.truth.theta0, table.truth.delta1,
                                        table.truth.delta0};
  for (std::size_t e = 0; e < kEffectNames.size(); ++e) {
    const EffectCells& a = table.theorem1.effects[e];
    const EffectCells& b = table.theorem2.effects[e];
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-10s  %8.4f %8.4f %8.4f          %8.4f %8.4f %8.4f %8.4f\n",
                  kEffectNames[e], a.abias, a.sd, a.rmse, b.abias, b.sd,
                  b.rmse, truths[e]);
    out += line;
  }
  char trim_line[256];
  std::snprintf(trim_line, sizeof(trim_line),
                "%-10s  %8.2f                            %8.2f\n", "trimmed",
                table.theorem1.mean_trimmed, table.theorem2.mean_trimmed);
  out += trim_line;

  out += "\nstandard errors (mean estimate vs replication sd)\n";
  out += "effect       se_mean  se_abias            se_mean  se_abias\n";
  for (std::size_t e = 0; e < kEffectNames.size(); ++e) {
    const EffectCells& a = table.theorem1.effects[e];
    const EffectCells& b = table.theorem2.effects[e];
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-10s  %8.4f %8.4f           %8.4f %8.4f\n", kEffectNames[e],
                  a.se_mean, a.se_abias, b.se_mean, b.se_abias);
    out += line;
  }
  if (table.failures > 0) {
    out += "failed replications: " + std::to_string(table.failures) + "\n";
  }
  return out;
}

inline OrderedJson verify_json(const checks::VerifyReport& report) {
  OrderedJson j;
  OrderedJson items = OrderedJson::array();
  for (const auto& item : report.items) {
    OrderedJson entry;
    entry["suite"] = item.suite;
    entry["name"] = item.name;
    entry["statistic"] = item.statistic;
    entry["bound"] = item.bound;
    entry["comparison"] = item.expect_within ? "<=" : ">";
    entry["pass"] = item.pass;
    items.push_back(entry);
  }
  j["checks"] = items;
  j["all_pass"] = report.all_pass();
  return j;
}

inline std::string verify_text(const checks::VerifyReport& report) {
  std::string out;
  for (const auto& item : report.items) {
    char line[512];
    std::snprintf(line, sizeof(line), "[%s] %-14s %-55s stat=%.6g %s bound=%.6g\n",
                  item.pass ? "PASS" : "FAIL", item.suite.c_str(),
                  item.name.c_str(), item.statistic,
                  item.expect_within ? "<=" : ">", item.bound);
    out += line;
  }
  out += report.all_pass() ? "all checks passed\n" : "some checks FAILED\n";
  return out;
}

// Canonical serialization: ordered keys, two-space indent, shortest
// round-trip float representation. Parsing and re-emitting a document
// reproduces it byte for byte.
inline std::string json_dump(const OrderedJson& j) {
  return j.dump(2) + "\n";
}

}  // namespace medml
