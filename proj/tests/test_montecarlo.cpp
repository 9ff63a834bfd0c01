#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "medml/montecarlo.hpp"

using namespace medml;

namespace {

SimulationDesign tiny_design() {
  SimulationDesign design;
  design.n = 200;
  design.p = 10;
  design.coef_scale = 0.3;
  design.replications = 1;
  design.base_seed = 314;
  return design;
}

}  // namespace

TEST_CASE("single replication collapses sd to zero and rmse to abias",
          "[montecarlo]") {
  const MetricsTable table = run_monte_carlo(tiny_design(), 1);
  REQUIRE(table.replications_done == 1);
  REQUIRE(table.failures == 0);
  for (const auto& cells : table.theorem1.effects) {
    REQUIRE(cells.sd == 0.0);
    REQUIRE(cells.rmse == Catch::Approx(cells.abias).margin(1e-12));
  }
}

TEST_CASE("rmse squared decomposes into bias squared plus variance",
          "[montecarlo]") {
  SimulationDesign design = tiny_design();
  design.replications = 8;
  const MetricsTable table = run_monte_carlo(design, 1);
  for (const auto* panel : {&table.theorem1, &table.theorem2}) {
    for (const auto& cells : panel->effects) {
      REQUIRE(cells.rmse * cells.rmse ==
              Catch::Approx(cells.abias * cells.abias + cells.sd * cells.sd)
                  .margin(1e-10));
    }
  }
}

TEST_CASE("the replication harness is deterministic, even threaded",
          "[montecarlo]") {
  SimulationDesign design = tiny_design();
  design.replications = 4;
  const MetricsTable a = run_monte_carlo(design, 1);
  const MetricsTable b = run_monte_carlo(design, 2);
  for (std::size_t e = 0; e < kEffectNames.size(); ++e) {
    REQUIRE(a.theorem1.effects[e].abias == b.theorem1.effects[e].abias);
    REQUIRE(a.theorem1.effects[e].sd == b.theorem1.effects[e].sd);
    REQUIRE(a.theorem2.effects[e].se_mean == b.theorem2.effects[e].se_mean);
  }
  REQUIRE(a.theorem1.mean_trimmed == b.theorem1.mean_trimmed);
}

TEST_CASE("a full replication satisfies the decomposition identities",
          "[montecarlo]") {
  SimulationDesign design;
  design.n = 500;
  design.p = 30;
  const ReplicationResult result = run_replication(design, 2718);
  for (const auto* report : {&result.theorem1, &result.theorem2}) {
    REQUIRE(std::fabs(report->theta1.estimate + report->delta0.estimate -
                      report->delta.estimate) <= 1e-12);
    REQUIRE(std::fabs(report->theta0.estimate + report->delta1.estimate -
                      report->delta.estimate) <= 1e-12);
    REQUIRE(report->delta.se > 0.0);
    REQUIRE(report->delta.p >= 0.0);
    REQUIRE(report->delta.p <= 1.0);
  }
}
