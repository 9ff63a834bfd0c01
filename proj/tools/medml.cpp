// Command-line surface: CSV estimation, the simulation study, and the
// property-check suites. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 verification failure.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medml/checks.hpp"
#include "medml/crossfit.hpp"
#include "medml/csv.hpp"
#include "medml/data.hpp"
#include "medml/dgp.hpp"
#include "medml/effects.hpp"
#include "medml/montecarlo.hpp"
#include "medml/report.hpp"

namespace {

using medml::OrderedJson;

struct CommonFlags {
  int folds = 3;
  double trim = 0.05;
  std::uint64_t seed = 1;
  std::string format = "json";
  std::string output;
  bool timings = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--folds", flags.folds, "cross-fitting folds K (default 3)")
      ->check(CLI::Range(2, 100));
  cmd->add_option("--trim", flags.trim,
                  "trimming threshold on denominator probabilities")
      ->check(CLI::Range(1e-6, 0.499999));
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--format", flags.format, "output format: json | table")
      ->check(CLI::IsMember({"json", "table"}));
  cmd->add_option("--output", flags.output, "write the report to this file");
  cmd->add_flag("--timings", flags.timings,
                "include wall-clock timings in the report");
}

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(output_path);
  if (!out) {
    throw medml::Error(medml::ErrorCode::FileNotFound,
                       "cannot write '" + output_path + "'");
  }
  out << text;
}

std::vector<std::string> split_names(const std::string& joined) {
  std::vector<std::string> names;
  std::stringstream stream(joined);
  std::string part;
  while (std::getline(stream, part, ',')) {
    if (!part.empty()) names.push_back(part);
  }
  return names;
}

std::string effects_text(const std::string& label,
                         const medml::EffectReport& report) {
  char line[512];
  std::string out = label +
      "\n           delta   theta1   theta0   delta1   delta0  E[Y(0,M(0))]\n";
  auto row = [&](const char* name, auto getter) {
    std::snprintf(line, sizeof(line),
                  "%-8s %7.4f  %7.4f  %7.4f  %7.4f  %7.4f  %12.4f\n", name,
                  getter(report.delta), getter(report.theta1),
                  getter(report.theta0), getter(report.delta1),
                  getter(report.delta0), getter(report.mean_y00));
    out += line;
  };
  row("effect", [](const medml::EffectStat& s) { return s.estimate; });
  row("se", [](const medml::EffectStat& s) { return s.se; });
  row("p-val", [](const medml::EffectStat& s) { return s.p; });
  std::snprintf(line, sizeof(line), "trimmed  %d of %d\n\n", report.trimmed_n,
                report.n);
  out += line;
  return out;
}

int run_estimate(const CommonFlags& flags, const std::string& input,
                 const medml::ColumnRoles& roles, const std::string& score,
                 int controlled_m) {
  const auto started = std::chrono::steady_clock::now();
  const medml::CsvTable table = medml::read_csv(input);
  const medml::CsvDataset csv = medml::dataset_from_csv(table, roles);
  const medml::Dataset& data = csv.data;

  const auto folds =
      medml::make_folds(static_cast<int>(data.n()), flags.folds, flags.seed);
  const bool want_t1 = score != "theorem2";
  const bool want_t2 = score != "theorem1";

  auto [lambda1, lambda0] = medml::run_ate_folds(data, folds, flags.trim);

  OrderedJson config;
  config["command"] = "estimate";
  config["input"] = input;
  config["outcome"] = roles.outcome;
  config["treatment"] = roles.treatment;
  config["mediator"] = roles.mediator;
  config["covariates"] = csv.covariate_names;
  config["folds"] = flags.folds;
  config["trim"] = flags.trim;
  config["score"] = score;
  config["controlled_m"] = controlled_m >= 0 ? OrderedJson(controlled_m)
                                             : OrderedJson(nullptr);
  config["seed"] = flags.seed;
  config["n"] = static_cast<int>(data.n());
  config["p"] = static_cast<int>(data.p());
  config["rejected_rows"] = csv.rejected_rows;

  OrderedJson effects;
  OrderedJson counterfactuals;
  OrderedJson trimming;
  trimming["threshold"] = flags.trim;
  counterfactuals["lambda1"] = medml::counterfactual_json(lambda1);
  counterfactuals["lambda0"] = medml::counterfactual_json(lambda0);

  std::string text;
  medml::EffectReport report1, report2;
  if (want_t1) {
    auto [psi1, psi0] = medml::run_algorithm1_folds(data, folds, flags.trim);
    report1 = medml::assemble_effects(lambda1, lambda0, psi1, psi0);
    counterfactuals["psi1"] = medml::counterfactual_json(psi1);
    counterfactuals["psi0"] = medml::counterfactual_json(psi0);
    OrderedJson t;
    t["retained"] = report1.retained_n;
    t["trimmed"] = report1.trimmed_n;
    trimming["theorem1"] = t;
    text += effects_text("theorem 1 (efficient score with mediator density)",
                         report1);
  }
  if (want_t2) {
    auto [star1, star0] =
        medml::run_algorithm2_folds(data, folds, flags.trim, flags.seed);
    report2 = medml::assemble_effects(lambda1, lambda0, star1, star0);
    counterfactuals["psi1_star"] = medml::counterfactual_json(star1);
    counterfactuals["psi0_star"] = medml::counterfactual_json(star0);
    OrderedJson t;
    t["retained"] = report2.retained_n;
    t["trimmed"] = report2.trimmed_n;
    trimming["theorem2"] = t;
    text += effects_text("theorem 2 (Bayes-transformed score)", report2);
  }

  for (const char* name :
       {"delta", "theta1", "theta0", "delta1", "delta0", "mean_y00"}) {
    OrderedJson per_estimator;
    if (want_t1) per_estimator["theorem1"] = medml::effect_report_json(report1)[name];
    if (want_t2) per_estimator["theorem2"] = medml::effect_report_json(report2)[name];
    effects[name] = per_estimator;
  }

  if (controlled_m >= 0) {
    auto [psi_1m, psi_0m] =
        medml::run_controlled_folds(data, folds, flags.trim, controlled_m);
    const medml::ControlledReport controlled =
        medml::assemble_controlled(psi_1m, psi_0m);
    OrderedJson stat;
    stat["estimate"] = controlled.gamma.estimate;
    stat["se"] = controlled.gamma.se;
    stat["p"] = std::isfinite(controlled.gamma.p)
                    ? OrderedJson(controlled.gamma.p)
                    : OrderedJson(nullptr);
    effects["gamma_m" + std::to_string(controlled_m)] = stat;
    counterfactuals["psi_1m" + std::to_string(controlled_m)] =
        medml::counterfactual_json(psi_1m);
    counterfactuals["psi_0m" + std::to_string(controlled_m)] =
        medml::counterfactual_json(psi_0m);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "controlled direct effect gamma(m=%d): %.4f (se %.4f)\n",
                  controlled_m, controlled.gamma.estimate, controlled.gamma.se);
    text += line;
  }

  OrderedJson doc;
  doc["config"] = config;
  doc["effects"] = effects;
  doc["counterfactuals"] = counterfactuals;
  doc["trimming"] = trimming;
  if (flags.timings) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    OrderedJson timings;
    timings["total_seconds"] = seconds;
    doc["timings"] = timings;
  }

  emit(flags.format == "json" ? medml::json_dump(doc) : text, flags.output);
  return 0;
}

int run_simulate(const CommonFlags& flags, const medml::SimulationDesign& design,
                 int threads, bool progress) {
  const auto started = std::chrono::steady_clock::now();
  const medml::MetricsTable table =
      medml::run_monte_carlo(design, threads, progress);

  OrderedJson config;
  config["command"] = "simulate";
  config["n"] = design.n;
  config["p"] = design.p;
  config["scale"] = design.coef_scale;
  config["sigma"] =
      design.sigma == medml::SigmaKind::Toeplitz ? "toeplitz" : "identity";
  config["reps"] = design.replications;
  config["folds"] = design.K;
  config["trim"] = design.threshold;
  config["seed"] = design.base_seed;

  OrderedJson doc;
  doc["config"] = config;
  const OrderedJson metrics = medml::metrics_json(table);
  for (auto it = metrics.begin(); it != metrics.end(); ++it) {
    doc[it.key()] = it.value();
  }
  if (flags.timings) {
    OrderedJson timings;
    timings["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    doc["timings"] = timings;
  }

  emit(flags.format == "json" ? medml::json_dump(doc)
                              : medml::metrics_text(table),
       flags.output);
  return 0;
}

int run_verify(const CommonFlags& flags, const medml::checks::VerifyOptions& options) {
  const medml::checks::VerifyReport report =
      medml::checks::run_verify_suites(options);

  OrderedJson config;
  config["command"] = "verify";
  config["n_mc"] = options.n_mc;
  config["scale"] = options.coef_scale;
  config["seed"] = options.seed;
  OrderedJson doc;
  doc["config"] = config;
  const OrderedJson body = medml::verify_json(report);
  for (auto it = body.begin(); it != body.end(); ++it) {
    doc[it.key()] = it.value();
  }

  emit(flags.format == "json" ? medml::json_dump(doc)
                              : medml::verify_text(report),
       flags.output);
  return report.all_pass() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "medml: natural direct/indirect, total, and controlled direct effects "
      "of a binary treatment via double machine learning"};
  app.require_subcommand(1);

  // estimate
  auto* estimate = app.add_subcommand(
      "estimate", "estimate mediation effects from a CSV file");
  CommonFlags est_flags;
  std::string input, outcome = "y", treatment = "d", mediator = "m";
  std::string covariates = "all";
  std::string score = "both";
  int controlled_m = -1;
  estimate->add_option("--input", input, "CSV file with a header row")
      ->required();
  estimate->add_option("--outcome", outcome, "outcome column (default y)");
  estimate->add_option("--treatment", treatment,
                       "binary treatment column (default d)");
  estimate->add_option("--mediator", mediator,
                       "binary mediator column (default m)");
  estimate->add_option(
      "--covariates", covariates,
      "comma-separated covariate columns, or 'all' for all remaining");
  estimate->add_option("--score", score, "theorem1 | theorem2 | both")
      ->check(CLI::IsMember({"theorem1", "theorem2", "both"}));
  estimate->add_option("--controlled-m", controlled_m,
                       "also estimate the controlled direct effect at this "
                       "mediator value")
      ->check(CLI::Range(0, 1));
  add_common(estimate, est_flags);

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "replication study on the simulation design");
  CommonFlags sim_flags;
  sim_flags.seed = 20240501;
  medml::SimulationDesign design;
  int threads = 0;
  bool progress = false;
  simulate->add_option("--n", design.n, "sample size (default 1000)");
  simulate->add_option("--p", design.p, "covariate count (default 200)");
  simulate->add_option("--scale", design.coef_scale,
                       "confounding scale in beta_i = scale / i^2");
  simulate->add_option("--reps", design.replications,
                       "replications (default 250)");
  simulate
      ->add_option("--sigma", [&design](const std::vector<std::string>& v) {
        if (v[0] == "toeplitz") {
          design.sigma = medml::SigmaKind::Toeplitz;
        } else if (v[0] == "identity") {
          design.sigma = medml::SigmaKind::Identity;
        } else {
          return false;
        }
        return true;
      }, "covariance kind: toeplitz | identity");
  simulate->add_option("--threads", threads,
                       "worker threads (default: hardware)");
  simulate->add_flag("--progress", progress, "print progress to stderr");
  add_common(simulate, sim_flags);

  // verify
  auto* verify = app.add_subcommand(
      "verify", "run the moment, orthogonality, robustness, Bayes-identity, "
                "and decomposition property suites");
  CommonFlags ver_flags;
  ver_flags.seed = 90210;
  medml::checks::VerifyOptions options;
  verify->add_option("--n-mc", options.n_mc, "oracle sample size");
  verify->add_option("--scale", options.coef_scale, "confounding scale");
  auto* inject = verify->add_flag("--inject-nonorthogonal",
                                  options.inject_nonorthogonal);
  inject->group("");  // hidden: forces the orthogonality suite to fail
  add_common(verify, ver_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (estimate->parsed()) {
      medml::ColumnRoles roles;
      roles.outcome = outcome;
      roles.treatment = treatment;
      roles.mediator = mediator;
      if (covariates != "all") roles.covariates = split_names(covariates);
      return run_estimate(est_flags, input, roles, score, controlled_m);
    }
    if (simulate->parsed()) {
      design.K = sim_flags.folds;
      design.threshold = sim_flags.trim;
      design.base_seed = sim_flags.seed;
      return run_simulate(sim_flags, design, threads, progress);
    }
    options.seed = ver_flags.seed;
    return run_verify(ver_flags, options);
  } catch (const medml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == medml::ErrorCode::InvalidConfig ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
