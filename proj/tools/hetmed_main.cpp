#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/simulation.hpp"
#include "run_config.hpp"

namespace {

using nlohmann::json;
using namespace hetmed;
using namespace hetmed::cli;

constexpr const char* kSchemaTag = "hetmed-report-v1";

void write_output(const RunConfig& cfg, const std::string& text) {
  if (cfg.output_path == "-" || cfg.output_path.empty()) {
    std::cout << text << std::endl;
    return;
  }
  std::ofstream out(cfg.output_path);
  if (!out) throw InputError("cannot write output file '" + cfg.output_path + "'");
  out << text << '\n';
}

double sample_median(VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  const Eigen::Index n = v.size();
  return (n % 2 == 1) ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

// Dichotomizes the named column (exposure or covariate) at its sample median;
// returns the threshold used.
double dichotomize(Dataset& data, const RunConfig& cfg, const std::string& column) {
  if (column == cfg.columns.a) {
    const double med = sample_median(data.a);
    for (Eigen::Index i = 0; i < data.n(); ++i) data.a(i) = data.a(i) > med ? 1.0 : 0.0;
    return med;
  }
  const auto& cov = cfg.columns.covariates;
  const auto it = std::find(cov.begin(), cov.end(), column);
  if (it == cov.end()) {
    throw InputError("dichotomize-at-median: '" + column +
                     "' is neither the exposure nor a mapped covariate");
  }
  const Eigen::Index j = (it - cov.begin()) + 1;
  const double med = sample_median(data.x.col(j));
  for (Eigen::Index i = 0; i < data.n(); ++i) data.x(i, j) = data.x(i, j) > med ? 1.0 : 0.0;
  return med;
}

json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

json theta_json(const Theta& t) {
  json j{{"theta1", t.theta1}, {"theta2", t.theta2}, {"theta3", t.theta3}};
  if (t.zeta) {
    j["zeta"] = *t.zeta;
  } else {
    j["zeta"] = nullptr;
  }
  return j;
}

json estimate_entry(const SolveResult& fit, const EffectReport& rep, int bootstrap_dropped) {
  json j;
  j["estimator"] = estimator_name(fit.kind);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["final_residual"] = fit.final_residual;
  j["condition_estimate"] = fit.condition_estimate;
  j["theta"] = theta_json(fit.theta);
  j["nde"] = rep.nde;
  j["nie"] = rep.nie;
  j["se_nde"] = rep.se_nde;
  j["se_nie"] = rep.se_nie;
  j["ci_nde"] = interval_json(rep.ci_nde);
  j["ci_nie"] = interval_json(rep.ci_nie);
  j["variance_source"] =
      rep.variance_source == VarianceSource::sandwich ? "sandwich" : "bootstrap";
  if (bootstrap_dropped >= 0) j["bootstrap_dropped"] = bootstrap_dropped;
  return j;
}

std::string estimates_csv(const json& report) {
  std::ostringstream os;
  os << "estimator,nde,se_nde,ci_nde_lo,ci_nde_hi,nie,se_nie,ci_nie_lo,ci_nie_hi,"
        "converged,iterations,final_residual,condition_estimate\n";
  os.precision(17);
  for (const auto& e : report.at("estimates")) {
    os << e.at("estimator").get<std::string>() << ',' << e.at("nde").get<double>() << ','
       << e.at("se_nde").get<double>() << ',' << e.at("ci_nde")[0].get<double>() << ','
       << e.at("ci_nde")[1].get<double>() << ',' << e.at("nie").get<double>() << ','
       << e.at("se_nie").get<double>() << ',' << e.at("ci_nie")[0].get<double>() << ','
       << e.at("ci_nie")[1].get<double>() << ',' << (e.at("converged").get<bool>() ? 1 : 0)
       << ',' << e.at("iterations").get<int>() << ',' << e.at("final_residual").get<double>()
       << ',' << e.at("condition_estimate").get<double>() << '\n';
  }
  return os.str();
}

std::string mc_csv(const McSummary& s) {
  std::ostringstream os;
  os << "estimator,estimand,bias,sd,sqrt_evar,cov90,cov95,n_failed\n";
  os.precision(17);
  for (const auto& e : s.estimators) {
    for (const auto* pair : {&e.nde, &e.nie}) {
      os << estimator_name(e.kind) << ',' << (pair == &e.nde ? "NDE" : "NIE") << ','
         << pair->bias << ',' << pair->sd << ',' << pair->sqrt_evar << ',' << pair->cov90
         << ',' << pair->cov95 << ',' << e.n_failed << '\n';
    }
  }
  return os.str();
}

int run_estimate(const RunConfig& cfg) {
  IngestReport ingest;
  Dataset data = ingest_csv(cfg.input, cfg.columns, &ingest);
  json report;
  report["schema"] = kSchemaTag;
  report["command"] = "estimate";
  report["input"] = cfg.input;
  report["n"] = data.n();
  report["blank_rows_skipped"] = ingest.n_blank_skipped;
  report["contrast"] = json::array({cfg.contrast_from, cfg.contrast_to});
  report["ci_level"] = cfg.ci_level;
  report["seed"] = cfg.seed;
  if (cfg.dichotomize_at_median) {
    const double threshold = dichotomize(data, cfg, *cfg.dichotomize_at_median);
    report["dichotomize"] = json{{"column", *cfg.dichotomize_at_median},
                                 {"threshold", threshold}};
  }
  const ModelSpec spec = build_model_spec(cfg);
  report["estimates"] = json::array();
  for (const EstimatorKind kind : cfg.estimators) {
    const SolveResult fit = solve(kind, data, spec);
    CovMatrix cov;
    int dropped = -1;
    VarianceSource source = VarianceSource::sandwich;
    if (cfg.bootstrap) {
      cov = bootstrap_cov(data, kind, spec, cfg.bootstrap_b, cfg.seed, cfg.threads, &dropped);
      source = VarianceSource::bootstrap;
    } else {
      cov = sandwich_cov(data, fit, spec);
    }
    const EffectReport rep = effect_report(data, spec, fit, cov, cfg.contrast_from,
                                           cfg.contrast_to, cfg.ci_level, source);
    report["estimates"].push_back(estimate_entry(fit, rep, dropped));
  }
  if (cfg.bp_test) {
    const BPResult bp = breusch_pagan(data, spec);
    report["breusch_pagan"] =
        json{{"statistic", bp.statistic}, {"df", bp.df}, {"p_value", bp.p_value}};
  }
  write_output(cfg, cfg.output_format == OutputFormat::json ? report.dump(2)
                                                            : estimates_csv(report));
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  DgpConfig dgp;
  dgp.n = cfg.simulate.n;
  dgp.confounding_on = cfg.simulate.confounding;
  dgp.interaction_zeta = cfg.simulate.zeta;
  const McSummary summary = run_monte_carlo(dgp, cfg.simulate.scenario, cfg.estimators,
                                            cfg.simulate.replications, cfg.seed, cfg.threads);
  std::cerr << mc_summary_table(summary);
  if (cfg.output_format == OutputFormat::json) {
    json j = json::parse(mc_summary_json(summary));
    j["schema"] = kSchemaTag;
    j["command"] = "simulate";
    write_output(cfg, j.dump(2));
  } else {
    write_output(cfg, mc_csv(summary));
  }
  return 0;
}

int run_diagnose(const RunConfig& cfg) {
  IngestReport ingest;
  Dataset data = ingest_csv(cfg.input, cfg.columns, &ingest);
  json report;
  report["schema"] = kSchemaTag;
  report["command"] = "diagnose";
  report["input"] = cfg.input;
  report["n"] = data.n();
  if (cfg.dichotomize_at_median) {
    const double threshold = dichotomize(data, cfg, *cfg.dichotomize_at_median);
    report["dichotomize"] = json{{"column", *cfg.dichotomize_at_median},
                                 {"threshold", threshold}};
  }
  const ModelSpec spec = build_model_spec(cfg);
  const BPResult bp = breusch_pagan(data, spec);
  report["breusch_pagan"] =
      json{{"statistic", bp.statistic}, {"df", bp.df}, {"p_value", bp.p_value}};
  int exit_code = 0;
  try {
    const SolveResult fit = solve_mr(data, spec);
    report["condition_estimate"] = fit.condition_estimate;
    report["rho_link_used"] =
        fit.eta.rho_link_used == Link::log ? "log" : "identity";
  } catch (const EstimationError& e) {
    report["condition_estimate"] = nullptr;
    report["solve_error"] = e.what();
    exit_code = 3;
  }
  if (cfg.output_format == OutputFormat::json) {
    write_output(cfg, report.dump(2));
  } else {
    std::ostringstream os;
    os.precision(17);
    os << "statistic,df,p_value,condition_estimate\n"
       << bp.statistic << ',' << bp.df << ',' << bp.p_value << ',';
    if (report.contains("condition_estimate") && !report["condition_estimate"].is_null()) {
      os << report["condition_estimate"].get<double>();
    } else {
      os << "NA";
    }
    os << '\n';
    write_output(cfg, os.str());
  }
  if (exit_code != 0) {
    std::cerr << "error: " << report["solve_error"].get<std::string>() << std::endl;
  }
  return exit_code;
}

int fail(const RunConfig* cfg, const std::string& command, int code, const char* kind,
         const std::string& message) {
  std::cerr << "error: " << message << std::endl;
  json report;
  report["schema"] = kSchemaTag;
  report["command"] = command;
  report["error"] = json{{"code", code}, {"kind", kind}, {"message", message}};
  try {
    if (cfg && !cfg->output_path.empty() && cfg->output_path != "-") {
      std::ofstream out(cfg->output_path);
      if (out) out << report.dump(2) << '\n';
    } else {
      std::cout << report.dump(2) << std::endl;
    }
  } catch (...) {
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric mediation analysis under unmeasured mediator-outcome "
               "confounding"};
  app.require_subcommand(1);

  std::string config_path, input_override, output_override, dichotomize_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads_override;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required(needs_config);
    sub->add_option("--input", input_override, "input CSV path (overrides config)");
    sub->add_option("--output", output_override, "report path, '-' for stdout");
    sub->add_option("--seed", seed_override, "RNG seed (overrides config)");
    sub->add_option("--threads", threads_override, "worker threads, 0 = auto");
    sub->add_option("--dichotomize-at-median", dichotomize_override,
                    "dichotomize the named column at its sample median");
  };
  add_common(app.add_subcommand("estimate", "estimate NDE/NIE from a CSV file"), true);
  add_common(app.add_subcommand("simulate", "run the Monte Carlo study"), false);
  add_common(app.add_subcommand("diagnose", "heteroskedasticity and identification checks"),
             true);

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();
  const Command command = sub == "estimate"  ? Command::estimate
                          : sub == "simulate" ? Command::simulate
                                              : Command::diagnose;

  RunConfig cfg;
  bool cfg_ready = false;
  try {
    if (!config_path.empty()) {
      cfg = load_config_file(config_path, command);
    } else {
      cfg = parse_config(nlohmann::json::object(), command);
    }
    if (!input_override.empty()) cfg.input = input_override;
    if (!output_override.empty()) cfg.output_path = output_override;
    if (seed_override) cfg.seed = *seed_override;
    if (threads_override) cfg.threads = *threads_override;
    if (!dichotomize_override.empty()) cfg.dichotomize_at_median = dichotomize_override;
    cfg_ready = true;
    switch (command) {
      case Command::estimate: return run_estimate(cfg);
      case Command::simulate: return run_simulate(cfg);
      case Command::diagnose: return run_diagnose(cfg);
    }
    return 0;
  } catch (const InputError& e) {
    return fail(cfg_ready ? &cfg : nullptr, sub, 2, "input", e.what());
  } catch (const EstimationError& e) {
    return fail(cfg_ready ? &cfg : nullptr, sub, 3, "estimation", e.what());
  } catch (const std::exception& e) {
    return fail(cfg_ready ? &cfg : nullptr, sub, 3, "internal", e.what());
  }
}
