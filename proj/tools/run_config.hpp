#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetmed/csv.hpp"
#include "hetmed/simulation.hpp"
#include "hetmed/types.hpp"

namespace hetmed::cli {

enum class Command { estimate, simulate, diagnose };
enum class OutputFormat { json, csv };

struct ModelConfig {
  // Design columns by covariate name; empty means all covariates. The
  // intercept is always included.
  std::vector<std::string> pi_cols, g_cols, rho_cols, h_cols;
  Link pi_link = Link::logistic;
  Link rho_link = Link::log;
  ExposureKind exposure = ExposureKind::binary;
};

struct SimulateConfig {
  Eigen::Index n = 800;
  int replications = 1000;
  Scenario scenario = Scenario::i;
  bool confounding = true;
  double zeta = 0.0;
};

struct RunConfig {
  Command command = Command::estimate;
  std::string input;
  ColumnMapping columns;
  ModelConfig models;
  std::vector<EstimatorKind> estimators{EstimatorKind::MR};
  double contrast_from = 0.0;
  double contrast_to = 1.0;
  double ci_level = 0.95;
  bool bootstrap = false;
  int bootstrap_b = 500;
  bool bp_test = false;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output_path = "-";
  OutputFormat output_format = OutputFormat::json;
  std::optional<std::string> dichotomize_at_median;
  SimulateConfig simulate;
};

RunConfig parse_config(const nlohmann::json& j, Command command);
RunConfig load_config_file(const std::string& path, Command command);

// Maps the configured design names onto Dataset column indices.
ModelSpec build_model_spec(const RunConfig& cfg);

}  // namespace hetmed::cli
