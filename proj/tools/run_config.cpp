#include "run_config.hpp"

#include <algorithm>
#include <fstream>

#include "hetmed/errors.hpp"

namespace hetmed::cli {

namespace {

Link parse_link(const std::string& name) {
  if (name == "identity") return Link::identity;
  if (name == "logistic") return Link::logistic;
  if (name == "log") return Link::log;
  throw InputError("config: unknown link '" + name + "'");
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("config: ") + what + " must be an array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw InputError(std::string("config: ") + what + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j, Command command) {
  RunConfig cfg;
  cfg.command = command;
  try {
    if (j.contains("input")) cfg.input = j.at("input").get<std::string>();
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      cfg.columns.y = c.at("y").get<std::string>();
      cfg.columns.a = c.at("a").get<std::string>();
      cfg.columns.m = c.at("m").get<std::string>();
      if (c.contains("covariates")) {
        cfg.columns.covariates = string_list(c.at("covariates"), "columns.covariates");
      }
    }
    if (j.contains("models")) {
      const auto& m = j.at("models");
      if (m.contains("pi")) {
        if (m.at("pi").contains("columns")) {
          cfg.models.pi_cols = string_list(m.at("pi").at("columns"), "models.pi.columns");
        }
        if (m.at("pi").contains("link")) {
          cfg.models.pi_link = parse_link(m.at("pi").at("link").get<std::string>());
        }
      }
      if (m.contains("g") && m.at("g").contains("columns")) {
        cfg.models.g_cols = string_list(m.at("g").at("columns"), "models.g.columns");
      }
      if (m.contains("rho")) {
        if (m.at("rho").contains("columns")) {
          cfg.models.rho_cols = string_list(m.at("rho").at("columns"), "models.rho.columns");
        }
        if (m.at("rho").contains("link")) {
          cfg.models.rho_link = parse_link(m.at("rho").at("link").get<std::string>());
        }
      }
      if (m.contains("h") && m.at("h").contains("columns")) {
        cfg.models.h_cols = string_list(m.at("h").at("columns"), "models.h.columns");
      }
      if (m.contains("exposure")) {
        const auto kind = m.at("exposure").get<std::string>();
        if (kind == "binary") {
          cfg.models.exposure = ExposureKind::binary;
        } else if (kind == "continuous") {
          cfg.models.exposure = ExposureKind::continuous;
          cfg.models.pi_link = Link::identity;
        } else {
          throw InputError("config: models.exposure must be binary or continuous");
        }
      }
    }
    if (j.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& name : string_list(j.at("estimators"), "estimators")) {
        cfg.estimators.push_back(estimator_from_name(name));
      }
      if (cfg.estimators.empty()) throw InputError("config: estimators is empty");
    }
    if (j.contains("contrast")) {
      const auto& c = j.at("contrast");
      if (!c.is_array() || c.size() != 2) {
        throw InputError("config: contrast must be [from, to]");
      }
      cfg.contrast_from = c.at(0).get<double>();
      cfg.contrast_to = c.at(1).get<double>();
    }
    if (j.contains("ci_level")) cfg.ci_level = j.at("ci_level").get<double>();
    if (j.contains("variance")) {
      const auto method = j.at("variance").at("method").get<std::string>();
      if (method == "bootstrap") {
        cfg.bootstrap = true;
        if (j.at("variance").contains("B")) {
          cfg.bootstrap_b = j.at("variance").at("B").get<int>();
        }
      } else if (method != "sandwich") {
        throw InputError("config: variance.method must be sandwich or bootstrap");
      }
    }
    if (j.contains("bp_test")) cfg.bp_test = j.at("bp_test").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (o.contains("path")) cfg.output_path = o.at("path").get<std::string>();
      if (o.contains("format")) {
        const auto fmt = o.at("format").get<std::string>();
        if (fmt == "json") {
          cfg.output_format = OutputFormat::json;
        } else if (fmt == "csv") {
          cfg.output_format = OutputFormat::csv;
        } else {
          throw InputError("config: output.format must be json or csv");
        }
      }
    }
    if (j.contains("dichotomize_at_median")) {
      cfg.dichotomize_at_median = j.at("dichotomize_at_median").get<std::string>();
    }
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      if (s.contains("n")) cfg.simulate.n = s.at("n").get<Eigen::Index>();
      if (s.contains("replications")) cfg.simulate.replications = s.at("replications").get<int>();
      if (s.contains("scenario")) {
        cfg.simulate.scenario = scenario_from_name(s.at("scenario").get<std::string>());
      }
      if (s.contains("confounding")) cfg.simulate.confounding = s.at("confounding").get<bool>();
      if (s.contains("zeta")) cfg.simulate.zeta = s.at("zeta").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) {
    throw InputError("config: ci_level must lie in (0, 1)");
  }
  if (command != Command::simulate) {
    if (cfg.input.empty()) throw InputError("config: input CSV path is required");
    if (cfg.columns.y.empty() || cfg.columns.a.empty() || cfg.columns.m.empty()) {
      throw InputError("config: columns.y, columns.a and columns.m are required");
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path, Command command) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, command);
}

ModelSpec build_model_spec(const RunConfig& cfg) {
  const auto& cov = cfg.columns.covariates;
  auto to_indices = [&](const std::vector<std::string>& names) {
    std::vector<int> idx{0};
    if (names.empty()) {
      for (int j = 0; j < static_cast<int>(cov.size()); ++j) idx.push_back(j + 1);
      return idx;
    }
    for (const auto& name : names) {
      const auto it = std::find(cov.begin(), cov.end(), name);
      if (it == cov.end()) {
        throw InputError("config: design column '" + name + "' is not a mapped covariate");
      }
      idx.push_back(static_cast<int>(it - cov.begin()) + 1);
    }
    return idx;
  };
  ModelSpec spec;
  spec.pi_design = to_indices(cfg.models.pi_cols);
  spec.g_design = to_indices(cfg.models.g_cols);
  spec.rho_design = to_indices(cfg.models.rho_cols);
  spec.h_design = to_indices(cfg.models.h_cols);
  spec.pi_link = cfg.models.pi_link;
  spec.rho_link = cfg.models.rho_link;
  spec.exposure_kind = cfg.models.exposure;
  return spec;
}

}  // namespace hetmed::cli
