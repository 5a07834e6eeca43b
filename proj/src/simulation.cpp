#include "hetmed/simulation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "hetmed/errors.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/moments.hpp"
#include "hetmed/parallel.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/special.hpp"

namespace hetmed {

Theta DgpConfig::true_theta() const {
  Theta t;
  t.theta1 = y_m;
  t.theta2 = y_a;
  t.theta3 = m_a;
  if (interaction_zeta != 0.0) t.zeta = interaction_zeta;
  return t;
}

std::pair<double, double> DgpConfig::true_effects(double from, double to) const {
  const Theta t = true_theta();
  if (!t.zeta) return effects_from_theta(t, from, to);
  // E h*(X) = m0 + m_u E[U]; X1, X2 have mean zero so E[U] is the intercept.
  const double mean_h = m0 + (confounding_on ? m_u * u_mean(0) : 0.0);
  return effects_from_theta(t, from, to, mean_h);
}

void DgpConfig::validate() const {
  if (n < 50) throw InputError("DgpConfig: need n >= 50");
  if (eps_sd < 0.0) throw InputError("DgpConfig: eps_sd must be >= 0");
}

GeneratedData generate_dataset(const DgpConfig& cfg) {
  cfg.validate();
  RngStream rng(cfg.seed);
  const Eigen::Index n = cfg.n;
  VectorXd y(n), a(n), m(n);
  MatrixXd x(n, 3);
  LatentRecord latent;
  latent.u.resize(n);
  latent.eps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Fixed draw order per row: X1, X2, U-normal, A-uniform, eps-normal.
    const double x1 = rng.normal();
    const double x2 = rng.normal();
    const double zu = rng.normal();
    const double pa = expit(cfg.a_logit(0) + cfg.a_logit(1) * x1 + cfg.a_logit(2) * x2);
    const double ai = rng.bernoulli(pa) ? 1.0 : 0.0;
    const double eps = cfg.eps_sd * rng.normal();
    double u = 0.0;
    if (cfg.confounding_on) {
      const double mu = cfg.u_mean(0) + cfg.u_mean(1) * x1 + cfg.u_mean(2) * x2;
      const double lv = cfg.u_logvar(0) + cfg.u_logvar(1) * x1 + cfg.u_logvar(2) * x2;
      u = mu + std::exp(0.5 * lv) * zu;
    }
    const double mi = cfg.m0 + (cfg.m_a + eps) * ai + cfg.m_u * u;
    const double yi =
        cfg.y0 + cfg.y_a * ai + cfg.y_m * mi + cfg.interaction_zeta * ai * mi + cfg.y_u * u;
    x(i, 0) = 1.0;
    x(i, 1) = x1;
    x(i, 2) = x2;
    a(i) = ai;
    m(i) = mi;
    y(i) = yi;
    latent.u(i) = u;
    latent.eps(i) = eps;
  }
  return {Dataset(std::move(y), std::move(a), std::move(m), std::move(x)), std::move(latent)};
}

NuisanceValues oracle_nuisance_values(const DgpConfig& cfg, const Dataset& data) {
  NuisanceValues nv;
  const Eigen::Index n = data.n();
  nv.pi.resize(n);
  nv.g_star.resize(n);
  nv.rho.resize(n);
  nv.h_star.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = data.x(i, 1), x2 = data.x(i, 2);
    nv.pi(i) = expit(cfg.a_logit(0) + cfg.a_logit(1) * x1 + cfg.a_logit(2) * x2);
    double eu = 0.0, vu = 0.0;
    if (cfg.confounding_on) {
      eu = cfg.u_mean(0) + cfg.u_mean(1) * x1 + cfg.u_mean(2) * x2;
      vu = std::exp(cfg.u_logvar(0) + cfg.u_logvar(1) * x1 + cfg.u_logvar(2) * x2);
    }
    nv.g_star(i) = cfg.y0 + cfg.y_u * eu;
    nv.h_star(i) = cfg.m0 + cfg.m_u * eu;
    nv.rho(i) = cfg.y_u * cfg.m_u * vu;
  }
  return nv;
}

EtaParams oracle_eta(const DgpConfig& cfg) {
  EtaParams eta;
  eta.profiled_at = cfg.true_theta();
  eta.eta1 = cfg.a_logit;
  if (cfg.confounding_on) {
    eta.eta2 = Eigen::Vector3d(cfg.y0 + cfg.y_u * cfg.u_mean(0), cfg.y_u * cfg.u_mean(1),
                               cfg.y_u * cfg.u_mean(2));
    eta.eta4 = Eigen::Vector3d(cfg.m0 + cfg.m_u * cfg.u_mean(0), cfg.m_u * cfg.u_mean(1),
                               cfg.m_u * cfg.u_mean(2));
    const double level = cfg.y_u * cfg.m_u;
    if (level <= 0.0) {
      throw InputError("oracle_eta: rho is not log-linear when y_u*m_u <= 0");
    }
    eta.eta3 = Eigen::Vector3d(std::log(level) + cfg.u_logvar(0), cfg.u_logvar(1),
                               cfg.u_logvar(2));
    eta.rho_link_used = Link::log;
  } else {
    eta.eta2 = Eigen::Vector3d(cfg.y0, 0.0, 0.0);
    eta.eta4 = Eigen::Vector3d(cfg.m0, 0.0, 0.0);
    eta.eta3 = Eigen::Vector3d::Zero();
    eta.rho_link_used = Link::identity;
  }
  return eta;
}

MatrixXd misspecify_covariates(const MatrixXd& x) {
  if (x.cols() < 3) {
    throw InputError("misspecify_covariates: expected columns (1, X1, X2)");
  }
  const Eigen::Index n = x.rows();
  MatrixXd out = x;
  VectorXd t1(n), t2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t1(i) = std::exp(0.5 * x(i, 1));
    t2(i) = 10.0 + x(i, 2) / (1.0 + std::exp(x(i, 1)));
  }
  auto standardize = [n](VectorXd& v) {
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (sd <= 0.0) {
      throw InputError("misspecify_covariates: transformed column has zero sample SD");
    }
    v = (v.array() - mean) / sd;
  };
  standardize(t1);
  standardize(t2);
  out.col(1) = t1;
  out.col(2) = t2;
  return out;
}

MatrixXd augment_with_misspecified(const MatrixXd& x) {
  const MatrixXd mis = misspecify_covariates(x);
  MatrixXd out(x.rows(), 5);
  out.leftCols(3) = x.leftCols(3);
  out.col(3) = mis.col(1);
  out.col(4) = mis.col(2);
  return out;
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "i") return Scenario::i;
  if (name == "ii") return Scenario::ii;
  if (name == "iii") return Scenario::iii;
  if (name == "iv") return Scenario::iv;
  throw InputError("unknown scenario '" + name + "' (expected i, ii, iii or iv)");
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::i: return "i";
    case Scenario::ii: return "ii";
    case Scenario::iii: return "iii";
    case Scenario::iv: return "iv";
  }
  return "?";
}

ModelSpec scenario_spec(Scenario s) {
  const std::vector<int> correct{0, 1, 2};
  const std::vector<int> wrong{0, 3, 4};
  ModelSpec spec;
  spec.pi_design = (s == Scenario::iv) ? wrong : correct;
  spec.g_design = (s == Scenario::iii) ? wrong : correct;
  spec.rho_design = (s == Scenario::i || s == Scenario::iv) ? correct : wrong;
  spec.h_design = (s == Scenario::ii) ? wrong : correct;
  return spec;
}

namespace {

struct RepCell {
  bool ok = false;
  double nde = 0.0, nie = 0.0;
  double var_nde = 0.0, var_nie = 0.0;
};

McCell summarize(const std::vector<RepCell>& cells, bool nie, double truth, double z90,
                 double z95) {
  double sum = 0.0, sum_var = 0.0;
  int k = 0;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    sum += nie ? c.nie : c.nde;
    sum_var += nie ? c.var_nie : c.var_nde;
    ++k;
  }
  const double mean = sum / k;
  double ss = 0.0;
  int hit90 = 0, hit95 = 0;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    const double est = nie ? c.nie : c.nde;
    const double se = std::sqrt(nie ? c.var_nie : c.var_nde);
    ss += (est - mean) * (est - mean);
    if (std::fabs(est - truth) <= z90 * se) ++hit90;
    if (std::fabs(est - truth) <= z95 * se) ++hit95;
  }
  McCell out;
  out.bias = mean - truth;
  out.sd = k > 1 ? std::sqrt(ss / (k - 1)) : 0.0;
  out.sqrt_evar = std::sqrt(sum_var / k);
  out.cov90 = static_cast<double>(hit90) / k;
  out.cov95 = static_cast<double>(hit95) / k;
  return out;
}

}  // namespace

McSummary run_monte_carlo(const DgpConfig& dgp, Scenario scenario,
                          const std::vector<EstimatorKind>& estimators, int replications,
                          std::uint64_t master_seed, int threads) {
  if (replications < 2) throw InputError("run_monte_carlo: need at least 2 replications");
  if (estimators.empty()) throw InputError("run_monte_carlo: no estimators requested");
  dgp.validate();

  const auto [true_nde, true_nie] = dgp.true_effects(0.0, 1.0);
  const ModelSpec spec = scenario_spec(scenario);
  const std::size_t ne = estimators.size();
  std::vector<std::vector<RepCell>> cells(ne, std::vector<RepCell>(replications));

  parallel_for(static_cast<std::size_t>(replications), threads, [&](std::size_t r) {
    DgpConfig cfg = dgp;
    cfg.seed = RngStream::substream(master_seed, r).next_u64();
    const GeneratedData gen = generate_dataset(cfg);
    const Dataset aug(gen.data.y, gen.data.a, gen.data.m,
                      augment_with_misspecified(gen.data.x));
    for (std::size_t e = 0; e < ne; ++e) {
      RepCell& cell = cells[e][r];
      try {
        const SolveResult fit = solve(estimators[e], aug, spec);
        const CovMatrix cov = sandwich_cov(aug, fit, spec);
        const EffectReport rep =
            effect_report(aug, spec, fit, cov, 0.0, 1.0, 0.95, VarianceSource::sandwich);
        cell.nde = rep.nde;
        cell.nie = rep.nie;
        cell.var_nde = rep.se_nde * rep.se_nde;
        cell.var_nie = rep.se_nie * rep.se_nie;
        cell.ok = true;
      } catch (const Error&) {
        cell.ok = false;
      }
    }
  });

  const double z90 = norm_quantile(0.95);
  const double z95 = norm_quantile(0.975);
  McSummary out;
  out.scenario = scenario;
  out.n = dgp.n;
  out.replications = replications;
  out.master_seed = master_seed;
  out.true_nde = true_nde;
  out.true_nie = true_nie;
  for (std::size_t e = 0; e < ne; ++e) {
    int failed = 0;
    for (const auto& c : cells[e]) {
      if (!c.ok) ++failed;
    }
    if (failed * 50 > replications) {
      throw ConvergenceError("run_monte_carlo: more than 2% of replicates failed for " +
                             estimator_name(estimators[e]) + " (" + std::to_string(failed) +
                             " of " + std::to_string(replications) + ")");
    }
    McEstimatorSummary s;
    s.kind = estimators[e];
    s.n_failed = failed;
    s.nde = summarize(cells[e], false, true_nde, z90, z95);
    s.nie = summarize(cells[e], true, true_nie, z90, z95);
    out.estimators.push_back(std::move(s));
  }
  return out;
}

std::string mc_summary_json(const McSummary& s) {
  nlohmann::json j;
  j["scenario"] = scenario_name(s.scenario);
  j["n"] = s.n;
  j["replications"] = s.replications;
  j["master_seed"] = s.master_seed;
  j["true_nde"] = s.true_nde;
  j["true_nie"] = s.true_nie;
  j["estimators"] = nlohmann::json::array();
  for (const auto& e : s.estimators) {
    nlohmann::json row;
    row["estimator"] = estimator_name(e.kind);
    row["n_failed"] = e.n_failed;
    row["n_used"] = s.replications - e.n_failed;
    auto cell = [](const McCell& c) {
      return nlohmann::json{{"bias", c.bias},
                            {"sd", c.sd},
                            {"sqrt_evar", c.sqrt_evar},
                            {"cov90", c.cov90},
                            {"cov95", c.cov95}};
    };
    row["nde"] = cell(e.nde);
    row["nie"] = cell(e.nie);
    j["estimators"].push_back(std::move(row));
  }
  return j.dump(2);
}

std::string mc_summary_table(const McSummary& s) {
  std::ostringstream os;
  os << "Scenario (" << scenario_name(s.scenario) << "), n=" << s.n << ", "
     << s.replications << " replicates, true NDE=" << s.true_nde << " NIE=" << s.true_nie
     << "\n";
  os << std::setw(12) << " ";
  for (const auto& e : s.estimators) os << std::setw(9) << estimator_name(e.kind);
  os << "\n";
  auto block = [&](const char* label, auto pick) {
    os << label << "\n";
    const char* rows[5] = {"Bias", "sqrt(Var)", "sqrt(EVar)", "Cov90", "Cov95"};
    for (int r = 0; r < 5; ++r) {
      os << "  " << std::setw(10) << std::left << rows[r] << std::right;
      for (const auto& e : s.estimators) {
        const McCell& c = pick(e);
        const double v[5] = {c.bias, c.sd, c.sqrt_evar, c.cov90, c.cov95};
        os << std::setw(9) << std::fixed << std::setprecision(3) << v[r];
      }
      os << "\n";
    }
  };
  block("NDE", [](const McEstimatorSummary& e) -> const McCell& { return e.nde; });
  block("NIE", [](const McEstimatorSummary& e) -> const McCell& { return e.nie; });
  for (const auto& e : s.estimators) {
    if (e.n_failed > 0) {
      os << "note: " << estimator_name(e.kind) << " dropped " << e.n_failed
         << " non-converged replicates\n";
    }
  }
  return os.str();
}

}  // namespace hetmed
