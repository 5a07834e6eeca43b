#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetmed/types.hpp"

namespace hetmed {

// Data-generating process:
//   X1, X2 ~ N(0,1) independent
//   U | X  ~ N(u_mean.(1,X1,X2), exp(u_logvar.(1,X1,X2)))   (0 when confounding_on = false)
//   A | X  ~ Bernoulli(expit(a_logit.(1,X1,X2)))
//   M = m0 + (m_a + eps) A + m_u U,   eps ~ N(0, eps_sd^2)
//   Y = y0 + y_a A + y_m M + interaction_zeta A M + y_u U
// Defaults give true NDE = 1 and NIE = 3 for a change of exposure from 0 to 1.
struct DgpConfig {
  Eigen::Index n = 800;
  std::uint64_t seed = 1;
  bool confounding_on = true;
  double interaction_zeta = 0.0;
  Eigen::Vector3d u_mean{1.0, 1.0, -0.3};
  Eigen::Vector3d u_logvar{-1.2, 0.8, -0.2};
  Eigen::Vector3d a_logit{-1.0, 1.5, -0.3};
  double m0 = 1.0, m_a = 1.5, m_u = 0.5, eps_sd = 1.0;
  double y0 = 1.0, y_a = 1.0, y_m = 2.0, y_u = 1.0;

  Theta true_theta() const;
  // True (NDE, NIE) for a change of exposure from `from` to `to`.
  std::pair<double, double> true_effects(double from, double to) const;
  void validate() const;
};

// Latent draws kept out of Dataset so no estimation path can touch them.
struct LatentRecord {
  VectorXd u;
  VectorXd eps;
};

struct GeneratedData {
  Dataset data;  // columns of x: (1, X1, X2)
  LatentRecord latent;
};

GeneratedData generate_dataset(const DgpConfig& cfg);

// True nuisance values pi(X), g*(X), rho(X), h*(X) implied by the DGP,
// evaluated on the rows of `data`. Test/oracle use only; estimators always
// work from fitted values.
NuisanceValues oracle_nuisance_values(const DgpConfig& cfg, const Dataset& data);

// True nuisance coefficients on the raw design (1, X1, X2). The rho block is
// log-linear when y_u*m_u > 0 and confounding is on, otherwise identically 0
// under the identity link.
EtaParams oracle_eta(const DgpConfig& cfg);

// Replaces X1, X2 (columns 1 and 2) with sample-standardized versions of
// exp(0.5 X1) and 10 + X2/(1 + exp(X1)). The intercept is untouched.
MatrixXd misspecify_covariates(const MatrixXd& x);

enum class Scenario { i, ii, iii, iv };

Scenario scenario_from_name(const std::string& name);
std::string scenario_name(Scenario s);

// Appends the two misspecified columns to (1, X1, X2), giving
// (1, X1, X2, T1, T2) so correct and misspecified designs can coexist.
MatrixXd augment_with_misspecified(const MatrixXd& x);

// Design wiring for the augmented covariate matrix. A nuisance whose model is
// correct in the scenario gets columns {0,1,2}; a misspecified one gets
// {0,3,4}:
//   (i)   all correct
//   (ii)  pi, g correct; rho, h misspecified
//   (iii) pi, h correct; g, rho misspecified
//   (iv)  g, rho, h correct; pi misspecified
ModelSpec scenario_spec(Scenario s);

struct McCell {
  double bias = 0.0;
  double sd = 0.0;         // Monte Carlo SD of the point estimates
  double sqrt_evar = 0.0;  // sqrt of the mean of the variance estimates
  double cov90 = 0.0;
  double cov95 = 0.0;
};

struct McEstimatorSummary {
  EstimatorKind kind = EstimatorKind::MR;
  McCell nde;
  McCell nie;
  int n_failed = 0;
};

struct McSummary {
  Scenario scenario = Scenario::i;
  Eigen::Index n = 0;
  int replications = 0;
  std::uint64_t master_seed = 0;
  double true_nde = 1.0;
  double true_nie = 3.0;
  std::vector<McEstimatorSummary> estimators;
};

// Runs `replications` independent replicates; replicate r draws from the
// substream (master_seed, r), so results do not depend on thread count or
// scheduling. Sandwich variances and 90/95% Wald intervals are accumulated
// per estimator. Throws if more than 2% of replicates fail for any
// estimator.
McSummary run_monte_carlo(const DgpConfig& dgp, Scenario scenario,
                          const std::vector<EstimatorKind>& estimators,
                          int replications, std::uint64_t master_seed,
                          int threads = 1);

std::string mc_summary_json(const McSummary& s);
std::string mc_summary_table(const McSummary& s);

}  // namespace hetmed
