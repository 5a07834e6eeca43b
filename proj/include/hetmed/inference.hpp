#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetmed/estimators.hpp"
#include "hetmed/types.hpp"

namespace hetmed {

// Estimated covariance of the parameter estimates (already divided by n).
struct CovMatrix {
  MatrixXd matrix;
  std::vector<std::string> labels;
  Eigen::Index n = 0;
};

struct BPResult {
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
};

// Theta-block covariance of the estimator: the theta sub-block of the full
// stacked (theta, eta) M-estimation sandwich B^-1 M B^-T / n, which equals
// the influence-function form built from
// Phi = phi_tilde - E[d phi/d eta] E[d gamma/d eta]^-1 gamma by block
// elimination.
CovMatrix sandwich_cov(const Dataset& data, const SolveResult& result, const ModelSpec& spec);

// Delta-method standard error of the NIE theta1*theta3 per unit exposure
// change; cov is the per-n theta block.
double delta_nie(const Theta& theta, const CovMatrix& cov);

Interval wald_ci(double estimate, double se, double level);

// Covariance of B nonparametric bootstrap re-estimates. Replicate b draws
// from substream (seed, b); failed replicates are dropped and counted, and
// more than 5% dropped is an error. Results are independent of thread count.
CovMatrix bootstrap_cov(const Dataset& data, EstimatorKind estimator, const ModelSpec& spec,
                        int B, std::uint64_t seed, int threads = 1,
                        int* n_dropped = nullptr);

// Breusch-Pagan LM test using identical regressors (A, h-design) for the
// mediator mean and variance models. Default is the classic half-ESS form of
// the regression of squared standardized residuals; `studentized` switches to
// the n*R^2 variant.
BPResult breusch_pagan(const Dataset& data, const ModelSpec& spec, bool studentized = false);

// Assembles point estimates, delta-method standard errors and Wald intervals
// for one contrast from a converged fit and its theta covariance.
EffectReport effect_report(const Dataset& data, const ModelSpec& spec, const SolveResult& result,
                           const CovMatrix& cov, double contrast_from, double contrast_to,
                           double ci_level, VarianceSource source);

}  // namespace hetmed
