#pragma once

#include "hetmed/types.hpp"

namespace hetmed {

// Per-row link-transformed linear predictors of the four working models.
NuisanceValues eval_nuisances(const EtaParams& eta, const Dataset& data, const ModelSpec& spec);

// Solves the empirical nuisance score equations 0 = mean gamma(O; theta, eta)
// for eta at a fixed theta. Blocks are solved in order eta1 (theta-free),
// eta2, eta4 (least squares of the theta-adjusted residuals), then eta3
// (damped Newton on the log-link block, or least squares when the mean
// residual product is non-positive and the block falls back to the identity
// link). The returned eta satisfies max-norm(mean gamma) <= tol.
//
// Passing the previous solution as `warm` makes the fit a fixed point: a
// warm start that already satisfies the equations is returned unchanged.
EtaParams fit_eta_profile(const Dataset& data, const Theta& theta, const ModelSpec& spec,
                          const EtaParams* warm = nullptr, double tol = 1e-8);

// Ordinary least squares with a rank check; shared by the nuisance blocks
// and the product-of-coefficients estimator.
VectorXd ols_solve(const MatrixXd& design, const VectorXd& response);

namespace detail {

struct EtaBlockNeeds {
  bool eta1 = true;
  bool eta2 = true;
  bool eta3 = true;
  bool eta4 = true;
};

// Block-selective version of fit_eta_profile so estimators that do not use a
// nuisance never depend on its fit succeeding. Unrequested blocks come back
// as zero vectors of the design width.
EtaParams fit_eta_blocks(const Dataset& data, const Theta& theta, const ModelSpec& spec,
                         const EtaParams* warm, double tol, const EtaBlockNeeds& needs);

}  // namespace detail

}  // namespace hetmed
