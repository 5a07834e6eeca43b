#pragma once

#include <optional>

#include "hetmed/types.hpp"

namespace hetmed {

enum class JacobianMode { analytic, central_difference };
enum class InitMode { bk_warm_start, zeros, user };

struct SolveOptions {
  double tol = 1e-8;      // max-norm of the stacked empirical moments
  int max_iter = 100;
  JacobianMode jacobian = JacobianMode::analytic;
  InitMode init = InitMode::bk_warm_start;
  std::optional<Theta> init_theta;  // used when init == user
};

// Row weights d(X) for the interaction estimator. The moment is the 4x3
// matrix [I3; (0, s_i, 0)] applied to phi_tilde; the default s_i is the first
// non-constant covariate centered at its sample mean, which lets variation of
// the bilinear component with X identify zeta.
struct InteractionWeights {
  enum class Kind { x1_centered, custom };
  Kind kind = Kind::x1_centered;
  VectorXd custom;  // per-row s_i when kind == custom
};

struct SolveResult {
  Theta theta;
  EtaParams eta;
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  // Reciprocal condition number of the bread matrix (the theta-block Schur
  // complement of the stacked Jacobian).
  double condition_estimate = 0.0;
  EstimatorKind kind = EstimatorKind::MR;
  InteractionWeights weights;  // populated for MRInteraction
};

// Multiply robust augmented G-estimator: one stacked Newton solve of the
// empirical phi_tilde and gamma equations over (theta, eta).
SolveResult solve_mr(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts = {});

// Propensity-score estimator: solves all three components of
// mean{(A - pi) psi(O; theta, h*)} = 0 with pi and h* fitted parametrically.
SolveResult solve_ps(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts = {});

// Product-of-coefficients estimator: least squares of Y on (M, A, g-design)
// and of M on (A, h-design). Closed form; ignores unmeasured confounding.
SolveResult solve_bk(const Dataset& data, const ModelSpec& spec);

// Augmented G-estimator under sequential ignorability (no latent U); biased
// under mediator-outcome confounding through collider stratification on M.
SolveResult solve_hines(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts = {});

// Interaction extension: 4-parameter theta (theta1, theta2, theta3, zeta)
// solved from the d(X)-weighted augmented moments.
SolveResult solve_mr_interaction(const Dataset& data, const ModelSpec& spec,
                                 const InteractionWeights& weights = {},
                                 const SolveOptions& opts = {});

SolveResult solve(EstimatorKind kind, const Dataset& data, const ModelSpec& spec,
                  const SolveOptions& opts = {});

// Max-norm of the stacked empirical moments at (theta, eta): the convergence
// certificate, re-checkable after the fact.
double moment_residual(const Dataset& data, const ModelSpec& spec, const SolveResult& result);

}  // namespace hetmed
