#include "hetmed/estimators.hpp"

#include <cmath>

#include "hetmed/errors.hpp"
#include "hetmed/moment_stack.hpp"
#include "hetmed/moments.hpp"
#include "hetmed/nuisance.hpp"

namespace hetmed {

namespace {

constexpr int kMaxHalvings = 20;
constexpr double kCondFloor = 1e-10;
// Residuals at this level mean the moments vanish identically (an exact fit),
// not that a flat direction was papered over; such fits are returned even
// when the bread is singular.
constexpr double kExactFitResidual = 1e-12;

VectorXd resolve_weights(const Dataset& data, const InteractionWeights& weights) {
  if (weights.kind == InteractionWeights::Kind::custom) {
    if (weights.custom.size() != data.n()) {
      throw InputError("interaction weights: custom vector must have one entry per row");
    }
    return weights.custom;
  }
  if (data.p() < 2) {
    throw InputError("interaction weights: need a non-constant covariate column");
  }
  const VectorXd x1 = data.x.col(1);
  return x1.array() - x1.mean();
}

double rcond(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smax > 0.0) || !std::isfinite(smax)) return 0.0;
  return smin / smax;
}

MatrixXd central_difference_jacobian(const MomentStack& stack, const VectorXd& beta) {
  const int k = stack.dim();
  MatrixXd jac(k, k);
  VectorXd plus(k), minus(k), b = beta;
  for (int j = 0; j < k; ++j) {
    const double h = 1e-6 * (1.0 + std::fabs(beta(j)));
    b(j) = beta(j) + h;
    stack.eval(b, &plus, nullptr, nullptr);
    b(j) = beta(j) - h;
    stack.eval(b, &minus, nullptr, nullptr);
    b(j) = beta(j);
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

struct NewtonOutcome {
  VectorXd beta;
  int iterations = 0;
  double final_residual = 0.0;
  MatrixXd mean_jac;
};

NewtonOutcome newton_solve(const MomentStack& stack, VectorXd beta, const SolveOptions& opts) {
  if (opts.tol <= 0.0 || opts.max_iter < 1) {
    throw InputError("SolveOptions: tol must be > 0 and max_iter >= 1");
  }
  VectorXd g(stack.dim());
  MatrixXd jac(stack.dim(), stack.dim());
  auto residual = [&](const VectorXd& b, VectorXd& out) {
    stack.eval(b, &out, nullptr, nullptr);
    return out.cwiseAbs().maxCoeff();
  };

  double norm = residual(beta, g);
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    if (opts.jacobian == JacobianMode::analytic) {
      stack.eval(beta, nullptr, &jac, nullptr);
    } else {
      jac = central_difference_jacobian(stack, beta);
    }
    if (norm <= opts.tol) {
      return {beta, iter, norm, jac};
    }
    if (iter == opts.max_iter) break;

    // Thresholded SVD solve keeps the step finite in flat directions.
    Eigen::JacobiSVD<MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-14);
    const VectorXd step = svd.solve(-g);
    if (!step.allFinite()) {
      throw ConvergenceError("solver: Newton step is not finite");
    }
    double t = 1.0;
    bool improved = false;
    VectorXd trial_g(stack.dim());
    for (int half = 0; half <= kMaxHalvings; ++half) {
      const VectorXd trial = beta + t * step;
      const double trial_norm = residual(trial, trial_g);
      if (trial_norm < norm) {
        beta = trial;
        norm = trial_norm;
        g = trial_g;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      if (rcond(stack.theta_bread(jac)) < kCondFloor) {
        throw WeakIdentificationError(
            "solver: stalled on a nearly singular bread matrix; the data show too little "
            "variation of var(M|A,X) with A for the heteroskedasticity condition to "
            "identify theta");
      }
      throw ConvergenceError("solver: line search failed to reduce the moment residual");
    }
  }
  throw ConvergenceError("solver: no convergence within max_iter iterations");
}

SolveResult finish(const Dataset& data, const MomentStack& stack, const NewtonOutcome& out,
                   EstimatorKind kind, const InteractionWeights* weights) {
  SolveResult res;
  stack.unpack(out.beta, &res.theta, &res.eta);
  res.converged = true;
  res.iterations = out.iterations;
  res.final_residual = out.final_residual;
  res.condition_estimate = rcond(stack.theta_bread(out.mean_jac));
  res.kind = kind;
  if (weights) res.weights = *weights;
  if (res.condition_estimate < kCondFloor && res.final_residual > kExactFitResidual) {
    throw WeakIdentificationError(
        "solver: bread matrix condition " + std::to_string(res.condition_estimate) +
        " is below 1e-10; var(M|A,X) varies too little with A to identify theta");
  }
  (void)data;
  return res;
}

// Least-squares warm start; with_interaction adds the A*M column.
Theta bk_theta(const Dataset& data, const ModelSpec& spec, bool with_interaction) {
  const MatrixXd xg = design_matrix(data, spec.g_design);
  const MatrixXd xh = design_matrix(data, spec.h_design);
  const int extra = with_interaction ? 3 : 2;
  MatrixXd xout(data.n(), extra + xg.cols());
  xout.col(0) = data.m;
  xout.col(1) = data.a;
  if (with_interaction) xout.col(2) = data.a.cwiseProduct(data.m);
  xout.rightCols(xg.cols()) = xg;
  const VectorXd bout = ols_solve(xout, data.y);

  MatrixXd xmed(data.n(), 1 + xh.cols());
  xmed.col(0) = data.a;
  xmed.rightCols(xh.cols()) = xh;
  const VectorXd bmed = ols_solve(xmed, data.m);

  Theta theta;
  theta.theta1 = bout(0);
  theta.theta2 = bout(1);
  theta.theta3 = bmed(0);
  if (with_interaction) theta.zeta = bout(2);
  return theta;
}

Theta initial_theta(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts,
                    bool with_interaction) {
  switch (opts.init) {
    case InitMode::bk_warm_start:
      return bk_theta(data, spec, with_interaction);
    case InitMode::zeros: {
      Theta t;
      if (with_interaction) t.zeta = 0.0;
      return t;
    }
    case InitMode::user:
      if (!opts.init_theta) throw InputError("SolveOptions: init == user needs init_theta");
      if (with_interaction != opts.init_theta->zeta.has_value()) {
        throw InputError("SolveOptions: init_theta.zeta presence does not match the model");
      }
      return *opts.init_theta;
  }
  throw InputError("SolveOptions: bad init mode");
}

SolveResult solve_stacked(const Dataset& data, const ModelSpec& spec, EstimatorKind kind,
                          const SolveOptions& opts, const InteractionWeights* weights) {
  data.validate();
  spec.validate(data);
  const bool interaction = kind == EstimatorKind::MRInteraction;
  const Theta theta0 = initial_theta(data, spec, opts, interaction);
  detail::EtaBlockNeeds needs;
  needs.eta2 = kind != EstimatorKind::PS;
  needs.eta3 = kind == EstimatorKind::MR || interaction;
  VectorXd dw;
  const VectorXd* dw_ptr = nullptr;
  if (interaction) {
    dw = resolve_weights(data, *weights);
    dw_ptr = &dw;
  }

  if (!needs.eta3 || spec.rho_link == Link::identity) {
    const EtaParams eta0 = detail::fit_eta_blocks(data, theta0, spec, nullptr, opts.tol, needs);
    MomentStack stack(data, spec, kind, eta0.rho_link_used, dw_ptr);
    const NewtonOutcome out = newton_solve(stack, stack.pack(theta0, eta0), opts);
    return finish(data, stack, out, kind, weights);
  }

  // Log-link rho: the level of the residual products is not estimable at the
  // least-squares warm start (its residuals are orthogonal to the designs by
  // construction), so solve under the identity link first and decide the link
  // at that solution.
  ModelSpec spec_id = spec;
  spec_id.rho_link = Link::identity;
  const EtaParams eta0 = detail::fit_eta_blocks(data, theta0, spec_id, nullptr, opts.tol, needs);
  MomentStack stack_id(data, spec, kind, Link::identity, dw_ptr);
  const NewtonOutcome out_id = newton_solve(stack_id, stack_id.pack(theta0, eta0), opts);
  Theta theta_id;
  EtaParams eta_id;
  stack_id.unpack(out_id.beta, &theta_id, &eta_id);

  const EtaParams eta1 =
      detail::fit_eta_blocks(data, theta_id, spec, &eta_id, opts.tol, needs);
  if (eta1.rho_link_used != Link::log) {
    return finish(data, stack_id, out_id, kind, weights);
  }
  MomentStack stack(data, spec, kind, Link::log, dw_ptr);
  const NewtonOutcome out = newton_solve(stack, stack.pack(theta_id, eta1), opts);
  return finish(data, stack, out, kind, weights);
}

}  // namespace

SolveResult solve_mr(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  return solve_stacked(data, spec, EstimatorKind::MR, opts, nullptr);
}

SolveResult solve_ps(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  return solve_stacked(data, spec, EstimatorKind::PS, opts, nullptr);
}

SolveResult solve_hines(const Dataset& data, const ModelSpec& spec, const SolveOptions& opts) {
  return solve_stacked(data, spec, EstimatorKind::Hines, opts, nullptr);
}

SolveResult solve_mr_interaction(const Dataset& data, const ModelSpec& spec,
                                 const InteractionWeights& weights, const SolveOptions& opts) {
  return solve_stacked(data, spec, EstimatorKind::MRInteraction, opts, &weights);
}

SolveResult solve_bk(const Dataset& data, const ModelSpec& spec) {
  data.validate();
  spec.validate(data);
  const MatrixXd xg = design_matrix(data, spec.g_design);
  const MatrixXd xh = design_matrix(data, spec.h_design);

  MatrixXd xout(data.n(), 2 + xg.cols());
  xout.col(0) = data.m;
  xout.col(1) = data.a;
  xout.rightCols(xg.cols()) = xg;
  const VectorXd bout = ols_solve(xout, data.y);

  MatrixXd xmed(data.n(), 1 + xh.cols());
  xmed.col(0) = data.a;
  xmed.rightCols(xh.cols()) = xh;
  const VectorXd bmed = ols_solve(xmed, data.m);

  SolveResult res;
  res.kind = EstimatorKind::BK;
  res.theta.theta1 = bout(0);
  res.theta.theta2 = bout(1);
  res.theta.theta3 = bmed(0);
  res.eta.eta2 = bout.tail(xg.cols());
  res.eta.eta4 = bmed.tail(xh.cols());
  res.eta.profiled_at = res.theta;
  res.eta.rho_link_used = Link::identity;
  res.converged = true;
  res.iterations = 0;

  MomentStack stack(data, spec, EstimatorKind::BK, Link::identity, nullptr);
  VectorXd g;
  MatrixXd jac;
  stack.eval(stack.pack(res.theta, res.eta), &g, &jac, nullptr);
  res.final_residual = g.cwiseAbs().maxCoeff();
  res.condition_estimate = rcond(stack.theta_bread(jac));
  return res;
}

SolveResult solve(EstimatorKind kind, const Dataset& data, const ModelSpec& spec,
                  const SolveOptions& opts) {
  switch (kind) {
    case EstimatorKind::MR: return solve_mr(data, spec, opts);
    case EstimatorKind::PS: return solve_ps(data, spec, opts);
    case EstimatorKind::BK: return solve_bk(data, spec);
    case EstimatorKind::Hines: return solve_hines(data, spec, opts);
    case EstimatorKind::MRInteraction: return solve_mr_interaction(data, spec, {}, opts);
  }
  throw InputError("solve: unknown estimator kind");
}

double moment_residual(const Dataset& data, const ModelSpec& spec, const SolveResult& result) {
  VectorXd dw;
  const VectorXd* dw_ptr = nullptr;
  if (result.kind == EstimatorKind::MRInteraction) {
    dw = resolve_weights(data, result.weights);
    dw_ptr = &dw;
  }
  MomentStack stack(data, spec, result.kind, result.eta.rho_link_used, dw_ptr);
  VectorXd g;
  stack.eval(stack.pack(result.theta, result.eta), &g, nullptr, nullptr);
  return g.cwiseAbs().maxCoeff();
}

}  // namespace hetmed
