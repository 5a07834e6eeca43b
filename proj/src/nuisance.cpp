#include "hetmed/nuisance.hpp"

#include <cmath>

#include "hetmed/errors.hpp"
#include "hetmed/moments.hpp"

namespace hetmed {

namespace {

constexpr double kRhoLevelEps = 1e-6;
constexpr int kMaxIter = 100;
constexpr int kMaxHalvings = 20;

double score_max_norm(const MatrixXd& design, const VectorXd& weighted_resid) {
  return (design.transpose() * weighted_resid / static_cast<double>(design.rows()))
      .cwiseAbs()
      .maxCoeff();
}

// Damped Newton for the logistic score mean(x (a - expit(x'eta))) = 0.
VectorXd fit_logistic(const MatrixXd& design, const VectorXd& a, const VectorXd* warm,
                      double tol) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  VectorXd eta = warm && warm->size() == p ? *warm : VectorXd::Zero(p);
  VectorXd pi(n), resid(n);
  auto eval = [&](const VectorXd& coef) {
    for (Eigen::Index i = 0; i < n; ++i) {
      pi(i) = apply_link(Link::logistic, design.row(i).dot(coef), nullptr);
    }
    resid = a - pi;
    return score_max_norm(design, resid);
  };
  double norm = eval(eta);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    if (norm <= tol) return eta;
    MatrixXd info = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      info.selfadjointView<Eigen::Lower>().rankUpdate(design.row(i).transpose(),
                                                      pi(i) * (1.0 - pi(i)));
    }
    Eigen::LDLT<MatrixXd> ldlt(info.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw RankDeficiencyError("logistic fit: singular information matrix");
    }
    const VectorXd step = ldlt.solve(design.transpose() * resid);
    double t = 1.0;
    const VectorXd base = eta;
    for (int half = 0;; ++half) {
      const double trial = eval(base + t * step);
      if (trial < norm) {
        eta = base + t * step;
        norm = trial;
        break;
      }
      if (half >= kMaxHalvings) {
        throw ConvergenceError("logistic fit: line search stalled");
      }
      t *= 0.5;
    }
  }
  throw ConvergenceError("logistic fit: no convergence after 100 iterations");
}

// Log-link block: mean(rho (c - rho) x) = 0 with c the per-row residual
// products. The moment is the stationarity condition of the nonlinear least
// squares 0.5 sum (c - rho)^2. A damped Gauss-Newton on that objective
// globalizes (the step system is positive definite and the direction always
// descends); once close it hands over to an undamped Newton on the score,
// whose quadratic convergence is not limited by the floating-point
// resolution of the objective.
VectorXd fit_rho_log(const MatrixXd& design, const VectorXd& c, double cbar,
                     const VectorXd* warm, double tol) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  VectorXd eta = VectorXd::Zero(p);
  if (warm && warm->size() == p) {
    eta = *warm;
  } else {
    eta(0) = std::log(std::max(kRhoLevelEps, cbar));
  }
  VectorXd rho(n), resid(n);
  auto eval = [&](const VectorXd& coef) {
    for (Eigen::Index i = 0; i < n; ++i) {
      rho(i) = apply_link(Link::log, design.row(i).dot(coef), nullptr);
    }
    resid = c - rho;
    return 0.5 * resid.squaredNorm();
  };
  auto score_norm = [&]() { return score_max_norm(design, rho.cwiseProduct(resid)); };

  double objective = eval(eta);
  constexpr double kPolishAt = 1e-4;
  for (int iter = 0; iter < 200 && score_norm() > kPolishAt; ++iter) {
    MatrixXd gn = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      gn.selfadjointView<Eigen::Lower>().rankUpdate(design.row(i).transpose(),
                                                    rho(i) * rho(i));
    }
    Eigen::LDLT<MatrixXd> ldlt(gn.selfadjointView<Eigen::Lower>());
    const VectorXd grad = design.transpose() * rho.cwiseProduct(resid);
    VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || grad.dot(step) <= 0.0) {
      step = grad;  // steepest descent when the GN system degenerates
    }
    double t = 1.0;
    const VectorXd base = eta;
    bool improved = false;
    for (int half = 0; half <= kMaxHalvings; ++half) {
      const double trial = eval(base + t * step);
      if (trial < objective) {
        eta = base + t * step;
        objective = trial;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;  // objective at floating-point resolution; polish below
  }

  // Newton polish on the score itself.
  eval(eta);
  double norm = score_norm();
  for (int iter = 0; iter < kMaxIter; ++iter) {
    if (norm <= tol) return eta;
    MatrixXd jac = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      jac.selfadjointView<Eigen::Lower>().rankUpdate(design.row(i).transpose(),
                                                     rho(i) * (c(i) - 2.0 * rho(i)));
    }
    jac /= static_cast<double>(n);
    const MatrixXd full = jac.selfadjointView<Eigen::Lower>();
    const VectorXd score = design.transpose() * rho.cwiseProduct(resid) / static_cast<double>(n);
    Eigen::FullPivLU<MatrixXd> lu(full);
    if (!lu.isInvertible()) {
      throw ConvergenceError("rho fit: singular Newton system near the solution");
    }
    const VectorXd step = -lu.solve(score);
    double t = 1.0;
    const VectorXd base = eta;
    bool improved = false;
    for (int half = 0; half <= kMaxHalvings; ++half) {
      eval(base + t * step);
      if (score_norm() < norm) {
        eta = base + t * step;
        norm = score_norm();
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      throw ConvergenceError("rho fit: line search stalled");
    }
  }
  throw ConvergenceError("rho fit: no convergence after 100 iterations");
}

}  // namespace

VectorXd ols_solve(const MatrixXd& design, const VectorXd& response) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    throw RankDeficiencyError("least squares: design is rank deficient");
  }
  return qr.solve(response);
}

NuisanceValues eval_nuisances(const EtaParams& eta, const Dataset& data, const ModelSpec& spec) {
  spec.validate(data);
  const MatrixXd xp = design_matrix(data, spec.pi_design);
  const MatrixXd xg = design_matrix(data, spec.g_design);
  const MatrixXd xr = design_matrix(data, spec.rho_design);
  const MatrixXd xh = design_matrix(data, spec.h_design);
  if (eta.eta1.size() != xp.cols() || eta.eta2.size() != xg.cols() ||
      eta.eta3.size() != xr.cols() || eta.eta4.size() != xh.cols()) {
    throw InputError("eval_nuisances: eta block dimensions do not match the designs");
  }
  NuisanceValues nv;
  nv.pi.resize(data.n());
  nv.rho.resize(data.n());
  nv.g_star = xg * eta.eta2;
  nv.h_star = xh * eta.eta4;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    nv.pi(i) = apply_link(spec.pi_link, xp.row(i).dot(eta.eta1), &nv.clamped);
    nv.rho(i) = apply_link(eta.rho_link_used, xr.row(i).dot(eta.eta3), &nv.clamped);
  }
  return nv;
}

namespace detail {

EtaParams fit_eta_blocks(const Dataset& data, const Theta& theta, const ModelSpec& spec,
                         const EtaParams* warm, double tol, const EtaBlockNeeds& needs) {
  data.validate();
  spec.validate(data);
  const MatrixXd xp = design_matrix(data, spec.pi_design);
  const MatrixXd xg = design_matrix(data, spec.g_design);
  const MatrixXd xr = design_matrix(data, spec.rho_design);
  const MatrixXd xh = design_matrix(data, spec.h_design);

  EtaParams eta;
  eta.profiled_at = theta;
  eta.eta1 = VectorXd::Zero(xp.cols());
  eta.eta2 = VectorXd::Zero(xg.cols());
  eta.eta3 = VectorXd::Zero(xr.cols());
  eta.eta4 = VectorXd::Zero(xh.cols());
  eta.rho_link_used = spec.rho_link;

  // eta1: theta-free exposure model.
  if (needs.eta1) {
    if (spec.pi_link == Link::logistic) {
      const VectorXd* w1 = warm ? &warm->eta1 : nullptr;
      eta.eta1 = fit_logistic(xp, data.a, w1, tol);
    } else {
      eta.eta1 = ols_solve(xp, data.a);
    }
  }

  // eta2, eta4: least squares of the theta-adjusted residuals.
  const double zeta = theta.zeta.value_or(0.0);
  const VectorXd outcome_target = data.y - theta.theta1 * data.m - theta.theta2 * data.a -
                                  zeta * data.a.cwiseProduct(data.m);
  if (needs.eta2 || needs.eta3) eta.eta2 = ols_solve(xg, outcome_target);
  const VectorXd mediator_target = data.m - theta.theta3 * data.a;
  if (needs.eta4 || needs.eta3) eta.eta4 = ols_solve(xh, mediator_target);

  // eta3: residual-product model. A log-link spec falls back to the identity
  // link when the mean residual product is not positive.
  if (needs.eta3) {
    const VectorXd c =
        (outcome_target - xg * eta.eta2).cwiseProduct(mediator_target - xh * eta.eta4);
    const double cbar = c.mean();
    if (spec.rho_link == Link::log && cbar > kRhoLevelEps) {
      const VectorXd* w3 =
          (warm && warm->rho_link_used == Link::log) ? &warm->eta3 : nullptr;
      eta.eta3 = fit_rho_log(xr, c, cbar, w3, tol);
      eta.rho_link_used = Link::log;
    } else {
      eta.eta3 = ols_solve(xr, c);
      eta.rho_link_used = Link::identity;
    }
  }
  return eta;
}

}  // namespace detail

EtaParams fit_eta_profile(const Dataset& data, const Theta& theta, const ModelSpec& spec,
                          const EtaParams* warm, double tol) {
  return detail::fit_eta_blocks(data, theta, spec, warm, tol, detail::EtaBlockNeeds{});
}

}  // namespace hetmed
