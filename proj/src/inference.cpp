#include "hetmed/inference.hpp"

#include <cmath>
#include <optional>

#include "hetmed/errors.hpp"
#include "hetmed/moment_stack.hpp"
#include "hetmed/moments.hpp"
#include "hetmed/nuisance.hpp"
#include "hetmed/parallel.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/special.hpp"

namespace hetmed {

namespace {

std::vector<std::string> theta_labels(int nt) {
  std::vector<std::string> labels{"theta1", "theta2", "theta3"};
  if (nt == 4) labels.push_back("zeta");
  return labels;
}

VectorXd resolve_interaction_weights(const Dataset& data, const InteractionWeights& weights) {
  if (weights.kind == InteractionWeights::Kind::custom) {
    if (weights.custom.size() != data.n()) {
      throw InputError("interaction weights: custom vector must have one entry per row");
    }
    return weights.custom;
  }
  const VectorXd x1 = data.x.col(1);
  return x1.array() - x1.mean();
}

}  // namespace

CovMatrix sandwich_cov(const Dataset& data, const SolveResult& result, const ModelSpec& spec) {
  if (!result.converged) {
    throw InputError("sandwich_cov: needs a converged fit");
  }
  VectorXd dw;
  const VectorXd* dw_ptr = nullptr;
  if (result.kind == EstimatorKind::MRInteraction) {
    dw = resolve_interaction_weights(data, result.weights);
    dw_ptr = &dw;
  }
  MomentStack stack(data, spec, result.kind, result.eta.rho_link_used, dw_ptr);
  const VectorXd beta = stack.pack(result.theta, result.eta);
  MatrixXd bread, meat;
  stack.eval(beta, nullptr, &bread, &meat);

  Eigen::FullPivLU<MatrixXd> lu(bread);
  if (!lu.isInvertible()) {
    throw SingularBreadError("sandwich_cov: singular bread matrix");
  }
  const MatrixXd binv = lu.inverse();
  MatrixXd full = binv * meat * binv.transpose() / static_cast<double>(data.n());
  full = 0.5 * (full + full.transpose()).eval();

  const int nt = stack.n_theta();
  CovMatrix cov;
  cov.matrix = full.topLeftCorner(nt, nt);
  cov.labels = theta_labels(nt);
  cov.n = data.n();
  return cov;
}

double delta_nie(const Theta& theta, const CovMatrix& cov) {
  if (cov.matrix.rows() < 3 || cov.matrix.cols() < 3) {
    throw InputError("delta_nie: covariance must cover (theta1, theta2, theta3)");
  }
  Eigen::Vector3d grad(theta.theta3, 0.0, theta.theta1);
  const double q = grad.dot(cov.matrix.topLeftCorner(3, 3) * grad);
  if (q < 0.0) {
    throw EstimationError("delta_nie: negative variance under the quadratic form");
  }
  return std::sqrt(q);
}

Interval wald_ci(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InputError("wald_ci: level must lie in (0, 1)");
  }
  if (se < 0.0) {
    throw InputError("wald_ci: se must be >= 0");
  }
  const double z = norm_quantile(0.5 * (1.0 + level));
  return {estimate - z * se, estimate + z * se};
}

CovMatrix bootstrap_cov(const Dataset& data, EstimatorKind estimator, const ModelSpec& spec,
                        int B, std::uint64_t seed, int threads, int* n_dropped) {
  if (B < 100) {
    throw InputError("bootstrap_cov: need at least 100 replicates");
  }
  data.validate();
  spec.validate(data);
  const Eigen::Index n = data.n();
  const int nt = estimator == EstimatorKind::MRInteraction ? 4 : 3;

  std::vector<std::optional<VectorXd>> draws(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    RngStream rng = RngStream::substream(seed, b);
    VectorXd y(n), a(n), m(n);
    MatrixXd x(n, data.p());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      y(i) = data.y(j);
      a(i) = data.a(j);
      m(i) = data.m(j);
      x.row(i) = data.x.row(j);
    }
    try {
      const Dataset resampled(std::move(y), std::move(a), std::move(m), std::move(x));
      const SolveResult fit = solve(estimator, resampled, spec);
      VectorXd t(nt);
      t(0) = fit.theta.theta1;
      t(1) = fit.theta.theta2;
      t(2) = fit.theta.theta3;
      if (nt == 4) t(3) = fit.theta.zeta.value_or(0.0);
      draws[b] = t;
    } catch (const Error&) {
      // dropped replicate, counted below
    }
  });

  int kept = 0;
  VectorXd mean = VectorXd::Zero(nt);
  for (const auto& d : draws) {
    if (d) {
      mean += *d;
      ++kept;
    }
  }
  const int dropped = B - kept;
  if (n_dropped) *n_dropped = dropped;
  if (dropped > B / 20) {
    throw ConvergenceError("bootstrap_cov: more than 5% of replicates failed (" +
                           std::to_string(dropped) + " of " + std::to_string(B) + ")");
  }
  mean /= static_cast<double>(kept);
  MatrixXd cov = MatrixXd::Zero(nt, nt);
  for (const auto& d : draws) {
    if (d) {
      const VectorXd c = *d - mean;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
  }
  cov /= static_cast<double>(kept - 1);
  CovMatrix out;
  out.matrix = cov.selfadjointView<Eigen::Lower>();
  out.labels = theta_labels(nt);
  out.n = n;
  return out;
}

BPResult breusch_pagan(const Dataset& data, const ModelSpec& spec, bool studentized) {
  data.validate();
  spec.validate(data);
  bool has_intercept = false;
  for (int j : spec.h_design) has_intercept |= (j == 0);
  if (!has_intercept) {
    throw InputError("breusch_pagan: the h-design must include the intercept column");
  }
  const MatrixXd xh = design_matrix(data, spec.h_design);
  MatrixXd w(data.n(), 1 + xh.cols());
  w.col(0) = data.a;
  w.rightCols(xh.cols()) = xh;

  const VectorXd beta = ols_solve(w, data.m);
  const VectorXd resid = data.m - w * beta;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(data.n());

  BPResult out;
  out.df = static_cast<int>(w.cols()) - 1;
  if (sigma2 <= 0.0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  const VectorXd g = resid.cwiseProduct(resid) / sigma2;
  const VectorXd coef = ols_solve(w, g);
  const VectorXd fitted = w * coef;
  const double gbar = g.mean();
  const double ess = (fitted.array() - gbar).matrix().squaredNorm();
  const double tss = (g.array() - gbar).matrix().squaredNorm();
  if (studentized) {
    out.statistic = tss > 0.0 ? static_cast<double>(data.n()) * ess / tss : 0.0;
  } else {
    out.statistic = 0.5 * ess;
  }
  out.p_value = chi_sq_upper_tail(out.statistic, out.df);
  return out;
}

EffectReport effect_report(const Dataset& data, const ModelSpec& spec, const SolveResult& result,
                           const CovMatrix& cov, double contrast_from, double contrast_to,
                           double ci_level, VarianceSource source) {
  const Theta& th = result.theta;
  const double delta = contrast_to - contrast_from;
  EffectReport rep;
  rep.estimator = result.kind;
  rep.contrast_from = contrast_from;
  rep.contrast_to = contrast_to;
  rep.ci_level = ci_level;
  rep.variance_source = source;

  if (!th.zeta) {
    if (cov.matrix.rows() != 3) {
      throw InputError("effect_report: covariance dimension does not match theta");
    }
    rep.nde = th.theta2 * delta;
    rep.nie = th.theta1 * th.theta3 * delta;
    rep.se_nde = std::fabs(delta) * std::sqrt(cov.matrix(1, 1));
    rep.se_nie = std::fabs(delta) * delta_nie(th, cov);
  } else {
    if (cov.matrix.rows() != 4) {
      throw InputError("effect_report: interaction model needs a 4x4 covariance");
    }
    const MatrixXd xh = design_matrix(data, spec.h_design);
    const double mean_h = (xh * result.eta.eta4).mean();
    const auto [nde, nie] = effects_from_theta(th, contrast_from, contrast_to, mean_h);
    rep.nde = nde;
    rep.nie = nie;
    const double z = *th.zeta;
    Eigen::Vector4d g_nde(0.0, 1.0, z * contrast_from, th.theta3 * contrast_from + mean_h);
    g_nde *= delta;
    Eigen::Vector4d g_nie(th.theta3, 0.0, th.theta1 + z * contrast_to, th.theta3 * contrast_to);
    g_nie *= delta;
    const double q_nde = g_nde.dot(cov.matrix * g_nde);
    const double q_nie = g_nie.dot(cov.matrix * g_nie);
    if (q_nde < 0.0 || q_nie < 0.0) {
      throw EstimationError("effect_report: negative variance under the quadratic form");
    }
    rep.se_nde = std::sqrt(q_nde);
    rep.se_nie = std::sqrt(q_nie);
  }
  rep.ci_nde = wald_ci(rep.nde, rep.se_nde, ci_level);
  rep.ci_nie = wald_ci(rep.nie, rep.se_nie, ci_level);
  return rep;
}

}  // namespace hetmed
