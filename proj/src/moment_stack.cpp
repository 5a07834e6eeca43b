#include "hetmed/moment_stack.hpp"

#include <cmath>

#include "hetmed/errors.hpp"
#include "hetmed/moments.hpp"

namespace hetmed {

MomentStack::MomentStack(const Dataset& data, const ModelSpec& spec, EstimatorKind kind,
                         Link rho_link_used, const VectorXd* d_weights)
    : data_(data), kind_(kind), pi_link_(spec.pi_link), rho_link_(rho_link_used) {
  spec.validate(data);
  switch (kind) {
    case EstimatorKind::MR:
      use1_ = use2_ = use3_ = use4_ = true;
      nt_ = 3;
      break;
    case EstimatorKind::MRInteraction:
      use1_ = use2_ = use3_ = use4_ = true;
      nt_ = 4;
      break;
    case EstimatorKind::PS:
      use1_ = use4_ = true;
      nt_ = 3;
      break;
    case EstimatorKind::Hines:
      use1_ = use2_ = use4_ = true;
      nt_ = 3;
      break;
    case EstimatorKind::BK:
      use2_ = use4_ = true;
      nt_ = 3;
      break;
  }
  xp_ = use1_ ? design_matrix(data, spec.pi_design) : MatrixXd();
  xg_ = use2_ ? design_matrix(data, spec.g_design) : MatrixXd();
  xr_ = use3_ ? design_matrix(data, spec.rho_design) : MatrixXd();
  xh_ = use4_ ? design_matrix(data, spec.h_design) : MatrixXd();
  p1_ = static_cast<int>(xp_.cols());
  p2_ = static_cast<int>(xg_.cols());
  p3_ = static_cast<int>(xr_.cols());
  p4_ = static_cast<int>(xh_.cols());
  if (kind == EstimatorKind::BK) {
    // Parameters (theta1, theta2, theta3, eta2, eta4); the two regression
    // score blocks have matching total size.
    o2_ = 3;
    o4_ = 3 + p2_;
    dim_ = 3 + p2_ + p4_;
  } else {
    int off = nt_;
    if (use1_) { o1_ = off; off += p1_; }
    if (use2_) { o2_ = off; off += p2_; }
    if (use3_) { o3_ = off; off += p3_; }
    if (use4_) { o4_ = off; off += p4_; }
    dim_ = off;
  }
  if (kind == EstimatorKind::MRInteraction) {
    if (!d_weights || d_weights->size() != data.n()) {
      throw InputError("MomentStack: interaction weights must supply one scalar per row");
    }
    dw_ = *d_weights;
  } else if (d_weights) {
    throw InputError("MomentStack: d weights only apply to the interaction estimator");
  }
}

VectorXd MomentStack::pack(const Theta& theta, const EtaParams& eta) const {
  VectorXd beta = VectorXd::Zero(dim_);
  beta(0) = theta.theta1;
  beta(1) = theta.theta2;
  beta(2) = theta.theta3;
  if (nt_ == 4) {
    if (!theta.zeta) throw InputError("MomentStack: interaction solve requires theta.zeta");
    beta(3) = *theta.zeta;
  }
  auto put = [&](bool use, int off, int p, const VectorXd& block, const char* name) {
    if (!use) return;
    if (block.size() != p) {
      throw InputError(std::string("MomentStack: eta block size mismatch for ") + name);
    }
    beta.segment(off, p) = block;
  };
  put(use1_, o1_, p1_, eta.eta1, "eta1");
  put(use2_, o2_, p2_, eta.eta2, "eta2");
  put(use3_, o3_, p3_, eta.eta3, "eta3");
  put(use4_, o4_, p4_, eta.eta4, "eta4");
  return beta;
}

void MomentStack::unpack(const VectorXd& beta, Theta* theta, EtaParams* eta) const {
  if (theta) {
    theta->theta1 = beta(0);
    theta->theta2 = beta(1);
    theta->theta3 = beta(2);
    theta->zeta = (nt_ == 4) ? std::optional<double>(beta(3)) : std::nullopt;
  }
  if (eta) {
    eta->eta1 = use1_ ? VectorXd(beta.segment(o1_, p1_)) : VectorXd();
    eta->eta2 = use2_ ? VectorXd(beta.segment(o2_, p2_)) : VectorXd();
    eta->eta3 = use3_ ? VectorXd(beta.segment(o3_, p3_)) : VectorXd();
    eta->eta4 = use4_ ? VectorXd(beta.segment(o4_, p4_)) : VectorXd();
    eta->rho_link_used = rho_link_;
    if (theta) eta->profiled_at = *theta;
  }
}

void MomentStack::eval_row_default(Eigen::Index i, const VectorXd& beta, VectorXd& m,
                                   MatrixXd& jac) const {
  const bool want_jac = jac.size() > 0;
  const double y = data_.y(i), a = data_.a(i), med = data_.m(i);
  const double th1 = beta(0), th2 = beta(1), th3 = beta(2);
  const double zeta = (nt_ == 4) ? beta(3) : 0.0;

  double pi = 0.0, dpi = 0.0, w = 0.0;
  if (use1_) {
    pi = apply_link(pi_link_, xp_.row(i).dot(beta.segment(o1_, p1_)), nullptr);
    dpi = link_derivative(pi_link_, pi);
    w = a - pi;
  }
  double g = 0.0;
  if (use2_) g = xg_.row(i).dot(beta.segment(o2_, p2_));
  double rho = 0.0, drho = 0.0;
  if (use3_) {
    rho = apply_link(rho_link_, xr_.row(i).dot(beta.segment(o3_, p3_)), nullptr);
    drho = link_derivative(rho_link_, rho);
  }
  const double h = xh_.row(i).dot(beta.segment(o4_, p4_));
  const double u = med - th3 * a - h;

  if (kind_ == EstimatorKind::PS) {
    const double psi1 = y - th1 * med - th2 * a;
    const double t = y - th1 * med;
    m(0) = w * psi1;
    m(1) = w * u * t;
    m(2) = w * u;
    m.segment(o1_, p1_) = xp_.row(i).transpose() * (a - pi);
    m.segment(o4_, p4_) = xh_.row(i).transpose() * u;
    if (!want_jac) return;
    jac(0, 0) = -w * med;
    jac(0, 1) = -w * a;
    jac.row(0).segment(o1_, p1_) = -dpi * psi1 * xp_.row(i);
    jac(1, 0) = -w * u * med;
    jac(1, 2) = -w * a * t;
    jac.row(1).segment(o1_, p1_) = -dpi * u * t * xp_.row(i);
    jac.row(1).segment(o4_, p4_) = -w * t * xh_.row(i);
    jac(2, 2) = -w * a;
    jac.row(2).segment(o1_, p1_) = -dpi * u * xp_.row(i);
    jac.row(2).segment(o4_, p4_) = -w * xh_.row(i);
    jac.block(o1_, o1_, p1_, p1_) =
        -dpi * (xp_.row(i).transpose() * xp_.row(i));
    jac.block(o4_, o4_, p4_, p4_) -= xh_.row(i).transpose() * xh_.row(i);
    for (int k = 0; k < p4_; ++k) jac(o4_ + k, 2) = -a * xh_(i, k);
    return;
  }

  // MR, MRInteraction, Hines share the full outcome residual.
  const double e = y - th1 * med - th2 * a - zeta * a * med - g;

  if (kind_ == EstimatorKind::Hines) {
    m(0) = w * e;
    m(1) = u * e;
    m(2) = w * u;
    m.segment(o1_, p1_) = xp_.row(i).transpose() * (a - pi);
    m.segment(o2_, p2_) = xg_.row(i).transpose() * e;
    m.segment(o4_, p4_) = xh_.row(i).transpose() * u;
    if (!want_jac) return;
    jac(0, 0) = -w * med;
    jac(0, 1) = -w * a;
    jac.row(0).segment(o1_, p1_) = -dpi * e * xp_.row(i);
    jac.row(0).segment(o2_, p2_) = -w * xg_.row(i);
    jac(1, 0) = -u * med;
    jac(1, 1) = -u * a;
    jac(1, 2) = -a * e;
    jac.row(1).segment(o2_, p2_) = -u * xg_.row(i);
    jac.row(1).segment(o4_, p4_) = -e * xh_.row(i);
    jac(2, 2) = -w * a;
    jac.row(2).segment(o1_, p1_) = -dpi * u * xp_.row(i);
    jac.row(2).segment(o4_, p4_) = -w * xh_.row(i);
    jac.block(o1_, o1_, p1_, p1_) = -dpi * (xp_.row(i).transpose() * xp_.row(i));
    for (int k = 0; k < p2_; ++k) {
      jac(o2_ + k, 0) = -med * xg_(i, k);
      jac(o2_ + k, 1) = -a * xg_(i, k);
    }
    jac.block(o2_, o2_, p2_, p2_) = -(xg_.row(i).transpose() * xg_.row(i));
    for (int k = 0; k < p4_; ++k) jac(o4_ + k, 2) = -a * xh_(i, k);
    jac.block(o4_, o4_, p4_, p4_) = -(xh_.row(i).transpose() * xh_.row(i));
    return;
  }

  // MR / MRInteraction.
  const double core2 = u * e - rho;
  m(0) = w * e;
  m(1) = w * core2;
  m(2) = w * u;
  if (nt_ == 4) m(3) = dw_(i) * w * core2;
  m.segment(o1_, p1_) = xp_.row(i).transpose() * (a - pi);
  m.segment(o2_, p2_) = xg_.row(i).transpose() * e;
  m.segment(o3_, p3_) = xr_.row(i).transpose() * (drho * core2);
  m.segment(o4_, p4_) = xh_.row(i).transpose() * u;
  if (!want_jac) return;

  // d(ue)/dtheta and d(ue)/d(eta blocks) drive both phi2 and gamma3.
  const double due_dth1 = -u * med;
  const double due_dth2 = -u * a;
  const double due_dth3 = -a * e;
  const double due_dzeta = -u * a * med;

  jac(0, 0) = -w * med;
  jac(0, 1) = -w * a;
  if (nt_ == 4) jac(0, 3) = -w * a * med;
  jac.row(0).segment(o1_, p1_) = -dpi * e * xp_.row(i);
  jac.row(0).segment(o2_, p2_) = -w * xg_.row(i);

  jac(1, 0) = w * due_dth1;
  jac(1, 1) = w * due_dth2;
  jac(1, 2) = w * due_dth3;
  if (nt_ == 4) jac(1, 3) = w * due_dzeta;
  jac.row(1).segment(o1_, p1_) = -dpi * core2 * xp_.row(i);
  jac.row(1).segment(o2_, p2_) = -w * u * xg_.row(i);
  jac.row(1).segment(o3_, p3_) = -w * drho * xr_.row(i);
  jac.row(1).segment(o4_, p4_) = -w * e * xh_.row(i);

  jac(2, 2) = -w * a;
  jac.row(2).segment(o1_, p1_) = -dpi * u * xp_.row(i);
  jac.row(2).segment(o4_, p4_) = -w * xh_.row(i);

  if (nt_ == 4) jac.row(3) = dw_(i) * jac.row(1);

  jac.block(o1_, o1_, p1_, p1_) = -dpi * (xp_.row(i).transpose() * xp_.row(i));

  for (int k = 0; k < p2_; ++k) {
    jac(o2_ + k, 0) = -med * xg_(i, k);
    jac(o2_ + k, 1) = -a * xg_(i, k);
    if (nt_ == 4) jac(o2_ + k, 3) = -a * med * xg_(i, k);
  }
  jac.block(o2_, o2_, p2_, p2_) = -(xg_.row(i).transpose() * xg_.row(i));

  for (int k = 0; k < p3_; ++k) {
    jac(o3_ + k, 0) = drho * due_dth1 * xr_(i, k);
    jac(o3_ + k, 1) = drho * due_dth2 * xr_(i, k);
    jac(o3_ + k, 2) = drho * due_dth3 * xr_(i, k);
    if (nt_ == 4) jac(o3_ + k, 3) = drho * due_dzeta * xr_(i, k);
  }
  jac.block(o3_, o2_, p3_, p2_) = -drho * u * (xr_.row(i).transpose() * xg_.row(i));
  // log link: d/d eta3 of rho(ue - rho) = rho(ue - 2 rho); identity: -1.
  const double d33 = (rho_link_ == Link::log) ? rho * (u * e - 2.0 * rho) : -1.0;
  jac.block(o3_, o3_, p3_, p3_) = d33 * (xr_.row(i).transpose() * xr_.row(i));
  jac.block(o3_, o4_, p3_, p4_) = -drho * e * (xr_.row(i).transpose() * xh_.row(i));

  for (int k = 0; k < p4_; ++k) jac(o4_ + k, 2) = -a * xh_(i, k);
  jac.block(o4_, o4_, p4_, p4_) = -(xh_.row(i).transpose() * xh_.row(i));
}

void MomentStack::eval_row_bk(Eigen::Index i, const VectorXd& beta, VectorXd& m,
                              MatrixXd& jac) const {
  const bool want_jac = jac.size() > 0;
  const double y = data_.y(i), a = data_.a(i), med = data_.m(i);
  const double e = y - beta(0) * med - beta(1) * a - xg_.row(i).dot(beta.segment(o2_, p2_));
  const double u = med - beta(2) * a - xh_.row(i).dot(beta.segment(o4_, p4_));

  // Score rows ordered to match the parameter layout: the (M, A) rows of the
  // outcome regression and the A row of the mediator regression first, then
  // the g- and h-design rows.
  m(0) = med * e;
  m(1) = a * e;
  m(2) = a * u;
  m.segment(o2_, p2_) = xg_.row(i).transpose() * e;
  m.segment(o4_, p4_) = xh_.row(i).transpose() * u;
  if (!want_jac) return;

  auto fill_out = [&](int row, double c) {
    jac(row, 0) = -c * med;
    jac(row, 1) = -c * a;
    jac.row(row).segment(o2_, p2_) = -c * xg_.row(i);
  };
  auto fill_med = [&](int row, double c) {
    jac(row, 2) = -c * a;
    jac.row(row).segment(o4_, p4_) = -c * xh_.row(i);
  };
  fill_out(0, med);
  fill_out(1, a);
  fill_med(2, a);
  for (int k = 0; k < p2_; ++k) fill_out(o2_ + k, xg_(i, k));
  for (int k = 0; k < p4_; ++k) fill_med(o4_ + k, xh_(i, k));
}

void MomentStack::eval(const VectorXd& beta, VectorXd* mean_m, MatrixXd* mean_jac,
                       MatrixXd* mean_outer) const {
  if (beta.size() != dim_) throw InputError("MomentStack: beta has the wrong dimension");
  const Eigen::Index n = data_.n();
  VectorXd m(dim_);
  MatrixXd jac;
  if (mean_jac) jac.resize(dim_, dim_);
  if (mean_m) mean_m->setZero(dim_);
  if (mean_jac) mean_jac->setZero(dim_, dim_);
  if (mean_outer) mean_outer->setZero(dim_, dim_);

  for (Eigen::Index i = 0; i < n; ++i) {
    m.setZero();
    if (mean_jac) jac.setZero();
    if (kind_ == EstimatorKind::BK) {
      eval_row_bk(i, beta, m, jac);
    } else {
      eval_row_default(i, beta, m, jac);
    }
    if (mean_m) *mean_m += m;
    if (mean_jac) *mean_jac += jac;
    if (mean_outer) mean_outer->selfadjointView<Eigen::Lower>().rankUpdate(m);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (mean_m) *mean_m *= inv_n;
  if (mean_jac) *mean_jac *= inv_n;
  if (mean_outer) {
    *mean_outer *= inv_n;
    const MatrixXd full = mean_outer->selfadjointView<Eigen::Lower>();
    *mean_outer = full;
  }
}

MatrixXd MomentStack::theta_bread(const MatrixXd& mean_jac) const {
  const int q = dim_ - nt_;
  const MatrixXd jtt = mean_jac.topLeftCorner(nt_, nt_);
  if (q == 0) return jtt;
  const MatrixXd jte = mean_jac.topRightCorner(nt_, q);
  const MatrixXd jet = mean_jac.bottomLeftCorner(q, nt_);
  const MatrixXd jee = mean_jac.bottomRightCorner(q, q);
  Eigen::FullPivLU<MatrixXd> lu(jee);
  if (!lu.isInvertible()) {
    return MatrixXd::Zero(nt_, nt_);
  }
  return jtt - jte * lu.solve(jet);
}

}  // namespace hetmed
