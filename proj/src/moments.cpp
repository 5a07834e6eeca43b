#include "hetmed/moments.hpp"

#include <cmath>

#include "hetmed/errors.hpp"

namespace hetmed {

double expit(double z) {
  if (z >= 0.0) {
    const double ez = std::exp(-z);
    return 1.0 / (1.0 + ez);
  }
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

double apply_link(Link link, double lin, bool* clamped) {
  switch (link) {
    case Link::identity:
      return lin;
    case Link::logistic:
      if (std::fabs(lin) > 700.0) {
        if (clamped) *clamped = true;
        lin = lin > 0.0 ? 700.0 : -700.0;
      }
      return expit(lin);
    case Link::log:
      if (std::fabs(lin) > 700.0) {
        if (clamped) *clamped = true;
        lin = lin > 0.0 ? 700.0 : -700.0;
      }
      return std::exp(lin);
  }
  return lin;
}

double link_derivative(Link link, double value) {
  switch (link) {
    case Link::identity: return 1.0;
    case Link::logistic: return value * (1.0 - value);
    case Link::log: return value;
  }
  return 1.0;
}

Eigen::Vector3d psi(const ObsRow& o, const Theta& theta, double h_star_at_row) {
  if (theta.zeta) {
    throw InputError("psi: the base estimating function has no interaction term");
  }
  if (!std::isfinite(h_star_at_row)) {
    throw InputError("psi: h* must be finite");
  }
  const double psi1 = o.y - theta.theta1 * o.m - theta.theta2 * o.a;
  const double u = o.m - theta.theta3 * o.a - h_star_at_row;
  const double psi2 = u * (o.y - theta.theta1 * o.m);
  const double psi3 = o.m - theta.theta3 * o.a;
  return {psi1, psi2, psi3};
}

Eigen::Vector3d phi_tilde(const ObsRow& o, const Theta& theta, double pi,
                          double g_star, double rho, double h_star) {
  if (theta.zeta) {
    throw InputError("phi_tilde: the base moment function has no interaction term");
  }
  const double w = o.a - pi;
  const double e = o.y - theta.theta1 * o.m - theta.theta2 * o.a - g_star;
  const double u = o.m - theta.theta3 * o.a - h_star;
  return {w * e, w * (u * e - rho), w * u};
}

VectorXd gamma(const Dataset& data, Eigen::Index i, const Theta& theta,
               const EtaParams& eta, const ModelSpec& spec) {
  auto gather = [&](const std::vector<int>& cols) {
    VectorXd v(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) v(static_cast<Eigen::Index>(j)) = data.x(i, cols[j]);
    return v;
  };
  const VectorXd xp = gather(spec.pi_design);
  const VectorXd xg = gather(spec.g_design);
  const VectorXd xr = gather(spec.rho_design);
  const VectorXd xh = gather(spec.h_design);
  if (eta.eta1.size() != xp.size() || eta.eta2.size() != xg.size() ||
      eta.eta3.size() != xr.size() || eta.eta4.size() != xh.size()) {
    throw InputError("gamma: eta block dimensions do not match the model designs");
  }

  bool clamped = false;
  const double pi = apply_link(spec.pi_link, xp.dot(eta.eta1), &clamped);
  const double g = xg.dot(eta.eta2);
  const double rho = apply_link(eta.rho_link_used, xr.dot(eta.eta3), &clamped);
  const double h = xh.dot(eta.eta4);

  const double zeta = theta.zeta.value_or(0.0);
  const double e = data.y(i) - theta.theta1 * data.m(i) - theta.theta2 * data.a(i) -
                   zeta * data.a(i) * data.m(i) - g;
  const double u = data.m(i) - theta.theta3 * data.a(i) - h;
  const double drho = link_derivative(eta.rho_link_used, rho);

  VectorXd out(xp.size() + xg.size() + xr.size() + xh.size());
  Eigen::Index off = 0;
  out.segment(off, xp.size()) = xp * (data.a(i) - pi);
  off += xp.size();
  out.segment(off, xg.size()) = xg * e;
  off += xg.size();
  out.segment(off, xr.size()) = xr * (drho * (u * e - rho));
  off += xr.size();
  out.segment(off, xh.size()) = xh * u;
  return out;
}

std::pair<double, double> effects_from_theta(const Theta& theta, double from, double to,
                                             std::optional<double> mean_h_star) {
  const double delta = to - from;
  if (!theta.zeta) {
    return {theta.theta2 * delta, theta.theta1 * theta.theta3 * delta};
  }
  if (!mean_h_star) {
    throw InputError("effects_from_theta: interaction model requires the sample mean of h*");
  }
  const double z = *theta.zeta;
  const double nde = (theta.theta2 + z * (theta.theta3 * from + *mean_h_star)) * delta;
  const double nie = theta.theta3 * (theta.theta1 + z * to) * delta;
  return {nde, nie};
}

MatrixXd design_matrix(const Dataset& data, const std::vector<int>& cols) {
  MatrixXd out(data.n(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = data.x.col(cols[j]);
  }
  return out;
}

}  // namespace hetmed
