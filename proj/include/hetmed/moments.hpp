#pragma once

#include <optional>
#include <utility>

#include "hetmed/types.hpp"

namespace hetmed {

// One observation's scalar part; design rows come from Dataset.x.
struct ObsRow {
  double y = 0.0;
  double a = 0.0;
  double m = 0.0;
};

// Unaugmented estimating function of the conditional mean independence
// restriction:
//   psi1 = Y - theta1*M - theta2*A
//   psi2 = (M - theta3*A - h*(X)) * (Y - theta1*M)
//   psi3 = M - theta3*A
Eigen::Vector3d psi(const ObsRow& o, const Theta& theta, double h_star_at_row);

// Orthogonalized moment contribution of one observation:
//   phi1 = (A - pi) * e
//   phi2 = (A - pi) * (u * e - rho)
//   phi3 = (A - pi) * u
// with e = Y - theta1*M - theta2*A - g*(X) and u = M - theta3*A - h*(X).
// All three components have conditional mean zero given (A, X) at the truth,
// and the function is first-order insensitive to every nuisance.
Eigen::Vector3d phi_tilde(const ObsRow& o, const Theta& theta, double pi,
                          double g_star, double rho, double h_star);

// Stacked nuisance score vector (q x 1) for row i of the dataset:
//   gamma1 = x_pi * (A - pi)                     (logistic/linear score)
//   gamma2 = x_g  * e
//   gamma3 = drho * x_rho * (u * e - rho)        (drho = rho under log link)
//   gamma4 = x_h  * u
// gamma1 does not involve theta.
VectorXd gamma(const Dataset& data, Eigen::Index i, const Theta& theta,
               const EtaParams& eta, const ModelSpec& spec);

// theta -> (NDE, NIE) for a change of exposure from `from` to `to`.
// Without interaction: NDE = theta2*(to-from), NIE = theta1*theta3*(to-from).
// With zeta present: NDE = [theta2 + zeta*(theta3*from + E h*)]*(to-from),
// NIE = theta3*(theta1 + zeta*to)*(to-from); mean_h_star must be supplied.
std::pair<double, double> effects_from_theta(const Theta& theta, double from, double to,
                                             std::optional<double> mean_h_star = std::nullopt);

// Link helpers shared by the moment and nuisance code.
double expit(double z);
// Value of a link-transformed linear predictor; clamps the exp() argument to
// +-700 and sets *clamped when it does.
double apply_link(Link link, double lin, bool* clamped);
// d value / d linear-predictor for the link at the given value.
double link_derivative(Link link, double value);

MatrixXd design_matrix(const Dataset& data, const std::vector<int>& cols);

}  // namespace hetmed
