#include <doctest.h>

#include <cmath>

#include "hetmed/errors.hpp"
#include "hetmed/moments.hpp"

using namespace hetmed;

namespace {

// Small dataset whose rows can be set freely; intercept-only covariates.
Dataset tiny_dataset() {
  const Eigen::Index n = 8;
  VectorXd y(n), a(n), m(n);
  MatrixXd x = MatrixXd::Ones(n, 1);
  y << 0.9, 1.0, -0.5, 2.0, 0.3, -1.2, 0.8, 1.4;
  a << 1, 0, 1, 0, 1, 0, 0, 1;
  m << -0.5, 0.2, 1.0, -0.3, 0.7, 0.1, -0.9, 0.4;
  return Dataset(y, a, m, x);
}

}  // namespace

TEST_CASE("psi evaluates the printed components") {
  Theta theta;
  theta.theta1 = 2.0;
  theta.theta2 = 1.0;
  theta.theta3 = 1.5;
  const ObsRow o{4.0, 1.0, 1.0};
  const Eigen::Vector3d v = psi(o, theta, -0.5);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(0.0));  // mediator residual is exactly zero
  CHECK(v(2) == doctest::Approx(-0.5));
}

TEST_CASE("psi at theta = 0 reduces to (Y, M*Y, M)") {
  Theta zero;
  const ObsRow o{1.7, 1.0, -0.6};
  const Eigen::Vector3d v = psi(o, zero, 0.0);
  CHECK(v(0) == doctest::Approx(1.7));
  CHECK(v(1) == doctest::Approx(-0.6 * 1.7));
  CHECK(v(2) == doctest::Approx(-0.6));
}

TEST_CASE("psi rejects an interaction theta and non-finite h*") {
  Theta theta;
  theta.zeta = 0.5;
  CHECK_THROWS_AS(psi(ObsRow{1, 1, 1}, theta, 0.0), InputError);
  Theta base;
  CHECK_THROWS_AS(psi(ObsRow{1, 1, 1}, base, std::nan("")), InputError);
}

TEST_CASE("phi_tilde centers the residual product inside the exposure residual") {
  // A=1, pi=0.5, outcome residual 1, mediator residual -0.5, rho 0.2.
  Theta zero;
  const ObsRow o{1.0, 1.0, 0.0};
  const Eigen::Vector3d v = phi_tilde(o, zero, 0.5, 0.0, 0.2, 0.5);
  CHECK(v(0) == doctest::Approx(0.5));
  CHECK(v(1) == doctest::Approx(0.5 * (-0.5 * 1.0 - 0.2)));  // -0.35
  CHECK(v(2) == doctest::Approx(-0.25));
}

TEST_CASE("phi_tilde vanishes when the exposure residual vanishes") {
  Theta zero;
  const ObsRow o{1.3, 0.7, -0.2};
  const Eigen::Vector3d v = phi_tilde(o, zero, 0.7, 0.1, 0.2, 0.4);
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 0.0);
  CHECK(v(2) == 0.0);
}

TEST_CASE("gamma blocks follow the link derivatives") {
  const Dataset data = tiny_dataset();
  ModelSpec spec = ModelSpec::all_columns(1);
  Theta zero;
  EtaParams eta;
  eta.eta1 = VectorXd::Zero(1);
  eta.eta2 = VectorXd::Zero(1);
  eta.eta3 = VectorXd::Zero(1);
  eta.eta4 = VectorXd::Zero(1);
  eta.rho_link_used = Link::log;

  // Row 0: A=1, eta1=0 so pi=1/2 and gamma1 = 1*(1-0.5).
  VectorXd g = gamma(data, 0, zero, eta, spec);
  CHECK(g(0) == doctest::Approx(0.5));
  // gamma2/gamma4 are plain residual scores at theta=0, eta=0.
  CHECK(g(1) == doctest::Approx(data.y(0)));
  CHECK(g(3) == doctest::Approx(data.m(0)));

  // Row 0 has u*e = m*y = -0.45; with eta3 = log(0.2) the log-link block is
  // rho*(u*e - rho) = 0.2*(-0.45-0.2).
  eta.eta3(0) = std::log(0.2);
  g = gamma(data, 0, zero, eta, spec);
  CHECK(g(2) == doctest::Approx(0.2 * (-0.45 - 0.2)));  // -0.13
}

TEST_CASE("moment evaluations are pure: permuting rows permutes outputs") {
  const Dataset data = tiny_dataset();
  ModelSpec spec = ModelSpec::all_columns(1);
  Theta theta;
  theta.theta1 = 0.3;
  theta.theta2 = -0.2;
  theta.theta3 = 0.7;
  EtaParams eta;
  eta.eta1 = VectorXd::Constant(1, 0.1);
  eta.eta2 = VectorXd::Constant(1, -0.4);
  eta.eta3 = VectorXd::Constant(1, -1.0);
  eta.eta4 = VectorXd::Constant(1, 0.2);
  eta.rho_link_used = Link::log;

  std::vector<Eigen::Index> perm{3, 1, 4, 0, 7, 6, 2, 5};
  VectorXd y(data.n()), a(data.n()), m(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    y(i) = data.y(perm[i]);
    a(i) = data.a(perm[i]);
    m(i) = data.m(perm[i]);
  }
  const Dataset shuffled(y, a, m, data.x);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const VectorXd lhs = gamma(shuffled, i, theta, eta, spec);
    const VectorXd rhs = gamma(data, perm[i], theta, eta, spec);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
    const ObsRow lo{shuffled.y(i), shuffled.a(i), shuffled.m(i)};
    const ObsRow ro{data.y(perm[i]), data.a(perm[i]), data.m(perm[i])};
    CHECK((psi(lo, theta, 0.3) - psi(ro, theta, 0.3)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("effects_from_theta matches the closed forms") {
  Theta theta;
  theta.theta1 = 2.0;
  theta.theta2 = 1.0;
  theta.theta3 = 1.5;
  auto [nde, nie] = effects_from_theta(theta, 0.0, 1.0);
  CHECK(nde == doctest::Approx(1.0));
  CHECK(nie == doctest::Approx(3.0));

  // Null contrast.
  auto [nde0, nie0] = effects_from_theta(theta, 0.7, 0.7);
  CHECK(nde0 == 0.0);
  CHECK(nie0 == 0.0);

  // Linear in (to - from) without interaction.
  auto [nde2, nie2] = effects_from_theta(theta, -1.0, 2.0);
  CHECK(nde2 == doctest::Approx(3.0 * nde));
  CHECK(nie2 == doctest::Approx(3.0 * nie));

  // zeta = 0 with any mean h* reduces to the base formulas.
  Theta with_zero_zeta = theta;
  with_zero_zeta.zeta = 0.0;
  auto [nde3, nie3] = effects_from_theta(with_zero_zeta, 0.0, 1.0, 123.4);
  CHECK(nde3 == doctest::Approx(nde));
  CHECK(nie3 == doctest::Approx(nie));

  // Interaction formulas.
  Theta inter = theta;
  inter.zeta = 0.5;
  auto [nde4, nie4] = effects_from_theta(inter, 0.0, 1.0, 1.0);
  CHECK(nde4 == doctest::Approx(1.5));
  CHECK(nie4 == doctest::Approx(1.5 * (2.0 + 0.5)));  // 3.75

  CHECK_THROWS_AS(effects_from_theta(inter, 0.0, 1.0), InputError);
}
