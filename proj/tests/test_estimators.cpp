#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/moments.hpp"
#include "hetmed/nuisance.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/simulation.hpp"

using namespace hetmed;

namespace {

void check_theta(const Theta& th, double t1, double t2, double t3, double tol) {
  CHECK(th.theta1 == doctest::Approx(t1).epsilon(0).scale(1).epsilon(0).scale(0).epsilon(tol));
  CHECK(std::fabs(th.theta1 - t1) <= tol);
  CHECK(std::fabs(th.theta2 - t2) <= tol);
  CHECK(std::fabs(th.theta3 - t3) <= tol);
}

}  // namespace

TEST_CASE("exact recovery on the noiseless unconfounded fixture") {
  const Dataset data = testfix::noiseless();
  const ModelSpec spec = testfix::noiseless_spec();

  const SolveResult mr = solve_mr(data, spec);
  const SolveResult ps = solve_ps(data, spec);
  const SolveResult bk = solve_bk(data, spec);
  const SolveResult hines = solve_hines(data, spec);
  for (const SolveResult* r : {&mr, &ps, &bk, &hines}) {
    CHECK(r->converged);
    CHECK(r->final_residual <= 1e-8);
    check_theta(r->theta, 2.0, 1.0, 1.5, 1e-8);
  }
  // The noiseless fixture has no residual products, so the rho block falls
  // back to the identity link with rho identically zero.
  CHECK(mr.eta.rho_link_used == Link::identity);
  CHECK(mr.eta.eta3.cwiseAbs().maxCoeff() <= 1e-8);

  // All three agree exactly, and the implied effects are NDE=1, NIE=3.
  CHECK(std::fabs(mr.theta.theta1 - bk.theta.theta1) <= 1e-8);
  CHECK(std::fabs(ps.theta.theta2 - bk.theta.theta2) <= 1e-8);
  auto [nde, nie] = effects_from_theta(bk.theta, 0.0, 1.0);
  CHECK(nde == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(nie == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("interaction solver recovers zeta = 0.5 on its noiseless fixture") {
  const Dataset data = testfix::noiseless(40, true);
  const ModelSpec spec = testfix::noiseless_spec();
  const SolveResult fit = solve_mr_interaction(data, spec);
  CHECK(fit.converged);
  CHECK(fit.final_residual <= 1e-8);
  REQUIRE(fit.theta.zeta.has_value());
  CHECK(std::fabs(fit.theta.theta1 - 2.0) <= 1e-8);
  CHECK(std::fabs(fit.theta.theta2 - 1.0) <= 1e-8);
  CHECK(std::fabs(fit.theta.theta3 - 1.5) <= 1e-8);
  CHECK(std::fabs(*fit.theta.zeta - 0.5) <= 1e-8);
}

TEST_CASE("BK equals an explicit normal-equations oracle on small data") {
  const Eigen::Index n = 20;
  VectorXd y(n), a(n), m(n);
  MatrixXd x(n, 3);
  RngStream rng(99);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal();
    a(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    m(i) = rng.normal();
    y(i) = rng.normal();
  }
  const Dataset data(y, a, m, x);
  const ModelSpec spec = ModelSpec::all_columns(3);
  const SolveResult bk = solve_bk(data, spec);

  // (X'X)^-1 X'y via explicit inverse of the 5x5 normal matrix.
  MatrixXd zo(n, 5);
  zo.col(0) = m;
  zo.col(1) = a;
  zo.rightCols(3) = x;
  const VectorXd bo = (zo.transpose() * zo).inverse() * (zo.transpose() * y);
  MatrixXd zm(n, 4);
  zm.col(0) = a;
  zm.rightCols(3) = x;
  const VectorXd bm = (zm.transpose() * zm).inverse() * (zm.transpose() * m);
  CHECK(std::fabs(bk.theta.theta1 - bo(0)) <= 1e-10);
  CHECK(std::fabs(bk.theta.theta2 - bo(1)) <= 1e-10);
  CHECK(std::fabs(bk.theta.theta3 - bm(0)) <= 1e-10);
}

TEST_CASE("estimating-equation certificate holds for every converged solver") {
  const Dataset data = testfix::dgp_dataset(404, 800);
  const Dataset aug(data.y, data.a, data.m, augment_with_misspecified(data.x));
  const ModelSpec spec = scenario_spec(Scenario::i);
  for (const EstimatorKind kind :
       {EstimatorKind::MR, EstimatorKind::PS, EstimatorKind::BK, EstimatorKind::Hines,
        EstimatorKind::MRInteraction}) {
    const SolveResult fit = solve(kind, aug, spec);
    CHECK(fit.converged);
    // Independent re-evaluation of the defining moments.
    CHECK(moment_residual(aug, spec, fit) <= 1e-8);
    CHECK(fit.condition_estimate > 0.0);
    CHECK(fit.condition_estimate <= 1.0);
  }
}

TEST_CASE("solver determinism: identical inputs give bit-identical results") {
  const Dataset data = testfix::dgp_dataset(11, 500);
  const ModelSpec spec = ModelSpec::all_columns(3);
  const SolveResult r1 = solve_mr(data, spec);
  const SolveResult r2 = solve_mr(data, spec);
  CHECK(std::memcmp(&r1.theta.theta1, &r2.theta.theta1, sizeof(double)) == 0);
  CHECK(std::memcmp(&r1.theta.theta2, &r2.theta.theta2, sizeof(double)) == 0);
  CHECK(std::memcmp(&r1.theta.theta3, &r2.theta.theta3, sizeof(double)) == 0);
  CHECK(r1.iterations == r2.iterations);
  CHECK(std::memcmp(r1.eta.eta3.data(), r2.eta.eta3.data(),
                    sizeof(double) * r1.eta.eta3.size()) == 0);
}

TEST_CASE("affine outcome equivariance") {
  const Dataset data = testfix::dgp_dataset(123, 700);
  const ModelSpec spec = ModelSpec::all_columns(3);

  SUBCASE("positive scale keeps the log-link rho") {
    const double c = 2.5, d = -3.0;
    const Dataset scaled(c * data.y.array() + d, data.a, data.m, data.x);
    const SolveResult base = solve_mr(data, spec);
    const SolveResult mapped = solve_mr(scaled, spec);
    CHECK(std::fabs(mapped.theta.theta1 - c * base.theta.theta1) <= 1e-6);
    CHECK(std::fabs(mapped.theta.theta2 - c * base.theta.theta2) <= 1e-6);
    CHECK(std::fabs(mapped.theta.theta3 - base.theta.theta3) <= 1e-6);

    const SolveResult bk = solve_bk(data, spec);
    const SolveResult bk2 = solve_bk(scaled, spec);
    CHECK(std::fabs(bk2.theta.theta1 - c * bk.theta.theta1) <= 1e-10);
    CHECK(std::fabs(bk2.theta.theta2 - c * bk.theta.theta2) <= 1e-10);
    CHECK(std::fabs(bk2.theta.theta3 - bk.theta.theta3) <= 1e-12);
  }

  SUBCASE("negative scale flips the residual products onto the identity link") {
    const double c = -1.5, d = 0.7;
    const Dataset scaled(c * data.y.array() + d, data.a, data.m, data.x);
    const SolveResult base = solve_mr(data, spec);
    const SolveResult mapped = solve_mr(scaled, spec);
    CHECK(mapped.eta.rho_link_used == Link::identity);
    CHECK(std::fabs(mapped.theta.theta1 - c * base.theta.theta1) <= 5e-5);
    CHECK(std::fabs(mapped.theta.theta2 - c * base.theta.theta2) <= 5e-5);
    CHECK(std::fabs(mapped.theta.theta3 - base.theta.theta3) <= 5e-5);
  }

  SUBCASE("PS is equivariant for any scale") {
    const double c = -2.0, d = 1.3;
    const Dataset scaled(c * data.y.array() + d, data.a, data.m, data.x);
    const SolveResult base = solve_ps(data, spec);
    const SolveResult mapped = solve_ps(scaled, spec);
    CHECK(std::fabs(mapped.theta.theta1 - c * base.theta.theta1) <= 1e-6);
    CHECK(std::fabs(mapped.theta.theta2 - c * base.theta.theta2) <= 1e-6);
    CHECK(std::fabs(mapped.theta.theta3 - base.theta.theta3) <= 1e-6);
  }
}

TEST_CASE("hines baseline: consistent without confounding, collider-biased with it") {
  const ModelSpec spec = ModelSpec::all_columns(3);
  {
    DgpConfig cfg;
    cfg.n = 100000;
    cfg.seed = 9001;
    cfg.confounding_on = false;
    const Dataset data = generate_dataset(cfg).data;
    const SolveResult fit = solve_hines(data, spec);
    CHECK(std::fabs(fit.theta.theta1 - 2.0) <= 0.05);
    CHECK(std::fabs(fit.theta.theta2 - 1.0) <= 0.05);
    CHECK(std::fabs(fit.theta.theta3 - 1.5) <= 0.05);
  }
  {
    DgpConfig cfg;
    cfg.n = 100000;
    cfg.seed = 9002;
    const Dataset data = generate_dataset(cfg).data;
    const SolveResult fit = solve_hines(data, spec);
    CHECK(std::fabs(fit.theta.theta1 - 2.0) > 0.1);  // detectable collider bias
    CHECK(fit.theta.theta1 > 2.0);  // upward, toward the confounded OLS limit
  }
}

TEST_CASE("MR stays consistent under a misspecified propensity model (large n)") {
  double nde_sum = 0.0, nie_sum = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    DgpConfig cfg;
    cfg.n = 100000;
    cfg.seed = 7000 + s;
    const Dataset data = generate_dataset(cfg).data;
    const Dataset aug(data.y, data.a, data.m, augment_with_misspecified(data.x));
    const SolveResult fit = solve_mr(aug, scenario_spec(Scenario::iv));
    auto [nde, nie] = effects_from_theta(fit.theta, 0.0, 1.0);
    nde_sum += nde;
    nie_sum += nie;
  }
  CHECK(std::fabs(nde_sum / 5.0 - 1.0) <= 0.05);
  CHECK(std::fabs(nie_sum / 5.0 - 3.0) <= 0.1);
}

TEST_CASE("interaction solver reduces to the base model when zeta = 0") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.seed = 4242;
  const Dataset data = generate_dataset(cfg).data;
  const ModelSpec spec = ModelSpec::all_columns(3);
  const SolveResult base = solve_mr(data, spec);
  const SolveResult inter = solve_mr_interaction(data, spec);
  REQUIRE(inter.theta.zeta.has_value());
  CHECK(std::fabs(*inter.theta.zeta) <= 0.05);
  CHECK(std::fabs(inter.theta.theta1 - base.theta.theta1) <= 0.05);
  CHECK(std::fabs(inter.theta.theta2 - base.theta.theta2) <= 0.05);
  CHECK(std::fabs(inter.theta.theta3 - base.theta.theta3) <= 0.05);
}

TEST_CASE("finite-difference Jacobian option reproduces the analytic solve") {
  const Dataset data = testfix::dgp_dataset(55, 400);
  const ModelSpec spec = ModelSpec::all_columns(3);
  SolveOptions fd;
  fd.jacobian = JacobianMode::central_difference;
  const SolveResult a = solve_mr(data, spec);
  const SolveResult b = solve_mr(data, spec, fd);
  CHECK(std::fabs(a.theta.theta1 - b.theta.theta1) <= 1e-6);
  CHECK(std::fabs(a.theta.theta2 - b.theta.theta2) <= 1e-6);
  CHECK(std::fabs(a.theta.theta3 - b.theta.theta3) <= 1e-6);
}

TEST_CASE("near-zero heteroskedasticity raises a weak-identification error") {
  // Homoskedastic mediator: var(M|A,X) does not vary with A, so the bilinear
  // component carries no information about theta1.
  const Eigen::Index n = 2000;
  VectorXd y(n), a(n), m(n);
  MatrixXd x(n, 2);
  RngStream rng(314);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = rng.normal();
    const double ai = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double u = rng.normal();
    const double mi = 1.0 + 1.5 * ai + x1 + 1e-6 * rng.normal();
    const double yi = 1.0 + ai + 2.0 * mi + u;
    x(i, 0) = 1.0;
    x(i, 1) = x1;
    a(i) = ai;
    m(i) = mi;
    y(i) = yi;
  }
  const Dataset data(y, a, m, x);
  ModelSpec spec;
  spec.pi_design = {0, 1};
  spec.g_design = {0, 1};
  spec.rho_design = {0, 1};
  spec.h_design = {0, 1};
  CHECK_THROWS_AS(solve_mr(data, spec), EstimationError);
}

TEST_CASE("user init and zero init reach the same root") {
  const Dataset data = testfix::dgp_dataset(66, 600);
  const ModelSpec spec = ModelSpec::all_columns(3);
  const SolveResult a = solve_mr(data, spec);
  SolveOptions user;
  user.init = InitMode::user;
  Theta t0;
  t0.theta1 = 1.5;
  t0.theta2 = 0.5;
  t0.theta3 = 1.0;
  user.init_theta = t0;
  const SolveResult b = solve_mr(data, spec, user);
  CHECK(std::fabs(a.theta.theta1 - b.theta.theta1) <= 1e-6);
  CHECK(std::fabs(a.theta.theta2 - b.theta.theta2) <= 1e-6);
  CHECK(std::fabs(a.theta.theta3 - b.theta.theta3) <= 1e-6);
}
