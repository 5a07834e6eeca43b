#pragma once

#include <cmath>

#include "hetmed/simulation.hpp"
#include "hetmed/types.hpp"

namespace hetmed::testfix {

// Deterministic noiseless data: X1 on a grid, A alternating, M = 1 + 1.5A + X1
// and Y = 1 + A + 2M (+ 0.5 A M when with_interaction). Exactly representable
// by the working models with g-design {0} and h-design {0, 1}.
inline Dataset noiseless(Eigen::Index n = 40, bool with_interaction = false) {
  VectorXd y(n), a(n), m(n);
  MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double ai = static_cast<double>(i % 2);
    const double mi = 1.0 + 1.5 * ai + x1;
    double yi = 1.0 + ai + 2.0 * mi;
    if (with_interaction) yi += 0.5 * ai * mi;
    x(i, 0) = 1.0;
    x(i, 1) = x1;
    a(i) = ai;
    m(i) = mi;
    y(i) = yi;
  }
  return Dataset(y, a, m, x);
}

inline ModelSpec noiseless_spec() {
  ModelSpec spec;
  spec.pi_design = {0, 1};
  spec.g_design = {0};
  spec.rho_design = {0, 1};
  spec.h_design = {0, 1};
  return spec;
}

inline Dataset dgp_dataset(std::uint64_t seed, Eigen::Index n = 800,
                           bool confounding = true) {
  DgpConfig cfg;
  cfg.seed = seed;
  cfg.n = n;
  cfg.confounding_on = confounding;
  return generate_dataset(cfg).data;
}

}  // namespace hetmed::testfix
