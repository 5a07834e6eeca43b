#pragma once

namespace hetmed {

// Standard normal quantile (inverse CDF), Wichura's AS241 double-precision
// algorithm. Accurate to full double precision for p in (0, 1).
double norm_quantile(double p);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a),
// series expansion for x < a + 1 and a Lentz continued fraction otherwise.
double gamma_q(double a, double x);

// Upper-tail probability P(Chi2_df > x).
double chi_sq_upper_tail(double x, int df);

}  // namespace hetmed
