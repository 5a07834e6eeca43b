#include <doctest.h>

#include <cmath>

#include "hetmed/errors.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/special.hpp"

using namespace hetmed;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Independent chi-square upper tail from the closed-form integer-df
// recurrence Q(a+1, y) = Q(a, y) + y^a e^-y / Gamma(a+1), seeded with
// Q(1/2, y) = erfc(sqrt(y)) and Q(1, y) = e^-y.
double chi_sq_upper_oracle(double x, int df) {
  const double y = 0.5 * x;
  double a, q;
  if (df % 2 == 0) {
    a = 1.0;
    q = std::exp(-y);
  } else {
    a = 0.5;
    q = std::erfc(std::sqrt(y));
  }
  while (2.0 * a < df) {
    q += std::exp(a * std::log(y) - y - std::lgamma(a + 1.0));
    a += 1.0;
  }
  return q;
}

}  // namespace

TEST_CASE("normal quantile matches the erfc-based CDF") {
  for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999,
                   1.0 - 1e-9}) {
    const double z = norm_quantile(p);
    CHECK(normal_cdf(z) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.5) == 0.0);
  CHECK(norm_quantile(0.2) == doctest::Approx(-norm_quantile(0.8)).epsilon(1e-14));
  CHECK_THROWS_AS(norm_quantile(0.0), InputError);
  CHECK_THROWS_AS(norm_quantile(1.0), InputError);
}

TEST_CASE("chi-square upper tail matches the closed-form recurrence to 1e-10") {
  for (int df : {1, 2, 3, 4, 5, 8, 13, 30}) {
    for (double x : {1e-8, 0.1, 0.5, 1.0, 3.84, 10.0, 35.0, 80.0}) {
      CHECK(std::fabs(chi_sq_upper_tail(x, df) - chi_sq_upper_oracle(x, df)) < 1e-10);
    }
  }
  CHECK(chi_sq_upper_tail(0.0, 3) == 1.0);
  // df = 2 has the exact form e^{-x/2}.
  CHECK(chi_sq_upper_tail(7.2, 2) == doctest::Approx(std::exp(-3.6)).epsilon(1e-14));
}

TEST_CASE("rng streams are deterministic and substreams differ") {
  RngStream a(42), b(42), c(43);
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  bool any_diff = false;
  RngStream a2(42);
  for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  CHECK(any_diff);

  RngStream s0 = RngStream::substream(7, 0);
  RngStream s1 = RngStream::substream(7, 1);
  CHECK(s0.next_u64() != s1.next_u64());
}

TEST_CASE("uniforms live in (0,1) and inverse-CDF normals have the right moments") {
  RngStream rng(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    const double z = norm_quantile(u);
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
