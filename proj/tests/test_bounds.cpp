#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "oclb/bounds.hpp"

using namespace oclb;

TEST_CASE("condition number examples") {
  CHECK(detail::condition_number_unchecked(2.5, 2.5, 5) == doctest::Approx(1.0));
  CHECK(condition_number(9.0, 1.0, 4) == doctest::Approx(3.0));
  CHECK(condition_number(9.0, 1.0, 1) == doctest::Approx(9.0));
  CHECK_THROWS_AS(condition_number(1.0, 1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(condition_number(9.0, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(condition_number(9.0, 1.0, 0), std::invalid_argument);
  CHECK(chain_rates(3.0, 3.0, 7).kappa == 1.0);
  CHECK(chain_rates(3.0, 3.0, 7).q == 0.0);
}

TEST_CASE("q factor examples and monotonicity") {
  CHECK(q_factor(1.0) == 0.0);
  CHECK(q_factor(4.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(q_factor(3.0) == doctest::Approx(0.2679491924311227).epsilon(1e-14));
  double prev = -1.0;
  for (double kappa = 1.0; kappa < 1e6; kappa *= 1.37) {
    const double q = q_factor(kappa);
    CHECK(q >= 0.0);
    CHECK(q < 1.0);
    CHECK(q > prev);
    prev = q;
    const double a = boundary_coefficient(kappa);
    CHECK(a >= 1.0);
    CHECK(a <= 2.0);
  }
  CHECK_THROWS_AS(q_factor(0.5), std::invalid_argument);
}

TEST_CASE("single-function envelope") {
  CHECK(thm1_envelope(32.0, 1.0, 0) == doctest::Approx(1.0 / 768.0).epsilon(1e-14));
  CHECK(thm1_envelope(32.0, 1.0, 1) == doctest::Approx(1.0 / 6912.0).epsilon(1e-14));
  for (int T = 0; T < 60; ++T) {
    CHECK(thm1_envelope(32.0, 1.0, T + 1) < thm1_envelope(32.0, 1.0, T));
    CHECK(thm1_log_envelope(32.0, 1.0, T) == doctest::Approx(std::log(thm1_envelope(32.0, 1.0, T))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(thm1_envelope(8.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("finite-sum envelope") {
  const double q = q_factor(3.0);
  const double expected = std::pow(q, 4.0) / (18.0 * std::sqrt(3.0));
  CHECK(thm2_envelope(9.0, 1.0, 4, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(thm2_envelope(9.0, 1.0, 4, 1) == doctest::Approx(1.653e-4).epsilon(1e-3));
  CHECK(thm2_envelope(9.0, 1.0, 4, 5) / thm2_envelope(9.0, 1.0, 4, 1) == doctest::Approx(std::pow(q, 4.0)).epsilon(1e-12));
  CHECK(thm2_envelope(1.0, 1.0, 4, 3) == 0.0);
  CHECK(thm2_log_envelope(1.0, 1.0, 4, 3) == -std::numeric_limits<double>::infinity());
  // log form stays finite where the plain form underflows
  const double deep = thm2_log_envelope(100.0, 1.0, 4, 100000);
  CHECK(std::isfinite(deep));
  CHECK(deep < -700.0);
}

TEST_CASE("call thresholds") {
  ProblemParams p;
  p.mu = 9.0;
  p.lambda = 1.0;
  p.n = 4;
  p.epsilon = 1e-6;
  const CallThresholds t = thm_call_thresholds(p);
  CHECK(std::isfinite(t.finite_sum));
  CHECK(t.finite_sum > 0.0);
  CHECK(t.single_function.has_value());  // 9 > 8
  p.n = 8;
  CHECK(thm_call_thresholds(p).finite_sum > t.finite_sum);

  ProblemParams s;
  s.mu = 32.0;
  s.lambda = 1.0;
  const CallThresholds u = thm_call_thresholds(s);
  REQUIRE(u.single_function.has_value());
  CHECK(*u.single_function > 0.0);

  s.mu = 6.0;
  CHECK_FALSE(thm_call_thresholds(s).single_function.has_value());
}

TEST_CASE("parameter validation") {
  ProblemParams p;
  CHECK_NOTHROW(p.validate());
  p.mu = 0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.mu = 2.0;
  p.epsilon = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
