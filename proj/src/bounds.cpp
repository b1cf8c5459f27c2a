#include "oclb/bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace oclb {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void ProblemParams::validate() const {
  require(finite_positive(lambda), "lambda must be positive");
  require(std::isfinite(mu) && mu >= lambda, "mu must be >= lambda");
  require(n >= 1, "n must be >= 1");
  require(d >= 1, "d must be >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
}

RateConstants RateConstants::from_kappa(double kappa) {
  return RateConstants{kappa, q_factor(kappa), boundary_coefficient(kappa)};
}

namespace detail {

double condition_number_unchecked(double mu, double lambda, int n) {
  return ((mu / lambda) - 1.0) / static_cast<double>(n) + 1.0;
}

double log_geometric_envelope(double prefactor, double q, double exponent) {
  if (exponent == 0.0) return std::log(prefactor);
  if (q == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(prefactor) + exponent * std::log(q);
}

double geometric_envelope(double prefactor, double q, double exponent) {
  if (exponent > 512.0) return std::exp(log_geometric_envelope(prefactor, q, exponent));
  return prefactor * std::pow(q, exponent);
}

}  // namespace detail

double condition_number(double mu, double lambda, int n) {
  require(finite_positive(lambda), "lambda must be positive");
  require(std::isfinite(mu) && mu > lambda, "condition_number requires mu > lambda");
  require(n >= 1, "n must be >= 1");
  return detail::condition_number_unchecked(mu, lambda, n);
}

RateConstants chain_rates(double mu, double lambda, int n) {
  require(finite_positive(lambda), "lambda must be positive");
  require(std::isfinite(mu) && mu >= lambda, "mu must be >= lambda");
  require(n >= 1, "n must be >= 1");
  return RateConstants::from_kappa(detail::condition_number_unchecked(mu, lambda, n));
}

double q_factor(double kappa) {
  require(std::isfinite(kappa) && kappa >= 1.0, "kappa must be >= 1");
  const double s = std::sqrt(kappa);
  return (s - 1.0) / (s + 1.0);
}

double boundary_coefficient(double kappa) {
  require(std::isfinite(kappa) && kappa >= 1.0, "kappa must be >= 1");
  const double s = std::sqrt(kappa);
  return (s + 3.0) / (s + 1.0);
}

namespace {

struct Envelope {
  double prefactor;
  double q;
  double exponent;
};

Envelope thm1_terms(double mu, double lambda, int T) {
  require(finite_positive(lambda), "lambda must be positive");
  require(std::isfinite(mu) && mu > 8.0 * lambda, "single-function envelope requires mu > 8 lambda");
  require(T >= 0, "T must be non-negative");
  const double kappa = mu / (8.0 * lambda);
  return {lambda / (12.0 * mu * std::sqrt(kappa)), q_factor(kappa), 2.0 * T};
}

Envelope thm2_terms(double mu, double lambda, int n, long long T) {
  require(finite_positive(lambda), "lambda must be positive");
  require(std::isfinite(mu) && mu >= lambda, "mu must be >= lambda");
  require(n >= 1, "n must be >= 1");
  require(T >= 1, "T must be >= 1");
  const double kappa = detail::condition_number_unchecked(mu, lambda, n);
  const double exponent = 4.0 * static_cast<double>(T - 1) / n + 4.0;
  return {lambda / (2.0 * mu * std::sqrt(kappa)), q_factor(kappa), exponent};
}

}  // namespace

double thm1_envelope(double mu, double lambda, int T) {
  const auto e = thm1_terms(mu, lambda, T);
  return detail::geometric_envelope(e.prefactor, e.q, e.exponent);
}

double thm1_log_envelope(double mu, double lambda, int T) {
  const auto e = thm1_terms(mu, lambda, T);
  return detail::log_geometric_envelope(e.prefactor, e.q, e.exponent);
}

double thm2_envelope(double mu, double lambda, int n, long long T) {
  const auto e = thm2_terms(mu, lambda, n, T);
  return detail::geometric_envelope(e.prefactor, e.q, e.exponent);
}

double thm2_log_envelope(double mu, double lambda, int n, long long T) {
  const auto e = thm2_terms(mu, lambda, n, T);
  return detail::log_geometric_envelope(e.prefactor, e.q, e.exponent);
}

CallThresholds thm_call_thresholds(const ProblemParams& params, const ThresholdConstants& constants) {
  params.validate();
  require(params.mu > params.lambda, "thresholds require mu > lambda");
  require(constants.c > 0 && constants.c_prime > 0 && constants.c_finite_sum > 0,
          "threshold constants must be positive");

  const double inverse_ratio = params.lambda / params.mu;
  const double scale = std::pow(inverse_ratio, 1.5);

  CallThresholds out;
  if (params.mu > 8.0 * params.lambda) {
    out.single_function = constants.c * (std::sqrt(params.mu / (8.0 * params.lambda)) - 1.0) *
                          std::log(scale / (constants.c_prime * params.epsilon));
  }
  const double n = params.n;
  out.finite_sum = constants.c_finite_sum *
                   (n + std::sqrt(n * params.mu / params.lambda) *
                            std::log(scale * std::sqrt(n) / params.epsilon));
  return out;
}

}  // namespace oclb
