#pragma once

#include <optional>

namespace oclb {

/// Parameters shared by every finite-sum construction.
///
/// `mu == lambda` is admitted as a degenerate configuration (q = 0); the
/// envelope helpers that need a strict gap check for it themselves.
struct ProblemParams {
  double mu = 2.0;
  double lambda = 1.0;
  int n = 1;
  int d = 2;
  double epsilon = 1e-3;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  bool degenerate() const { return mu == lambda; }
};

/// kappa, q and the boundary coefficient a_kappa of the chain quadratic.
struct RateConstants {
  double kappa = 1.0;
  double q = 0.0;
  double a_kappa = 2.0;

  static RateConstants from_kappa(double kappa);
};

/// ((mu/lambda) - 1)/n + 1. Rejects mu <= lambda.
double condition_number(double mu, double lambda, int n);

/// Rates of the averaged chain objective; accepts mu == lambda.
RateConstants chain_rates(double mu, double lambda, int n);

/// (sqrt(kappa) - 1)/(sqrt(kappa) + 1).
double q_factor(double kappa);

/// (sqrt(kappa) + 3)/(sqrt(kappa) + 1), always in [1, 2].
double boundary_coefficient(double kappa);

/// lambda/(12 mu sqrt(kappa)) * q^(2T) with kappa = mu/(8 lambda).
double thm1_envelope(double mu, double lambda, int T);
double thm1_log_envelope(double mu, double lambda, int T);

/// lambda/(2 mu sqrt(kappa)) * q^(4(T-1)/n + 4), kappa from condition_number.
/// mu == lambda gives 0 (log form: -infinity).
double thm2_envelope(double mu, double lambda, int n, long long T);
double thm2_log_envelope(double mu, double lambda, int n, long long T);

/// Unspecified universal constants of the call-count thresholds.
struct ThresholdConstants {
  double c = 1.0;
  double c_prime = 1.0;
  double c_finite_sum = 1.0;
};

/// Advisory call-count thresholds. Never asserted anywhere.
struct CallThresholds {
  /// Single-function threshold; empty when mu <= 8 lambda.
  std::optional<double> single_function;
  double finite_sum = 0.0;
};

CallThresholds thm_call_thresholds(const ProblemParams& params,
                                   const ThresholdConstants& constants = {});

namespace detail {
/// Formula only; callers are responsible for mu >= lambda, n >= 1.
double condition_number_unchecked(double mu, double lambda, int n);
/// log(prefactor) + exponent * log(q), evaluated as plain pow below 512.
double geometric_envelope(double prefactor, double q, double exponent);
double log_geometric_envelope(double prefactor, double q, double exponent);
}  // namespace detail

}  // namespace oclb
