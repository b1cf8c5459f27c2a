#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "oclb/bounds.hpp"
#include "oclb/oracle.hpp"

namespace oclb {

/// Thomas elimination for a tridiagonal system. `lower[k]` couples rows k+1
/// and k, `upper[k]` couples rows k and k+1. No pivoting: callers pass
/// diagonally dominant systems.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve_tridiagonal(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lower,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& upper,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& rhs) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index m = diag.size();
  Vec c_prime(m), d_prime(m), x(m);
  if (m == 0) return x;
  c_prime[0] = m > 1 ? upper[0] / diag[0] : Scalar(0);
  d_prime[0] = rhs[0] / diag[0];
  for (Eigen::Index k = 1; k < m; ++k) {
    const Scalar denom = diag[k] - lower[k - 1] * c_prime[k - 1];
    c_prime[k] = k + 1 < m ? upper[k] / denom : Scalar(0);
    d_prime[k] = (rhs[k] - lower[k - 1] * d_prime[k - 1]) / denom;
  }
  x[m - 1] = d_prime[m - 1];
  for (Eigen::Index k = m - 2; k >= 0; --k) x[k] = d_prime[k] - c_prime[k] * x[k + 1];
  return x;
}

/// Coefficients of one chain family member:
///   f_i(w) = coupling * ( sum_l [j_l = i] (w_l - w_{l+1})^2
///                         + (w_1^2 + (a_kappa - 1) w_d^2 - w_1)/n )
///            + lambda/2 |w|^2,        coupling = (mu - lambda)/8.
struct ChainCoefficients {
  double coupling = 0.0;
  double lambda = 1.0;
  int n = 1;
  double a_kappa = 2.0;

  static ChainCoefficients from(const ProblemParams& params);
};

/// Value, gradient and tridiagonal Hessian of f_i for the given owners
/// (owners[l-1] = j_l, 1-based labels). Shared with the block construction.
OracleResponse chain_component(const ChainCoefficients& coeffs, std::span<const int> owners, int i,
                               const Eigen::VectorXd& w);

/// Randomized quadratic chain: block (l, l+1) belongs to component j_l.
class ChainInstance final : public FiniteSum {
 public:
  ChainInstance(const ProblemParams& params, std::vector<int> owners, std::uint64_t seed = 0);

  const ProblemParams& params() const { return params_; }
  const RateConstants& rates() const { return rates_; }
  std::span<const int> owners() const { return owners_; }
  std::uint64_t seed() const { return seed_; }
  const ChainCoefficients& coefficients() const { return coeffs_; }

  std::string_view family() const override { return "chain"; }
  int components() const override { return params_.n; }
  Eigen::Index dim() const override { return params_.d; }
  double strong_convexity() const override { return params_.lambda; }
  double component_smoothness() const override { return params_.mu; }
  double objective_smoothness() const override;

  OracleResponse evaluate(int i, const Eigen::VectorXd& w) const override;
  double objective(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd optimum() const override;
  double gap(const Eigen::VectorXd& w) const override;

  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w) const;
  StructuredHessian objective_hessian() const;
  /// Hessian of F times x, O(d).
  Eigen::VectorXd apply_objective_hessian(const Eigen::VectorXd& x) const;

  /// Flat `key=value` text: mu, lambda, n, d, seed, owners.
  std::string serialize() const;
  static ChainInstance parse(std::string_view text);

 private:
  ProblemParams params_;
  RateConstants rates_;
  ChainCoefficients coeffs_;
  std::vector<int> owners_;
  std::uint64_t seed_;
  Eigen::VectorXd optimum_;
};

/// Owners j_l i.i.d. uniform on {1..n}, drawn from derive_seed(seed, "chain/owners").
ChainInstance sample_chain(const ProblemParams& params, std::uint64_t seed);

/// F itself (uncounted); same as instance.objective(w).
double average_objective(const ChainInstance& instance, const Eigen::VectorXd& w);

/// (q, q^2, ..., q^d)/2, the minimizer of F for every d >= 1. The linear
/// term -w_1 puts 1/2 on the right of the first stationarity equation, hence
/// the halving.
Eigen::VectorXd closed_form_optimum(const ChainInstance& instance);

/// Minimizer from direct elimination of the stationarity system of F,
/// assembled from the objective's coefficients alone.
Eigen::VectorXd tridiagonal_solve_optimum(const ChainInstance& instance);

/// f_i(w) = -delta_i w_1 + lambda/2 |w|^2.
class SignFlipInstance final : public FiniteSum {
 public:
  SignFlipInstance(double lambda, std::vector<int> signs, Eigen::Index d = 2, std::uint64_t seed = 0);

  std::span<const int> signs() const { return signs_; }
  std::uint64_t seed() const { return seed_; }
  double lambda() const { return lambda_; }

  std::string_view family() const override { return "signflip"; }
  int components() const override { return static_cast<int>(signs_.size()); }
  Eigen::Index dim() const override { return dim_; }
  double strong_convexity() const override { return lambda_; }
  double component_smoothness() const override { return lambda_; }
  double objective_smoothness() const override { return lambda_; }

  OracleResponse evaluate(int i, const Eigen::VectorXd& w) const override;
  double objective(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd optimum() const override;
  double gap(const Eigen::VectorXd& w) const override;

 private:
  double lambda_;
  std::vector<int> signs_;
  Eigen::Index dim_;
  std::uint64_t seed_;
  double mean_sign_;
};

SignFlipInstance sample_signflip(double lambda, int n, std::uint64_t seed, Eigen::Index d = 2);

/// ((1/(n lambda)) sum delta_i) e_1.
Eigen::VectorXd signflip_optimum(const SignFlipInstance& instance);

}  // namespace oclb
