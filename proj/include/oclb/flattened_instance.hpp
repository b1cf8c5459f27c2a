#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "oclb/bounds.hpp"
#include "oclb/oracle.hpp"

namespace oclb {

template <typename Scalar>
struct PhiValue {
  Scalar value;
  Scalar first;
  Scalar second;
};

/// Flattened square: 0 on |z| <= r, 2(|z|-r)^2 up to 2r, z^2 - 2r^2 beyond.
template <typename Scalar>
PhiValue<Scalar> phi(Scalar r, Scalar z) {
  using std::abs;
  const Scalar a = abs(z);
  const Scalar sign = z < Scalar(0) ? Scalar(-1) : Scalar(1);
  if (a <= r) return {Scalar(0), Scalar(0), Scalar(0)};
  if (a <= Scalar(2) * r) {
    const Scalar excess = a - r;
    return {Scalar(2) * excess * excess, Scalar(4) * excess * sign, Scalar(4)};
  }
  return {z * z - Scalar(2) * r * r, Scalar(2) * z, Scalar(2)};
}

/// phi_r(a) - phi_r(b) given delta = a - b computed upstream. phi_r' is
/// continuous and piecewise linear, so the trapezoid rule over the pieces
/// between b and a is exact and free of cancellation.
double phi_difference(double r, double a, double b, double delta);

/// 0.5 * the largest r with T mu r^2/(8 lambda) <= 1 and
/// sqrt(T mu r^2/(16 lambda)) <= q^T/2, kappa = mu/(8 lambda).
double choose_radius(double mu, double lambda, int T);

struct FlattenedParams {
  double mu = 32.0;
  double lambda = 1.0;
  int T = 2;
  Eigen::Index d = 4;
  double r = 0.0;
  double kappa = 4.0;
  double q = 1.0 / 3.0;
  double a_kappa = 5.0 / 3.0;

  /// d = 2T; r from choose_radius unless given (r = 0 disables flattening).
  static FlattenedParams make(double mu, double lambda, int T, double r = -1.0);
  /// lambda (kappa - 1)/8.
  double scale() const { return lambda * (kappa - 1.0) / 8.0; }
  /// sqrt(T mu r^2/(16 lambda)).
  double displacement_bound() const;
  void validate() const;
};

/// Ordered orthonormal v_1..v_k in R^d.
struct OrthonormalFrame {
  std::vector<Eigen::VectorXd> vectors;

  int size() const { return static_cast<int>(vectors.size()); }
  Eigen::MatrixXd matrix() const;
  /// Largest |<v_i, v_j> - [i = j]|.
  double orthonormality_defect() const;
};

/// Oracle answer with the first k = frame.size() vectors known. For k < T the
/// point must satisfy |<v_k, w>| <= 1e-10; terms that would involve v_{k+1..T}
/// then vanish identically. Throws std::domain_error otherwise.
OracleResponse eval_flattened(const FlattenedParams& params, const OrthonormalFrame& frame,
                              const Eigen::VectorXd& w);

/// F(a) - F(b) for a complete frame, summed term by term from <u, a - b>.
double flattened_difference(const FlattenedParams& params, const OrthonormalFrame& frame,
                            const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct MinimizeResult {
  Eigen::VectorXd w;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton with Armijo backtracking on the complete F, from `start`.
/// Throws std::runtime_error if the gradient norm cannot be pushed to 1e-10.
MinimizeResult minimize_flattened(const FlattenedParams& params, const OrthonormalFrame& frame,
                                  const Eigen::VectorXd& start, double tolerance = 1e-13);

/// The completed single-function objective as a one-component finite sum.
class FlattenedObjective final : public FiniteSum {
 public:
  FlattenedObjective(FlattenedParams params, OrthonormalFrame frame);

  const FlattenedParams& params() const { return params_; }
  const OrthonormalFrame& frame() const { return frame_; }

  std::string_view family() const override { return "flattened"; }
  int components() const override { return 1; }
  Eigen::Index dim() const override { return params_.d; }
  double strong_convexity() const override { return params_.lambda; }
  double component_smoothness() const override { return params_.mu; }
  double objective_smoothness() const override { return params_.mu; }

  OracleResponse evaluate(int i, const Eigen::VectorXd& w) const override;
  double objective(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd optimum() const override { return optimum_; }
  double gap(const Eigen::VectorXd& w) const override;
  double optimum_gradient_norm() const { return optimum_gradient_norm_; }

 private:
  FlattenedParams params_;
  OrthonormalFrame frame_;
  Eigen::VectorXd optimum_;
  double optimum_gradient_norm_ = 0.0;
};

struct OptimumBracket {
  Eigen::VectorXd anchor;
  double bound = 0.0;
  Eigen::VectorXd numeric_optimum;
  double displacement = 0.0;
  double optimum_norm_sq = 0.0;

  bool within_bound() const { return displacement <= bound; }
};

/// Anchor (1/2) sum_i q^i v_i (the minimizer at r = 0), its displacement
/// bound, and the measured distance to a numeric minimizer of the complete F.
OptimumBracket flattened_optimum_bracket(const FlattenedParams& params, const OrthonormalFrame& frame);

/// A deterministic first-order or second-order method seen through the oracle.
class QueryAlgorithm {
 public:
  virtual ~QueryAlgorithm() = default;
  virtual std::string_view name() const = 0;
  virtual Eigen::VectorXd start(Eigen::Index d) = 0;
  /// Next query from the answer at the current one.
  virtual Eigen::VectorXd respond(const Eigen::VectorXd& w, const OracleResponse& response) = 0;
};

class GradientDescentCallback final : public QueryAlgorithm {
 public:
  explicit GradientDescentCallback(double mu) : mu_(mu) {}
  std::string_view name() const override { return "gd"; }
  Eigen::VectorXd start(Eigen::Index d) override;
  Eigen::VectorXd respond(const Eigen::VectorXd& w, const OracleResponse& response) override;

 private:
  double mu_;
};

class NesterovCallback final : public QueryAlgorithm {
 public:
  NesterovCallback(double mu, double lambda);
  std::string_view name() const override { return "nesterov"; }
  Eigen::VectorXd start(Eigen::Index d) override;
  Eigen::VectorXd respond(const Eigen::VectorXd& w, const OracleResponse& response) override;

 private:
  double mu_;
  double momentum_;
  Eigen::VectorXd x_prev_;
};

class DampedNewtonCallback final : public QueryAlgorithm {
 public:
  explicit DampedNewtonCallback(double damping = 0.5) : damping_(damping) {}
  std::string_view name() const override { return "newton"; }
  Eigen::VectorXd start(Eigen::Index d) override;
  Eigen::VectorXd respond(const Eigen::VectorXd& w, const OracleResponse& response) override;

 private:
  double damping_;
};

class ZeroQueryCallback final : public QueryAlgorithm {
 public:
  std::string_view name() const override { return "zero"; }
  Eigen::VectorXd start(Eigen::Index d) override { return Eigen::VectorXd::Zero(d); }
  Eigen::VectorXd respond(const Eigen::VectorXd& w, const OracleResponse&) override {
    return Eigen::VectorXd::Zero(w.size());
  }
};

/// "gd", "nesterov", "newton" or "zero".
std::unique_ptr<QueryAlgorithm> make_callback(std::string_view name, double mu, double lambda);

struct ResistRow {
  int t = 0;
  double ratio = 0.0;
  double envelope = 0.0;
};

struct ResistResult {
  FlattenedParams params;
  OrthonormalFrame frame;
  /// w_1..w_T; w_T is the algorithm's output after T-1 answers.
  std::vector<Eigen::VectorXd> queries;
  std::vector<OracleResponse> responses;
  std::vector<ResistRow> rows;
  double inner_wT_vT = 0.0;
  /// Largest entrywise gap between lazy answers and full-frame recomputation.
  double max_response_deviation = 0.0;
  /// Largest |<v_i, w_t>| over t <= i.
  double max_query_overlap = 0.0;
  OptimumBracket bracket;
};

/// Runs the interleaved resisting-oracle protocol. Frame directions are drawn
/// from derive_seed(seed, "resist/frame"). Requires r > 0.
ResistResult resist(QueryAlgorithm& algorithm, const FlattenedParams& params, std::uint64_t seed);

}  // namespace oclb
