#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace oclb {

/// Hessian kept in factored form:
///
///   H = diagonal_shift * I + B * S * B^T
///
/// where S is the symmetric sparse matrix described by `sparse_terms` and B is
/// `basis` (dim x k, orthonormal columns) or the identity when absent. Chain
/// Hessians are tridiagonal, so nothing dense is ever built on the hot path.
struct StructuredHessian {
  static constexpr Eigen::Index kDenseLimit = 2000;

  Eigen::Index dim = 0;
  double diagonal_shift = 0.0;
  std::vector<Eigen::Triplet<double>> sparse_terms;
  std::optional<Eigen::MatrixXd> basis;

  Eigen::Index inner_dim() const { return basis ? basis->cols() : dim; }
  bool symmetric() const;

  /// Dense materialization; only for dim <= kDenseLimit.
  Eigen::MatrixXd dense() const;
  /// Sparse materialization; only when no basis is attached.
  Eigen::SparseMatrix<double> sparse() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

/// True when both carry the same shift, the same terms in the same order and
/// the same basis, bit for bit.
bool identical(const StructuredHessian& a, const StructuredHessian& b);

struct OracleResponse {
  double value = 0.0;
  Eigen::VectorXd gradient;
  StructuredHessian hessian;
};

/// F(w) = (1/n) sum_i f_i(w). Component indices are 1-based throughout.
///
/// `evaluate`, `objective` and `gap` are measurement paths and are never
/// counted; optimizers go through `query()` below.
class FiniteSum {
 public:
  virtual ~FiniteSum() = default;

  virtual std::string_view family() const = 0;
  virtual int components() const = 0;
  virtual Eigen::Index dim() const = 0;

  /// lambda: every component and F are lambda-strongly convex.
  virtual double strong_convexity() const = 0;
  /// mu: every component is mu-smooth.
  virtual double component_smoothness() const = 0;
  /// Smoothness of the average F.
  virtual double objective_smoothness() const = 0;

  virtual OracleResponse evaluate(int i, const Eigen::VectorXd& w) const = 0;
  /// Closed-form F, independent of the component sum.
  virtual double objective(const Eigen::VectorXd& w) const = 0;
  virtual Eigen::VectorXd optimum() const = 0;
  /// F(w) - F*, evaluated without cancellation against F*.
  virtual double gap(const Eigen::VectorXd& w) const = 0;

  void check_index(int i) const;
  void check_point(const Eigen::VectorXd& w) const;
};

struct LedgerEntry {
  std::int64_t step = 0;
  int index = 0;
  std::uint64_t point_hash = 0;
};

/// Append-only record of every counted oracle call of one run.
class CallLedger {
 public:
  explicit CallLedger(bool record_points = false) : record_points_(record_points) {}

  void append(int index, const Eigen::VectorXd& w);

  std::int64_t total() const { return static_cast<std::int64_t>(entries_.size()); }
  std::int64_t count(int index) const;
  const std::map<int, std::int64_t>& per_index_counts() const { return counts_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  /// Query points, populated only when constructed with record_points.
  const std::vector<Eigen::VectorXd>& points() const { return points_; }
  bool records_points() const { return record_points_; }
  std::vector<int> indices() const;

  /// `t,index,point_hash` with the hash as 16 lowercase hex digits.
  void write_csv(std::ostream& out) const;

 private:
  bool record_points_;
  std::vector<LedgerEntry> entries_;
  std::vector<Eigen::VectorXd> points_;
  std::map<int, std::int64_t> counts_;
};

/// Counted second-order oracle call.
OracleResponse query(const FiniteSum& instance, const Eigen::VectorXd& w, int i, CallLedger& ledger);

/// (F(w) - F*)/(F(0) - F*); empty when F(0) == F* (the ratio is undefined).
std::optional<double> suboptimality_ratio(const FiniteSum& instance, const Eigen::VectorXd& w);

/// (1/n) sum_i f_i(w) through uncounted component evaluations.
double component_average(const FiniteSum& instance, const Eigen::VectorXd& w);

/// Passes iff the ledger's index sequence is a prefix of the declared schedule.
bool obliviousness_audit(const CallLedger& ledger, std::span<const int> declared_schedule);

}  // namespace oclb
