#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "oclb/bounds.hpp"
#include "oclb/chain_instance.hpp"
#include "oclb/oracle.hpp"

namespace oclb {

/// n^(d-1); throws std::overflow_error past int64.
std::int64_t tuple_count(int n, int d);

/// Mixed radix, j_1 most significant: (j_1 - 1) n^(d-2) + ... + (j_{d-1} - 1).
std::int64_t tuple_rank(std::span<const int> tuple, int n);
std::vector<int> rank_tuple(std::int64_t rank, int n, int d);

/// Every chain sub-problem at once: block #j of u (coordinates #j*d .. #j*d+d-1)
/// carries the chain whose owners are the tuple j.
class BlockInstance final : public FiniteSum {
 public:
  static constexpr Eigen::Index kMaxDim = 2000;

  explicit BlockInstance(const ProblemParams& params);

  const ProblemParams& params() const { return params_; }
  const RateConstants& rates() const { return rates_; }
  std::int64_t tuples() const { return tuples_; }

  std::string_view family() const override { return "block"; }
  int components() const override { return params_.n; }
  Eigen::Index dim() const override { return dim_; }
  double strong_convexity() const override { return params_.lambda; }
  double component_smoothness() const override { return params_.mu; }
  double objective_smoothness() const override;

  OracleResponse evaluate(int i, const Eigen::VectorXd& u) const override;
  double objective(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd optimum() const override { return optimum_; }
  double gap(const Eigen::VectorXd& u) const override;

  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& u) const;

 private:
  ProblemParams params_;
  RateConstants rates_;
  ChainCoefficients coeffs_;
  std::int64_t tuples_;
  Eigen::Index dim_;
  ChainInstance averaged_;  // any owners: F does not depend on them
  Eigen::VectorXd optimum_;
};

/// Each block holds the chain minimizer.
Eigen::VectorXd block_optimum(const BlockInstance& instance);

/// Largest 1-based index with |value| > tolerance in each block, 0 for a zero block.
std::vector<int> per_block_heads(const Eigen::VectorXd& u, int n, int d, double tolerance = 1e-12);

}  // namespace oclb
