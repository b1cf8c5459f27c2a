#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "oclb/oracle.hpp"
#include "oclb/span_analysis.hpp"

namespace oclb {

/// Name, compliance flags and tuning. Non-positive tuning values select the
/// method's default.
struct OptimizerSpec {
  std::string name;
  bool oblivious = true;
  bool linear_algebraic = true;
  bool race_exempt = false;

  double step = 0.0;
  int sample_size = 0;     ///< ssn: default floor(n/2)
  double rho = -1.0;       ///< ssn: default lambda
  bool full_sample = false;  ///< ssn: S = all n, rho = 0, unit step (exempt)
  int inner_steps = 0;     ///< svrg: default 2n
  int depth = -1;          ///< lissa: default 4
};

/// gd, agd, newton, ssn, ssn-full, svrg, lissa, greedy.
OptimizerSpec default_spec(std::string_view name);
std::vector<std::string> known_optimizers();

struct TraceSample {
  std::int64_t calls = 0;
  double ratio = 0.0;
};

struct OptimizerTrace {
  std::string optimizer;
  std::uint64_t seed = 0;
  bool oblivious = true;
  bool linear_algebraic = true;
  bool race_exempt = false;

  /// One sample per oracle call: the ratio of the latest iterate.
  std::vector<TraceSample> samples;
  Eigen::VectorXd final_iterate;
  std::vector<int> declared_schedule;
  CallLedger ledger{true};
  bool diverged = false;
  std::int64_t iterations = 0;
};

struct RunOptions {
  std::int64_t max_calls = 0;
  bool record_points = true;
};

/// Every method stops before an iteration that would exceed max_calls, or on
/// divergence (ratio > 1e6 or a non-finite iterate). Throws
/// std::domain_error when F(0) = F*.
OptimizerTrace run_gd(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                      std::uint64_t seed);
OptimizerTrace run_agd(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                       std::uint64_t seed);
/// Queries all n components at 0 and solves with their averaged Hessian.
OptimizerTrace run_newton_full(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                               std::uint64_t seed);
/// Full gradient (n calls) then a sample S of s distinct indices, queried
/// last; w -= alpha (H_S + rho I)^{-1} g.
OptimizerTrace run_subsampled_newton(const FiniteSum& instance, const OptimizerSpec& spec,
                                     const RunOptions& options, std::uint64_t seed);
OptimizerTrace run_svrg_like(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                             std::uint64_t seed);
/// Full gradient then `depth` sampled Hessians: x_j = g + (I - H_j/mu) x_{j-1},
/// w -= step * x_J / mu.
OptimizerTrace run_lissa_like(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                              std::uint64_t seed);
/// Reads block owners off the first pass of Hessians, then always queries
/// the owner of the frontier block. Not index-oblivious.
OptimizerTrace run_greedy_adaptive(const FiniteSum& instance, const OptimizerSpec& spec,
                                   const RunOptions& options, std::uint64_t seed);

OptimizerTrace run_optimizer(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                             std::uint64_t seed);

/// Neumann estimate x_J / mu of H^{-1} g from the listed Hessians, applied in order.
Eigen::VectorXd lissa_direction(const Eigen::VectorXd& g, std::span<const StructuredHessian> hessians, double mu);

struct RaceResult {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  /// min over samples of log(ratio) - log(envelope).
  double worst_log_margin = 0.0;
  std::int64_t worst_calls = 0;
};

/// Ratio after k calls against the finite-sum envelope at T = k.
RaceResult race_against_envelope(const OptimizerTrace& trace, double mu, double lambda, int n);

bool passes_obliviousness(const OptimizerTrace& trace);
AuditResult support_audit(const OptimizerTrace& trace, std::span<const int> owners, int n, int d);

}  // namespace oclb
