#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace oclb {

/// Coordinate-progress tracker: ell_1 = 1, and after the t-th index ell moves
/// to the largest value in {ell, ..., d-1} whose owners j_ell..j_{new-1} all sit
/// among the last max(1, floor(n/2)) indices.
class SpanState {
 public:
  SpanState(int n, int d);

  int ell() const { return ell_; }
  std::int64_t t() const { return t_; }
  int window_capacity() const { return capacity_; }
  const std::deque<int>& window() const { return window_; }
  bool in_window(int i) const { return counts_[static_cast<std::size_t>(i)] > 0; }

  /// owners[l-1] = j_l, length d-1. Returns the new ell.
  int advance(int i, std::span<const int> owners);

 private:
  int n_;
  int d_;
  int capacity_;
  int ell_ = 1;
  std::int64_t t_ = 0;
  std::deque<int> window_;
  std::vector<int> counts_;
};

/// ell after feeding the first T-1 entries of `schedule`.
int ell_after(int n, int d, int T, std::span<const int> schedule, std::span<const int> owners);

/// 1, 2, ..., n, 1, 2, ... of the given length.
std::vector<int> round_robin_schedule(int n, std::size_t length);
/// i.i.d. uniform indices from derive_seed(seed, "span/schedule").
std::vector<int> uniform_schedule(int n, std::size_t length, std::uint64_t seed);

/// 1 + 2(T-1)/n.
double progress_bound(int n, long long T);

struct ProgressEstimate {
  int T = 1;
  double mean = 1.0;
  double stderr_ = 0.0;
  double bound = 1.0;

  /// mean <= bound + sigmas * stderr.
  bool consistent(double sigmas = 4.0) const { return mean <= bound + sigmas * stderr_; }
};

/// Monte Carlo estimate of E[ell_T] over fresh owner draws for a fixed
/// schedule of length >= T-1. Trial k draws owners from
/// derive_seed(seed, "span/owners", k).
ProgressEstimate expected_progress_mc(int n, int d, int T, std::span<const int> schedule, int trials,
                                      std::uint64_t seed);

/// Same estimator for every T in 1..T_max from one run per trial.
std::vector<ProgressEstimate> progress_curve_mc(int n, int d, int T_max, std::span<const int> schedule,
                                                int trials, std::uint64_t seed);

/// Exact E[ell_T] by enumerating all n^(d-1) owner tuples.
double exact_expected_ell(int n, int d, int T, std::span<const int> schedule);

struct AdversarialResult {
  double worst_average = 1.0;
  std::vector<int> worst_schedule;
  double bound = 1.0;
  std::int64_t schedules = 0;

  bool holds() const { return worst_average <= bound + 1e-12; }
};

/// Max over all n^(T-1) schedules of the tuple-averaged ell_T. Throws
/// std::length_error when n^(T-1) * n^(d-1) * T exceeds `budget`.
AdversarialResult adversarial_average(int n, int d, int T, std::int64_t budget = 100'000'000);

/// Per-tuple adaptive schedule: always query the owner of the frontier block.
struct GreedyTrace {
  std::vector<int> schedule;
  std::vector<int> ell;  ///< ell_1..ell_T
};
GreedyTrace greedy_adaptive_schedule(std::span<const int> owners, int n, int T);

/// q^(2(z+1)) for z < d, else 0.
double g_value(double q, int d, double z);

/// Both Jensen forms: for the empirical distribution of `samples`
/// (non-negative, mean <= d/2), mean g >= (1/2) q^(2 mean + 2) and
/// mean g >= (1/2) g(mean). Throws on q outside (0,1) or broken preconditions.
bool jensen_bound_check(double q, int d, std::span<const double> samples);

struct AuditResult {
  bool pass = true;
  /// 1-based call count of the first offending point (T+1 for the final iterate).
  std::int64_t step = 0;
  /// 1-based coordinate (within its block for the block audit).
  Eigen::Index coordinate = 0;
  int ell = 0;
  std::int64_t block = -1;
};

inline constexpr double kSupportTolerance = 1e-10;

/// Query t (made after indices i_1..i_{t-1}) must vanish outside
/// {1..ell_t} and {d}; the final iterate is checked against ell_{T+1}.
AuditResult iterate_support_audit(std::span<const int> indices, std::span<const Eigen::VectorXd> queries,
                                  const Eigen::VectorXd& final_iterate, std::span<const int> owners, int n,
                                  int d);

/// Same audit on the block construction, every tuple tracked separately. A
/// block's head must not exceed its ell, except that coordinate d is admitted
/// once ell = d-1.
AuditResult block_support_audit(std::span<const int> indices, std::span<const Eigen::VectorXd> queries,
                                const Eigen::VectorXd& final_iterate, int n, int d);

}  // namespace oclb
