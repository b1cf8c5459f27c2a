#include "oclb/span_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oclb/block_instance.hpp"
#include "oclb/rng.hpp"

namespace oclb {

SpanState::SpanState(int n, int d)
    : n_(n), d_(d), capacity_(std::max(1, n / 2)), counts_(static_cast<std::size_t>(n) + 1, 0) {
  if (n < 1) throw std::invalid_argument("SpanState needs n >= 1");
  if (d < 2) throw std::invalid_argument("SpanState needs d >= 2");
}

int SpanState::advance(int i, std::span<const int> owners) {
  if (i < 1 || i > n_) throw std::out_of_range("index outside [1, n]");
  if (owners.size() != static_cast<std::size_t>(d_ - 1)) throw std::invalid_argument("owners must have d-1 entries");
  ++t_;
  window_.push_back(i);
  ++counts_[static_cast<std::size_t>(i)];
  if (static_cast<int>(window_.size()) > capacity_) {
    --counts_[static_cast<std::size_t>(window_.front())];
    window_.pop_front();
  }
  while (ell_ < d_ - 1 && in_window(owners[static_cast<std::size_t>(ell_) - 1])) ++ell_;
  return ell_;
}

int ell_after(int n, int d, int T, std::span<const int> schedule, std::span<const int> owners) {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (schedule.size() < static_cast<std::size_t>(T - 1)) throw std::invalid_argument("schedule shorter than T-1");
  SpanState state(n, d);
  for (int t = 0; t + 1 < T; ++t) state.advance(schedule[static_cast<std::size_t>(t)], owners);
  return state.ell();
}

std::vector<int> round_robin_schedule(int n, std::size_t length) {
  if (n < 1) throw std::invalid_argument("schedule needs n >= 1");
  std::vector<int> out(length);
  for (std::size_t k = 0; k < length; ++k) out[k] = static_cast<int>(k % static_cast<std::size_t>(n)) + 1;
  return out;
}

std::vector<int> uniform_schedule(int n, std::size_t length, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("schedule needs n >= 1");
  Rng rng(derive_seed(seed, "span/schedule"));
  std::vector<int> out(length);
  for (int& i : out) i = 1 + uniform_index(rng, n);
  return out;
}

double progress_bound(int n, long long T) { return 1.0 + 2.0 * static_cast<double>(T - 1) / n; }

std::vector<ProgressEstimate> progress_curve_mc(int n, int d, int T_max, std::span<const int> schedule,
                                                int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (T_max < 1) throw std::invalid_argument("T must be >= 1");
  if (schedule.size() < static_cast<std::size_t>(T_max - 1)) throw std::invalid_argument("schedule shorter than T-1");
  if (n < 1 || d < 2) throw std::invalid_argument("progress simulation needs n >= 1 and d >= 2");

  std::vector<double> sum(static_cast<std::size_t>(T_max), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(T_max), 0.0);
  std::vector<int> owners(static_cast<std::size_t>(d - 1));
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(seed, "span/owners", static_cast<std::uint64_t>(trial)));
    for (int& j : owners) j = 1 + uniform_index(rng, n);
    SpanState state(n, d);
    for (int T = 1; T <= T_max; ++T) {
      if (T > 1) state.advance(schedule[static_cast<std::size_t>(T - 2)], owners);
      const double ell = state.ell();
      sum[static_cast<std::size_t>(T - 1)] += ell;
      sum_sq[static_cast<std::size_t>(T - 1)] += ell * ell;
    }
  }

  std::vector<ProgressEstimate> out;
  out.reserve(static_cast<std::size_t>(T_max));
  for (int T = 1; T <= T_max; ++T) {
    const double m = sum[static_cast<std::size_t>(T - 1)] / trials;
    double var = 0.0;
    if (trials > 1) var = std::max(0.0, (sum_sq[static_cast<std::size_t>(T - 1)] - trials * m * m) / (trials - 1));
    out.push_back({T, m, std::sqrt(var / trials), progress_bound(n, T)});
  }
  return out;
}

ProgressEstimate expected_progress_mc(int n, int d, int T, std::span<const int> schedule, int trials,
                                      std::uint64_t seed) {
  return progress_curve_mc(n, d, T, schedule, trials, seed).back();
}

double exact_expected_ell(int n, int d, int T, std::span<const int> schedule) {
  const std::int64_t count = tuple_count(n, d);
  double total = 0.0;
  for (std::int64_t rank = 0; rank < count; ++rank) {
    total += ell_after(n, d, T, schedule, rank_tuple(rank, n, d));
  }
  return total / static_cast<double>(count);
}

AdversarialResult adversarial_average(int n, int d, int T, std::int64_t budget) {
  if (n < 1 || d < 2 || T < 1) throw std::invalid_argument("adversarial_average needs n >= 1, d >= 2, T >= 1");
  const std::int64_t tuples = tuple_count(n, d);
  const std::int64_t schedules = tuple_count(n, T);
  if (static_cast<double>(schedules) * static_cast<double>(tuples) * T > static_cast<double>(budget)) {
    throw std::length_error("exhaustive enumeration exceeds the budget");
  }

  std::vector<std::vector<int>> all_tuples;
  all_tuples.reserve(static_cast<std::size_t>(tuples));
  for (std::int64_t r = 0; r < tuples; ++r) all_tuples.push_back(rank_tuple(r, n, d));

  AdversarialResult out;
  out.bound = progress_bound(n, T);
  out.schedules = schedules;
  out.worst_average = -1.0;
  for (std::int64_t s = 0; s < schedules; ++s) {
    const std::vector<int> schedule = rank_tuple(s, n, T);
    std::int64_t total = 0;
    for (const auto& owners : all_tuples) total += ell_after(n, d, T, schedule, owners);
    const double average = static_cast<double>(total) / static_cast<double>(tuples);
    if (average > out.worst_average) {
      out.worst_average = average;
      out.worst_schedule = schedule;
    }
  }
  return out;
}

GreedyTrace greedy_adaptive_schedule(std::span<const int> owners, int n, int T) {
  const int d = static_cast<int>(owners.size()) + 1;
  SpanState state(n, d);
  GreedyTrace out;
  out.ell.push_back(state.ell());
  for (int t = 1; t < T; ++t) {
    const int i = owners[static_cast<std::size_t>(state.ell()) - 1];
    out.schedule.push_back(i);
    out.ell.push_back(state.advance(i, owners));
  }
  return out;
}

double g_value(double q, int d, double z) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("g needs q in (0, 1)");
  if (d < 1) throw std::invalid_argument("g needs d >= 1");
  return z < d ? std::pow(q, 2.0 * (z + 1.0)) : 0.0;
}

bool jensen_bound_check(double q, int d, std::span<const double> samples) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("Jensen check needs q in (0, 1)");
  if (samples.empty()) throw std::invalid_argument("Jensen check needs samples");
  double mean = 0.0;
  double mean_g = 0.0;
  for (double z : samples) {
    if (!(z >= 0.0)) throw std::invalid_argument("samples must be non-negative");
    mean += z;
    mean_g += g_value(q, d, z);
  }
  mean /= static_cast<double>(samples.size());
  mean_g /= static_cast<double>(samples.size());
  if (mean > 0.5 * d) throw std::invalid_argument("sample mean exceeds d/2");
  const double slack = 1e-12 * mean_g;
  const bool expectation_form = mean_g + slack >= 0.5 * std::pow(q, 2.0 * mean + 2.0);
  const bool sequence_form = mean_g + slack >= 0.5 * g_value(q, d, mean);
  return expectation_form && sequence_form;
}

namespace {

std::optional<Eigen::Index> outside_support(const Eigen::VectorXd& w, Eigen::Index offset, int d, int ell) {
  for (int k = ell + 1; k < d; ++k) {
    if (std::abs(w[offset + k - 1]) > kSupportTolerance) return k;
  }
  return std::nullopt;
}

void check_lengths(std::span<const int> indices, std::span<const Eigen::VectorXd> queries) {
  if (indices.size() != queries.size()) throw std::invalid_argument("audit needs one query point per index");
}

}  // namespace

AuditResult iterate_support_audit(std::span<const int> indices, std::span<const Eigen::VectorXd> queries,
                                  const Eigen::VectorXd& final_iterate, std::span<const int> owners, int n,
                                  int d) {
  check_lengths(indices, queries);
  SpanState state(n, d);
  auto check = [&](const Eigen::VectorXd& w, std::int64_t step) -> std::optional<AuditResult> {
    if (w.size() != d) throw std::invalid_argument("audited point has the wrong dimension");
    if (const auto k = outside_support(w, 0, d, state.ell())) return AuditResult{false, step, *k, state.ell(), -1};
    return std::nullopt;
  };
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (auto bad = check(queries[t], static_cast<std::int64_t>(t) + 1)) return *bad;
    state.advance(indices[t], owners);
  }
  if (auto bad = check(final_iterate, static_cast<std::int64_t>(indices.size()) + 1)) return *bad;
  return {};
}

AuditResult block_support_audit(std::span<const int> indices, std::span<const Eigen::VectorXd> queries,
                                const Eigen::VectorXd& final_iterate, int n, int d) {
  check_lengths(indices, queries);
  const std::int64_t count = tuple_count(n, d);
  std::vector<std::vector<int>> owners;
  std::vector<SpanState> states;
  owners.reserve(static_cast<std::size_t>(count));
  states.reserve(static_cast<std::size_t>(count));
  for (std::int64_t r = 0; r < count; ++r) {
    owners.push_back(rank_tuple(r, n, d));
    states.emplace_back(n, d);
  }
  auto check = [&](const Eigen::VectorXd& u, std::int64_t step) -> std::optional<AuditResult> {
    const std::vector<int> heads = per_block_heads(u, n, d, kSupportTolerance);
    for (std::int64_t r = 0; r < count; ++r) {
      const int head = heads[static_cast<std::size_t>(r)];
      const int ell = states[static_cast<std::size_t>(r)].ell();
      const bool boundary_ok = head == d && ell == d - 1;
      if (head > ell && !boundary_ok) return AuditResult{false, step, head, ell, r};
    }
    return std::nullopt;
  };
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (auto bad = check(queries[t], static_cast<std::int64_t>(t) + 1)) return *bad;
    for (std::int64_t r = 0; r < count; ++r) {
      states[static_cast<std::size_t>(r)].advance(indices[t], owners[static_cast<std::size_t>(r)]);
    }
  }
  if (auto bad = check(final_iterate, static_cast<std::int64_t>(indices.size()) + 1)) return *bad;
  return {};
}

}  // namespace oclb
