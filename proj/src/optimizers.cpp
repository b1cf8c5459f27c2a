#include "oclb/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include "oclb/bounds.hpp"
#include "oclb/rng.hpp"

namespace oclb {

namespace {

constexpr double kDivergenceRatio = 1e6;

// One run: declared schedule, ledger, per-call ratio samples.
class Session {
 public:
  Session(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options, std::uint64_t seed,
          std::vector<int> schedule)
      : instance_(instance), options_(options) {
    trace_.optimizer = spec.name;
    trace_.seed = seed;
    trace_.oblivious = spec.oblivious;
    trace_.linear_algebraic = spec.linear_algebraic;
    trace_.race_exempt = spec.race_exempt;
    trace_.declared_schedule = std::move(schedule);
    trace_.ledger = CallLedger(options.record_points);
    x_ = Eigen::VectorXd::Zero(instance.dim());
    initial_gap_ = instance.gap(x_);
    if (!(initial_gap_ > 0.0)) throw std::domain_error("suboptimality ratio undefined: F(0) = F*");
    ratio_ = 1.0;
  }

  std::int64_t calls() const { return trace_.ledger.total(); }
  bool room(std::int64_t k) const { return !trace_.diverged && calls() + k <= options_.max_calls; }
  const Eigen::VectorXd& iterate() const { return x_; }
  bool diverged() const { return trace_.diverged; }

  // Next entry of the declared schedule.
  std::pair<int, OracleResponse> call(const Eigen::VectorXd& w) {
    const auto k = static_cast<std::size_t>(calls());
    if (k >= trace_.declared_schedule.size()) throw std::logic_error("declared schedule exhausted");
    const int i = trace_.declared_schedule[k];
    return {i, call_index(i, w)};
  }

  OracleResponse call_index(int i, const Eigen::VectorXd& w) {
    OracleResponse r = query(instance_, w, i, trace_.ledger);
    trace_.samples.push_back({calls(), ratio_});
    return r;
  }

  // Installs a new iterate; false once the run has diverged.
  bool update(const Eigen::VectorXd& x) {
    ++trace_.iterations;
    x_ = x;
    ratio_ = x_.allFinite() ? instance_.gap(x_) / initial_gap_ : std::numeric_limits<double>::quiet_NaN();
    if (!trace_.samples.empty()) trace_.samples.back().ratio = ratio_;
    if (!std::isfinite(ratio_) || ratio_ > kDivergenceRatio) trace_.diverged = true;
    return !trace_.diverged;
  }

  OptimizerTrace finish() {
    trace_.final_iterate = x_;
    return std::move(trace_);
  }

 private:
  const FiniteSum& instance_;
  RunOptions options_;
  OptimizerTrace trace_;
  Eigen::VectorXd x_;
  double initial_gap_ = 1.0;
  double ratio_ = 1.0;
};

std::vector<int> repeat_passes(int n, std::int64_t passes) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(passes * n));
  for (std::int64_t p = 0; p < passes; ++p) {
    for (int i = 1; i <= n; ++i) out.push_back(i);
  }
  return out;
}

// s distinct indices from {1..n}, partial Fisher-Yates.
std::vector<int> sample_without_replacement(Rng& rng, int n, int s) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 1);
  for (int k = 0; k < s; ++k) {
    const int pick = k + uniform_index(rng, n - k);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
  }
  pool.resize(static_cast<std::size_t>(s));
  return pool;
}

// (weight * sum_k H_k + extra I)^{-1} g.
Eigen::VectorXd solve_combined(std::span<const StructuredHessian> hessians, double weight, double extra,
                               const Eigen::VectorXd& g) {
  const Eigen::Index d = g.size();
  const bool rotated = std::any_of(hessians.begin(), hessians.end(), [](const auto& h) { return h.basis.has_value(); });
  if (rotated) {
    Eigen::MatrixXd m = extra * Eigen::MatrixXd::Identity(d, d);
    for (const auto& h : hessians) m += weight * h.dense();
    return m.ldlt().solve(g);
  }
  std::vector<Eigen::Triplet<double>> all;
  double shift = extra;
  for (const auto& h : hessians) {
    shift += weight * h.diagonal_shift;
    for (const auto& t : h.sparse_terms) all.emplace_back(t.row(), t.col(), weight * t.value());
  }
  for (Eigen::Index k = 0; k < d; ++k) all.emplace_back(k, k, shift);
  Eigen::SparseMatrix<double> m(d, d);
  m.setFromTriplets(all.begin(), all.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(m);
  if (solver.info() != Eigen::Success) throw std::runtime_error("Hessian factorization failed");
  return solver.solve(g);
}

double step_or(const OptimizerSpec& spec, double fallback) { return spec.step > 0.0 ? spec.step : fallback; }

}  // namespace

OptimizerSpec default_spec(std::string_view name) {
  OptimizerSpec spec;
  spec.name = std::string(name);
  if (name == "newton") {
    spec.linear_algebraic = false;
    spec.race_exempt = true;
  } else if (name == "ssn-full") {
    spec.full_sample = true;
    spec.linear_algebraic = false;
    spec.race_exempt = true;
  } else if (name == "greedy") {
    spec.oblivious = false;
    spec.race_exempt = true;
  } else if (name != "gd" && name != "agd" && name != "ssn" && name != "svrg" && name != "lissa") {
    throw std::invalid_argument("unknown optimizer '" + spec.name + "'");
  }
  return spec;
}

std::vector<std::string> known_optimizers() {
  return {"gd", "agd", "newton", "ssn", "ssn-full", "svrg", "lissa", "greedy"};
}

OptimizerTrace run_gd(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                      std::uint64_t seed) {
  const int n = instance.components();
  Session s(instance, spec, options, seed, repeat_passes(n, options.max_calls / n));
  const double eta = step_or(spec, 1.0 / instance.component_smoothness());
  while (s.room(n)) {
    const Eigen::VectorXd w = s.iterate();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (int k = 0; k < n; ++k) g += s.call(w).second.gradient;
    if (!s.update(w - eta * (g / n))) break;
  }
  return s.finish();
}

OptimizerTrace run_agd(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                       std::uint64_t seed) {
  const int n = instance.components();
  Session s(instance, spec, options, seed, repeat_passes(n, options.max_calls / n));
  const double mu = instance.component_smoothness();
  const double eta = step_or(spec, 1.0 / mu);
  const double root = std::sqrt(mu / instance.strong_convexity());
  const double momentum = (root - 1.0) / (root + 1.0);
  Eigen::VectorXd y = s.iterate();
  while (s.room(n)) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(y.size());
    for (int k = 0; k < n; ++k) g += s.call(y).second.gradient;
    const Eigen::VectorXd x_prev = s.iterate();
    const Eigen::VectorXd x = y - eta * (g / n);
    if (!s.update(x)) break;
    y = x + momentum * (x - x_prev);
  }
  return s.finish();
}

OptimizerTrace run_newton_full(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                               std::uint64_t seed) {
  const int n = instance.components();
  Session s(instance, spec, options, seed, repeat_passes(n, 1));
  if (!s.room(n)) return s.finish();
  const Eigen::VectorXd w = s.iterate();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  std::vector<StructuredHessian> hessians;
  hessians.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    OracleResponse r = s.call(w).second;
    g += r.gradient;
    hessians.push_back(std::move(r.hessian));
  }
  s.update(w - solve_combined(hessians, 1.0 / n, 0.0, g / n));
  return s.finish();
}

OptimizerTrace run_subsampled_newton(const FiniteSum& instance, const OptimizerSpec& spec,
                                     const RunOptions& options, std::uint64_t seed) {
  const int n = instance.components();
  const int sample = spec.full_sample ? n : (spec.sample_size > 0 ? spec.sample_size : std::max(1, n / 2));
  if (sample > n) throw std::invalid_argument("sample size exceeds n");
  if (!spec.full_sample && n > 1 && sample > n / 2) {
    throw std::invalid_argument("sample size above floor(n/2) breaks the window assumption");
  }
  const double lambda = instance.strong_convexity();
  const double rho = spec.full_sample ? 0.0 : (spec.rho >= 0.0 ? spec.rho : lambda);
  const double alpha = spec.full_sample ? 1.0 : step_or(spec, std::min(1.0, (lambda + rho) / instance.objective_smoothness()));

  const std::int64_t per_iteration = n + sample;
  const std::int64_t iterations = options.max_calls / per_iteration;
  Rng rng(derive_seed(seed, "optim/ssn"));
  std::vector<int> schedule;
  schedule.reserve(static_cast<std::size_t>(iterations * per_iteration));
  for (std::int64_t it = 0; it < iterations; ++it) {
    for (int i = 1; i <= n; ++i) schedule.push_back(i);
    const std::vector<int> subset = sample_without_replacement(rng, n, sample);
    schedule.insert(schedule.end(), subset.begin(), subset.end());
  }

  Session s(instance, spec, options, seed, std::move(schedule));
  std::vector<StructuredHessian> hessians;
  while (s.room(per_iteration)) {
    const Eigen::VectorXd w = s.iterate();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (int k = 0; k < n; ++k) g += s.call(w).second.gradient;
    g /= n;
    hessians.clear();
    for (int k = 0; k < sample; ++k) hessians.push_back(s.call(w).second.hessian);
    if (!s.update(w - alpha * solve_combined(hessians, 1.0 / sample, rho, g))) break;
  }
  return s.finish();
}

OptimizerTrace run_svrg_like(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                             std::uint64_t seed) {
  const int n = instance.components();
  const int inner = spec.inner_steps > 0 ? spec.inner_steps : 2 * n;
  const double eta = step_or(spec, 1.0 / (4.0 * instance.component_smoothness()));
  const std::int64_t per_epoch = n + inner;
  const std::int64_t epochs = options.max_calls / per_epoch;

  Rng rng(derive_seed(seed, "optim/svrg"));
  std::vector<int> schedule;
  schedule.reserve(static_cast<std::size_t>(epochs * per_epoch));
  for (std::int64_t e = 0; e < epochs; ++e) {
    for (int i = 1; i <= n; ++i) schedule.push_back(i);
    for (int k = 0; k < inner; ++k) schedule.push_back(1 + uniform_index(rng, n));
  }

  Session s(instance, spec, options, seed, std::move(schedule));
  std::vector<Eigen::VectorXd> snapshot_grads(static_cast<std::size_t>(n));
  while (s.room(per_epoch)) {
    const Eigen::VectorXd snapshot = s.iterate();
    Eigen::VectorXd full = Eigen::VectorXd::Zero(snapshot.size());
    for (int k = 0; k < n; ++k) {
      auto [i, r] = s.call(snapshot);
      full += r.gradient;
      snapshot_grads[static_cast<std::size_t>(i) - 1] = std::move(r.gradient);
    }
    full /= n;
    bool ok = true;
    for (int k = 0; k < inner && ok; ++k) {
      const Eigen::VectorXd x = s.iterate();
      auto [i, r] = s.call(x);
      ok = s.update(x - eta * (r.gradient - snapshot_grads[static_cast<std::size_t>(i) - 1] + full));
    }
    if (!ok) break;
  }
  return s.finish();
}

Eigen::VectorXd lissa_direction(const Eigen::VectorXd& g, std::span<const StructuredHessian> hessians, double mu) {
  Eigen::VectorXd x = g;
  for (const auto& h : hessians) x = g + x - h.apply(x) / mu;
  return x / mu;
}

OptimizerTrace run_lissa_like(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                              std::uint64_t seed) {
  const int n = instance.components();
  const int depth = spec.depth >= 0 ? spec.depth : 4;
  const double eta = step_or(spec, 0.5);
  const double mu = instance.component_smoothness();
  const std::int64_t per_iteration = n + depth;
  const std::int64_t iterations = options.max_calls / per_iteration;

  Rng rng(derive_seed(seed, "optim/lissa"));
  std::vector<int> schedule;
  schedule.reserve(static_cast<std::size_t>(iterations * per_iteration));
  for (std::int64_t it = 0; it < iterations; ++it) {
    for (int i = 1; i <= n; ++i) schedule.push_back(i);
    for (int k = 0; k < depth; ++k) schedule.push_back(1 + uniform_index(rng, n));
  }

  Session s(instance, spec, options, seed, std::move(schedule));
  while (s.room(per_iteration)) {
    const Eigen::VectorXd w = s.iterate();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (int k = 0; k < n; ++k) g += s.call(w).second.gradient;
    g /= n;
    // Streamed: each Hessian is applied right after it is returned.
    Eigen::VectorXd x = g;
    for (int k = 0; k < depth; ++k) {
      const OracleResponse r = s.call(w).second;
      x = g + x - r.hessian.apply(x) / mu;
    }
    if (!s.update(w - eta * x / mu)) break;
  }
  return s.finish();
}

OptimizerTrace run_greedy_adaptive(const FiniteSum& instance, const OptimizerSpec& spec,
                                   const RunOptions& options, std::uint64_t seed) {
  const int n = instance.components();
  const Eigen::Index d = instance.dim();
  Session s(instance, spec, options, seed, repeat_passes(n, options.max_calls / n + 1));
  const double eta = step_or(spec, 1.0 / (4.0 * instance.component_smoothness()));

  std::vector<Eigen::VectorXd> table(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));
  std::map<Eigen::Index, int> block_owner;
  if (!s.room(n)) return s.finish();
  for (int i = 1; i <= n; ++i) {
    OracleResponse r = s.call_index(i, s.iterate());
    for (const auto& t : r.hessian.sparse_terms) {
      if (!r.hessian.basis && t.col() == t.row() + 1 && t.value() != 0.0) block_owner[t.row()] = i;
    }
    table[static_cast<std::size_t>(i) - 1] = std::move(r.gradient);
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (const auto& g : table) sum += g;
  if (!s.update(s.iterate() - eta * sum / n)) return s.finish();

  int round_robin = 0;
  while (s.room(1)) {
    const Eigen::VectorXd& x = s.iterate();
    Eigen::Index head = 0;
    for (Eigen::Index k = d - 1; k >= 0; --k) {
      if (std::abs(x[k]) > 1e-12) {
        head = k;
        break;
      }
    }
    int i = 0;
    if (const auto it = block_owner.find(head); it != block_owner.end()) {
      i = it->second;
    } else {
      i = round_robin % n + 1;
      ++round_robin;
    }
    OracleResponse r = s.call_index(i, x);
    sum += r.gradient - table[static_cast<std::size_t>(i) - 1];
    table[static_cast<std::size_t>(i) - 1] = std::move(r.gradient);
    if (!s.update(x - eta * sum / n)) break;
  }
  return s.finish();
}

OptimizerTrace run_optimizer(const FiniteSum& instance, const OptimizerSpec& spec, const RunOptions& options,
                             std::uint64_t seed) {
  const std::string& name = spec.name;
  if (name == "gd") return run_gd(instance, spec, options, seed);
  if (name == "agd") return run_agd(instance, spec, options, seed);
  if (name == "newton") return run_newton_full(instance, spec, options, seed);
  if (name == "ssn" || name == "ssn-full") return run_subsampled_newton(instance, spec, options, seed);
  if (name == "svrg") return run_svrg_like(instance, spec, options, seed);
  if (name == "lissa") return run_lissa_like(instance, spec, options, seed);
  if (name == "greedy") return run_greedy_adaptive(instance, spec, options, seed);
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

RaceResult race_against_envelope(const OptimizerTrace& trace, double mu, double lambda, int n) {
  RaceResult out;
  out.worst_log_margin = std::numeric_limits<double>::infinity();
  for (const auto& sample : trace.samples) {
    ++out.checked;
    const double log_ratio = sample.ratio > 0.0 ? std::log(sample.ratio) : -std::numeric_limits<double>::infinity();
    const double margin = log_ratio - thm2_log_envelope(mu, lambda, n, sample.calls);
    if (!(margin >= 0.0)) ++out.violations;
    if (!(margin >= out.worst_log_margin)) {
      out.worst_log_margin = margin;
      out.worst_calls = sample.calls;
    }
  }
  return out;
}

bool passes_obliviousness(const OptimizerTrace& trace) {
  return obliviousness_audit(trace.ledger, trace.declared_schedule);
}

AuditResult support_audit(const OptimizerTrace& trace, std::span<const int> owners, int n, int d) {
  if (!trace.ledger.records_points()) throw std::invalid_argument("support audit needs recorded query points");
  const std::vector<int> indices = trace.ledger.indices();
  return iterate_support_audit(indices, trace.ledger.points(), trace.final_iterate, owners, n, d);
}

}  // namespace oclb
