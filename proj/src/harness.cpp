#include "oclb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "oclb/block_instance.hpp"
#include "oclb/bounds.hpp"
#include "oclb/chain_instance.hpp"
#include "oclb/flattened_instance.hpp"
#include "oclb/rng.hpp"
#include "oclb/span_analysis.hpp"

namespace oclb {

namespace {

constexpr std::string_view kVersion = "1.0.0";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw UsageError("not a number: '" + text + "'");
  return value;
}

// to_text / from_text per field type.
std::string to_text(double x) { return format_number(x); }
std::string to_text(int x) { return std::to_string(x); }
std::string to_text(std::int64_t x) { return std::to_string(x); }
std::string to_text(std::uint64_t x) { return std::to_string(x); }
std::string to_text(bool x) { return x ? "true" : "false"; }
std::string to_text(const std::string& x) { return x; }
template <typename T>
std::string to_text(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += to_text(xs[k]);
  }
  return out;
}

void from_text(const std::string& s, double& x) { x = parse_number<double>(s); }
void from_text(const std::string& s, int& x) { x = parse_number<int>(s); }
void from_text(const std::string& s, std::int64_t& x) { x = parse_number<std::int64_t>(s); }
void from_text(const std::string& s, std::uint64_t& x) { x = parse_number<std::uint64_t>(s); }
void from_text(const std::string& s, bool& x) {
  if (s == "true") x = true;
  else if (s == "false") x = false;
  else throw UsageError("not a boolean: '" + s + "'");
}
void from_text(const std::string& s, std::string& x) { x = s; }
template <typename T>
void from_text(const std::string& s, std::vector<T>& xs) {
  xs.clear();
  for (const auto& item : split_list(s)) {
    T value{};
    from_text(item, value);
    xs.push_back(std::move(value));
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field field(std::string section, std::string key, T ExperimentConfig::*member) {
  return {std::move(section), std::move(key), [member](const ExperimentConfig& c) { return to_text(c.*member); },
          [member](ExperimentConfig& c, const std::string& s) { from_text(s, c.*member); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> all = {
      field("run", "seed", &C::seed),
      field("run", "seeds", &C::seeds),
      field("run", "out", &C::out),
      field("run", "jobs", &C::jobs),
      field("instance", "family", &C::family),
      field("instance", "mu", &C::mu),
      field("instance", "lambda", &C::lambda),
      field("instance", "n", &C::n),
      field("instance", "d", &C::d),
      field("race", "optimizers", &C::optimizers),
      field("race", "max_calls", &C::max_calls),
      field("race", "ledger", &C::ledger),
      field("gd", "step", &C::gd_step),
      field("agd", "step", &C::agd_step),
      field("ssn", "sample_size", &C::ssn_sample_size),
      field("ssn", "rho", &C::ssn_rho),
      field("ssn", "step", &C::ssn_step),
      field("svrg", "inner_steps", &C::svrg_inner_steps),
      field("svrg", "step", &C::svrg_step),
      field("lissa", "depth", &C::lissa_depth),
      field("lissa", "step", &C::lissa_step),
      field("span", "n", &C::span_n),
      field("span", "d", &C::span_d),
      field("span", "T", &C::span_T),
      field("span", "trials", &C::span_trials),
      field("span", "schedules", &C::span_schedules),
      field("resist", "mu", &C::resist_mu),
      field("resist", "lambda", &C::resist_lambda),
      field("resist", "T", &C::resist_T),
      field("resist", "callbacks", &C::resist_callbacks),
      field("block", "n", &C::block_n),
      field("block", "d", &C::block_d),
      field("block", "T", &C::block_T),
  };
  return all;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!seeds.empty(), "run.seeds must not be empty");
  require(jobs >= 1, "run.jobs must be >= 1");
  require(family == "chain" || family == "signflip" || family == "block", "instance.family must be chain, signflip or block");
  require(lambda > 0.0 && mu >= lambda && std::isfinite(mu), "instance needs 0 < lambda <= mu");
  require(n >= 1 && d >= 2, "instance needs n >= 1 and d >= 2");
  require(max_calls >= 0, "race.max_calls must be >= 0");
  for (const auto& name : optimizers) optimizer_spec(name);
  require(!span_n.empty() && std::all_of(span_n.begin(), span_n.end(), [](int v) { return v >= 1; }),
          "span.n must list values >= 1");
  require(span_d >= 2 && span_T >= 1 && span_trials >= 1, "span needs d >= 2, T >= 1, trials >= 1");
  for (const auto& s : span_schedules) {
    require(s == "round-robin" || s == "uniform", "span.schedules entries must be round-robin or uniform");
  }
  require(resist_lambda > 0.0 && resist_mu > 8.0 * resist_lambda, "resist needs mu > 8 lambda > 0");
  require(std::all_of(resist_T.begin(), resist_T.end(), [](int v) { return v >= 1; }), "resist.T must list values >= 1");
  for (const auto& cb : resist_callbacks) {
    require(cb == "gd" || cb == "nesterov" || cb == "newton" || cb == "zero", "unknown resist callback '" + cb + "'");
  }
  require(block_n >= 1 && block_d >= 2 && block_T >= 1, "block needs n >= 1, d >= 2, T >= 1");
}

OptimizerSpec ExperimentConfig::optimizer_spec(const std::string& name) const {
  OptimizerSpec spec;
  try {
    spec = default_spec(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (name == "gd") spec.step = gd_step;
  if (name == "agd") spec.step = agd_step;
  if (name == "ssn") {
    spec.sample_size = ssn_sample_size;
    spec.rho = ssn_rho;
    spec.step = ssn_step;
  }
  if (name == "svrg") {
    spec.inner_steps = svrg_inner_steps;
    spec.step = svrg_step;
  }
  if (name == "lissa") {
    spec.depth = lissa_depth;
    spec.step = lissa_step;
  }
  return spec;
}

ExperimentConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::map<std::string, const Field*>> known;
  for (const auto& f : fields()) known[f.section][f.key] = &f;

  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw UsageError("config: key '" + section + "' outside any section");
    const auto sec = known.find(section);
    if (sec == known.end()) continue;
    for (const auto& [key, value] : body) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) throw UsageError("config: unknown key '" + section + "." + key + "'");
      try {
        it->second->set(config, trim(value.data()));
      } catch (const UsageError& e) {
        throw UsageError("config: " + section + "." + key + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += '[' + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(config) + '\n';
  }
  return out;
}

std::string format_number(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::uint64_t run_seed(std::uint64_t root, std::uint64_t label) { return derive_seed(root, "run", label); }

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string race_csv(std::span<const RaceRun> runs) {
  std::vector<const RaceRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const RaceRun* a, const RaceRun* b) {
    if (a->trace.optimizer != b->trace.optimizer) return a->trace.optimizer < b->trace.optimizer;
    return a->seed < b->seed;
  });
  std::string out = "optimizer,seed,t,calls,ratio,envelope\n";
  for (const RaceRun* r : order) {
    std::int64_t t = 0;
    for (const auto& s : r->trace.samples) {
      out += r->trace.optimizer + ',' + std::to_string(r->seed) + ',' + std::to_string(++t) + ',' +
             std::to_string(s.calls) + ',' + format_number(s.ratio) + ',';
      out += r->trace.race_exempt ? std::string("exempt") : format_number(thm2_envelope(r->mu, r->lambda, r->n, s.calls));
      out += '\n';
    }
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw UsageError("write failed for '" + path.string() + "'");
}

}  // namespace

void export_results(std::span<const RaceRun> runs, const std::string& path) {
  if (runs.empty()) throw std::invalid_argument("export_results needs at least one trace");
  write_file(path, race_csv(runs));
}

std::string manifest_text(const ExperimentConfig& config, std::string_view command) {
  std::string out = serialize_config(config);
  out += "\n[manifest]\n";
  out += "command = " + std::string(command) + '\n';
  out += "rng = " + std::string(kRngName) + '\n';
  out += "seed_rule = run seed derive_seed(root, run, label); child derive_seed(parent, stream, index)\n";
  out += "version = " + std::string(kVersion) + '\n';
  return out;
}

namespace {

struct Context {
  ExperimentConfig config;
  std::filesystem::path out;
  std::ostream& log;
};

std::unique_ptr<FiniteSum> make_instance(const ExperimentConfig& c, std::uint64_t label) {
  ProblemParams p;
  p.mu = c.mu;
  p.lambda = c.lambda;
  p.n = c.n;
  p.d = c.d;
  const std::uint64_t seed = run_seed(c.seed, label);
  if (c.family == "chain") return std::make_unique<ChainInstance>(sample_chain(p, seed));
  if (c.family == "signflip") return std::make_unique<SignFlipInstance>(sample_signflip(c.lambda, c.n, seed, c.d));
  return std::make_unique<BlockInstance>(p);
}

void prepare_out(const Context& ctx, std::string_view command) {
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  if (ec) throw UsageError("cannot create output directory '" + ctx.out.string() + "'");
  write_file(ctx.out / (std::string(command) + ".manifest.ini"), manifest_text(ctx.config, command));
}

struct CheckRow {
  std::uint64_t seed;
  std::string check;
  double value;
  double limit;
  bool upper;  // pass iff value <= limit, else value >= limit
  bool pass() const { return upper ? value <= limit : value >= limit; }
};

constexpr Eigen::Index kSpectrumLimit = 400;

std::vector<CheckRow> verify_one(const ExperimentConfig& c, std::uint64_t label) {
  const auto instance = make_instance(c, label);
  const FiniteSum& f = *instance;
  const int n = f.components();
  const double lambda = f.strong_convexity();
  const double mu = f.component_smoothness();
  std::vector<CheckRow> rows;

  // F = (1/n) sum f_i, value and gradient, at random points.
  Rng rng(derive_seed(run_seed(c.seed, label), "verify/points"));
  double value_defect = 0.0;
  double gradient_defect = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd w = uniform_direction(rng, f.dim());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.dim());
    double v = 0.0;
    for (int i = 1; i <= n; ++i) {
      const OracleResponse r = f.evaluate(i, w);
      v += r.value;
      g += r.gradient;
    }
    v /= n;
    g /= n;
    const double F = f.objective(w);
    value_defect = std::max(value_defect, std::abs(v - F) / std::max(1.0, std::abs(F)));
    if (const auto* chain = dynamic_cast<const ChainInstance*>(&f)) {
      gradient_defect = std::max(gradient_defect, (g - chain->objective_gradient(w)).norm() / std::max(1.0, g.norm()));
    }
  }
  rows.push_back({label, "decomposition_value", value_defect, 1e-12, true});
  rows.push_back({label, "decomposition_gradient", gradient_defect, 1e-12, true});

  const Eigen::VectorXd opt = f.optimum();
  Eigen::VectorXd g_opt = Eigen::VectorXd::Zero(f.dim());
  for (int i = 1; i <= n; ++i) g_opt += f.evaluate(i, opt).gradient;
  rows.push_back({label, "optimum_stationarity", (g_opt / n).norm(), 1e-10, true});

  if (const auto* chain = dynamic_cast<const ChainInstance*>(&f)) {
    const double diff = (closed_form_optimum(*chain) - tridiagonal_solve_optimum(*chain)).cwiseAbs().maxCoeff();
    rows.push_back({label, "optimum_crosscheck", diff, 1e-10, true});
  }

  if (f.dim() <= kSpectrumLimit) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    Eigen::MatrixXd average = Eigen::MatrixXd::Zero(f.dim(), f.dim());
    for (int i = 1; i <= n; ++i) {
      const Eigen::MatrixXd h = f.evaluate(i, opt).hessian.dense();
      average += h / n;
      const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues();
      lo = std::min(lo, eig.minCoeff());
      hi = std::max(hi, eig.maxCoeff());
    }
    const Eigen::VectorXd eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(average, Eigen::EigenvaluesOnly).eigenvalues();
    rows.push_back({label, "component_eig_min", lo, lambda - 1e-8, false});
    rows.push_back({label, "component_eig_max", hi, mu + 1e-8, true});
    rows.push_back({label, "objective_eig_min", eig.minCoeff(), lambda - 1e-8, false});
    rows.push_back({label, "objective_eig_max", eig.maxCoeff(), f.objective_smoothness() + 1e-8, true});
  }
  return rows;
}

int cmd_verify(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<std::vector<CheckRow>> results(c.seeds.size());
  parallel_for(c.seeds.size(), c.jobs, [&](std::size_t k) { results[k] = verify_one(c, c.seeds[k]); });
  std::string csv = "seed,check,value,limit,pass\n";
  int failures = 0;
  for (const auto& rows : results) {
    for (const auto& r : rows) {
      csv += std::to_string(r.seed) + ',' + r.check + ',' + format_number(r.value) + ',' + format_number(r.limit) + ',' +
             (r.pass() ? "1" : "0") + '\n';
      if (!r.pass()) {
        ++failures;
        ctx.log << "FAIL seed " << r.seed << ' ' << r.check << " = " << format_number(r.value) << '\n';
      }
    }
  }
  write_file(ctx.out / "verify.csv", csv);
  ctx.log << "verify-instance: " << failures << " failed checks\n";
  return failures ? 1 : 0;
}

int cmd_span(const Context& ctx) {
  const auto& c = ctx.config;
  struct Job {
    int n;
    std::string schedule;
  };
  std::vector<Job> jobs;
  for (int n : c.span_n) {
    for (const auto& s : c.span_schedules) jobs.push_back({n, s});
  }
  const std::uint64_t seed = run_seed(c.seed, c.seeds.front());
  std::vector<std::vector<ProgressEstimate>> curves(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t k) {
    const auto length = static_cast<std::size_t>(std::max(0, c.span_T - 1));
    const std::vector<int> schedule = jobs[k].schedule == "uniform"
                                          ? uniform_schedule(jobs[k].n, length, derive_seed(seed, "span/n", jobs[k].n))
                                          : round_robin_schedule(jobs[k].n, length);
    curves[k] = progress_curve_mc(jobs[k].n, c.span_d, c.span_T, schedule, c.span_trials, seed);
  });
  int violations = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    std::string csv = "T,mean_ell,stderr,bound\n";
    for (const auto& e : curves[k]) {
      csv += std::to_string(e.T) + ',' + format_number(e.mean) + ',' + format_number(e.stderr_) + ',' +
             format_number(e.bound) + '\n';
      if (!e.consistent(4.0)) ++violations;
    }
    write_file(ctx.out / ("span_n" + std::to_string(jobs[k].n) + '_' + jobs[k].schedule + ".csv"), csv);
  }
  ctx.log << "simulate-span: " << violations << " points above bound + 4 stderr\n";
  return violations ? 1 : 0;
}

int cmd_race(const Context& ctx) {
  const auto& c = ctx.config;
  struct Job {
    std::string name;
    std::uint64_t label;
  };
  std::vector<Job> jobs;
  for (const auto& name : c.optimizers) {
    for (auto label : c.seeds) jobs.push_back({name, label});
  }
  std::vector<RaceRun> runs(jobs.size());
  std::vector<std::string> problems(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t k) {
    const auto instance = make_instance(c, jobs[k].label);
    const OptimizerSpec spec = c.optimizer_spec(jobs[k].name);
    RunOptions options;
    options.max_calls = c.max_calls;
    options.record_points = true;
    const std::uint64_t seed = derive_seed(run_seed(c.seed, jobs[k].label), "race/" + jobs[k].name);
    RaceRun& run = runs[k];
    run.seed = jobs[k].label;
    run.mu = c.mu;
    run.lambda = c.lambda;
    run.n = c.n;
    run.trace = run_optimizer(*instance, spec, options, seed);
    if (spec.race_exempt) return;
    std::string& why = problems[k];
    if (c.family == "chain") {
      const RaceResult race = race_against_envelope(run.trace, c.mu, c.lambda, c.n);
      if (race.violations) why += " envelope(" + std::to_string(race.violations) + ")";
    }
    if (spec.oblivious && !passes_obliviousness(run.trace)) why += " obliviousness";
    if (spec.linear_algebraic) {
      AuditResult audit;
      if (const auto* chain = dynamic_cast<const ChainInstance*>(instance.get())) {
        audit = support_audit(run.trace, chain->owners(), c.n, c.d);
      } else if (c.family == "block") {
        const std::vector<int> indices = run.trace.ledger.indices();
        audit = block_support_audit(indices, run.trace.ledger.points(), run.trace.final_iterate, c.n, c.d);
      }
      if (!audit.pass) why += " support(step " + std::to_string(audit.step) + ")";
    }
  });

  export_results(runs, (ctx.out / "race.csv").string());
  if (c.ledger) {
    std::filesystem::create_directories(ctx.out / "ledgers");
    for (const auto& run : runs) {
      std::ostringstream csv;
      run.trace.ledger.write_csv(csv);
      write_file(ctx.out / "ledgers" / (run.trace.optimizer + "_seed" + std::to_string(run.seed) + ".csv"), csv.str());
    }
  }
  int failures = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& t = runs[k].trace;
    ctx.log << t.optimizer << " seed " << runs[k].seed << ": calls " << t.ledger.total() << ", final ratio "
            << format_number(t.samples.empty() ? 1.0 : t.samples.back().ratio) << (t.race_exempt ? " (exempt)" : "")
            << (problems[k].empty() ? "" : " FAIL:" + problems[k]) << '\n';
    if (!problems[k].empty()) ++failures;
  }
  return failures ? 1 : 0;
}

int cmd_resist(const Context& ctx) {
  const auto& c = ctx.config;
  struct Job {
    std::string callback;
    int T;
    std::uint64_t label;
  };
  std::vector<Job> jobs;
  for (const auto& cb : c.resist_callbacks) {
    for (int T : c.resist_T) {
      for (auto label : c.seeds) jobs.push_back({cb, T, label});
    }
  }
  std::vector<ResistResult> results(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t k) {
    const FlattenedParams params = FlattenedParams::make(c.resist_mu, c.resist_lambda, jobs[k].T);
    auto algorithm = make_callback(jobs[k].callback, c.resist_mu, c.resist_lambda);
    results[k] = resist(*algorithm, params, derive_seed(run_seed(c.seed, jobs[k].label), "resist"));
  });
  int failures = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& r = results[k];
    std::string csv = "t,ratio,envelope\n";
    bool ok = std::abs(r.inner_wT_vT) <= 1e-10 && r.bracket.within_bound();
    for (const auto& row : r.rows) {
      csv += std::to_string(row.t) + ',' + format_number(row.ratio) + ',' + format_number(row.envelope) + '\n';
      ok = ok && row.ratio >= row.envelope;
    }
    csv += "# inner_wT_vT=" + format_number(r.inner_wT_vT) + '\n';
    write_file(ctx.out / ("resist_" + jobs[k].callback + "_T" + std::to_string(jobs[k].T) + "_seed" +
                          std::to_string(jobs[k].label) + ".csv"),
               csv);
    if (!ok) {
      ++failures;
      ctx.log << "FAIL resist " << jobs[k].callback << " T=" << jobs[k].T << " seed " << jobs[k].label << '\n';
    }
  }
  ctx.log << "resist: " << jobs.size() - static_cast<std::size_t>(failures) << '/' << jobs.size() << " runs held\n";
  return failures ? 1 : 0;
}

int cmd_block(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<AdversarialResult> results(static_cast<std::size_t>(c.block_T));
  parallel_for(results.size(), c.jobs, [&](std::size_t k) {
    results[k] = adversarial_average(c.block_n, c.block_d, static_cast<int>(k) + 1);
  });
  std::string csv = "T,worst_average,bound,schedules\n";
  int violations = 0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    csv += std::to_string(k + 1) + ',' + format_number(r.worst_average) + ',' + format_number(r.bound) + ',' +
           std::to_string(r.schedules) + '\n';
    if (!r.holds()) ++violations;
  }
  write_file(ctx.out / "block_audit.csv", csv);
  ctx.log << "block-audit: " << violations << " violations\n";
  return violations ? 1 : 0;
}

int cmd_export(const Context& ctx) {
  write_file(ctx.out / "config.ini", serialize_config(ctx.config));
  ctx.log << "wrote " << (ctx.out / "config.ini").string() << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Oracle complexity lower-bound experiments", "oclb"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--seed", seed, "root seed (overrides run.seed)");
  app.add_option("--out", out, "output directory (overrides run.out)");
  app.add_option("--jobs", jobs, "worker threads (falls back to OCLB_JOBS, then run.jobs)")->check(CLI::PositiveNumber);

  using Command = int (*)(const Context&);
  const std::vector<std::pair<std::string, Command>> commands = {
      {"verify-instance", cmd_verify}, {"simulate-span", cmd_span}, {"race", cmd_race},
      {"resist", cmd_resist},          {"block-audit", cmd_block},  {"export", cmd_export},
  };
  const std::map<std::string, std::string> descriptions = {
      {"verify-instance", "check decomposition, optimum and spectrum of the configured instance"},
      {"simulate-span", "Monte Carlo estimate of span progress against its bound"},
      {"race", "run optimizers and compare their traces with the envelope"},
      {"resist", "resisting-oracle protocol against deterministic callbacks"},
      {"block-audit", "exhaustive schedule search on the block construction"},
      {"export", "write the fully resolved config"},
  };
  for (const auto& [name, fn] : commands) app.add_subcommand(name, descriptions.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) config.seed = *seed;
    if (out) config.out = *out;
    if (jobs) {
      config.jobs = *jobs;
    } else if (const char* env = std::getenv("OCLB_JOBS"); env && *env) {
      try {
        config.jobs = parse_number<int>(env);
      } catch (const UsageError&) {
        throw UsageError("OCLB_JOBS must be a positive integer");
      }
    }
    config.validate();

    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) {
        Context ctx{config, config.out, std::cout};
        prepare_out(ctx, name);
        return fn(ctx);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace oclb
