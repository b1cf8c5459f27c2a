#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oclb/optimizers.hpp"

namespace oclb {

/// Bad flags, unreadable or malformed config: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of every subcommand. Saved configs always carry all fields.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 20240101;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string out = "out";
  int jobs = 1;

  // [instance]
  std::string family = "chain";  ///< chain, signflip or block
  double mu = 100.0;
  double lambda = 1.0;
  int n = 4;
  int d = 50;

  // [race]
  std::vector<std::string> optimizers = {"gd", "agd", "ssn", "svrg", "lissa", "newton"};
  std::int64_t max_calls = 160;
  bool ledger = true;

  // per-optimizer tuning; zero or negative selects the default
  double gd_step = 0.0;
  double agd_step = 0.0;
  int ssn_sample_size = 0;
  double ssn_rho = -1.0;
  double ssn_step = 0.0;
  int svrg_inner_steps = 0;
  double svrg_step = 0.0;
  int lissa_depth = -1;
  double lissa_step = 0.0;

  // [span]
  std::vector<int> span_n = {2, 4, 8};
  int span_d = 40;
  int span_T = 200;
  int span_trials = 10000;
  std::vector<std::string> span_schedules = {"round-robin", "uniform"};

  // [resist]
  double resist_mu = 32.0;
  double resist_lambda = 1.0;
  std::vector<int> resist_T = {4, 8, 16};
  std::vector<std::string> resist_callbacks = {"gd", "nesterov", "newton"};

  // [block]
  int block_n = 2;
  int block_d = 3;
  int block_T = 6;

  /// Throws UsageError.
  void validate() const;
  OptimizerSpec optimizer_spec(const std::string& name) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// INI text. Unknown sections are ignored (so a manifest is a valid config);
/// unknown keys in known sections are errors. Throws UsageError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

/// %.17g.
std::string format_number(double x);

/// Per-run seed for list entry `label`: derive_seed(root, "run", label).
std::uint64_t run_seed(std::uint64_t root, std::uint64_t label);

/// Runs fn(0..count-1) on up to `jobs` threads.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

struct RaceRun {
  std::uint64_t seed = 0;  ///< the config's seed label
  double mu = 1.0;
  double lambda = 1.0;
  int n = 1;
  OptimizerTrace trace;
};

/// `optimizer,seed,t,calls,ratio,envelope`, rows sorted by (optimizer, seed, t).
/// Exempt optimizers carry `exempt` in the envelope column.
void export_results(std::span<const RaceRun> runs, const std::string& path);
std::string race_csv(std::span<const RaceRun> runs);

/// Resolved config followed by a [manifest] section.
std::string manifest_text(const ExperimentConfig& config, std::string_view command);

/// 0 success, 1 invariant violation, 2 usage error.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace oclb
