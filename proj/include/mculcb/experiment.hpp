#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mculcb/evaluation.hpp"
#include "mculcb/integrand.hpp"
#include "mculcb/ucb.hpp"
#include "mculcb/ulcb.hpp"

namespace mculcb {

/// Option price under the default AsianOptionParams, from 10^8 crude
/// samples (`mculcb reference-price`).
inline constexpr double kAsianReferencePrice = 14.305480681;
inline constexpr double kAsianReferenceStderr = 0.0015392;

struct IntegrandSpec {
  std::string kind = "step";  // constant | step | smooth_hetero | asian
  std::vector<double> params;
  AsianOptionParams asian;
};

enum class AlgorithmKind { crude, mc_ucb, mc_ulcb };

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::crude;
  int K = 0;
  std::map<std::string, std::string> variants;

  /// "crude_mc", "mc_ucb_K10", "mc_ulcb", with "[key=value;...]" appended
  /// when the algorithm has its own variants; also the seed-derivation key.
  std::string label() const;
};

struct ReferenceSpec {
  double value = 0.0;
  double stderr_value = 0.0;
};

struct SigmaTableSpec {
  std::string path;
  int depth = 8;
  std::int64_t samples_per_leaf = 100000;
};

struct ExperimentConfig {
  IntegrandSpec integrand;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::int64_t> budgets;
  int reps = 100;
  double delta = 0.1;
  Mode mode = Mode::experiment;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<ReferenceSpec> reference;
  std::optional<SigmaTableSpec> sigma_table;
  std::string out_dir = "results";
  std::string format = "csv";  // csv | json
  bool records = true;
  /// Applied to every algorithm after its own variants.
  std::map<std::string, std::string> variants;
};

/// Throws ConfigError on unknown keys, bad values or inconsistent settings.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Parses "key=value" into `variants`; the key must be a known variant.
void add_variant(std::map<std::string, std::string>& variants, const std::string& assignment);

NoisyIntegrand make_integrand(const IntegrandSpec& spec);
/// The integrand with true per-stratum moments attached when available
/// (analytic for synthetic kinds, the sigma table for the option).
NoisyIntegrand make_integrand(const ExperimentConfig& config, int jobs);

/// Exact mean for synthetic integrands, configured or built-in price otherwise.
ReferenceSpec reference_for(const ExperimentConfig& config, const NoisyIntegrand& f);

UlcbConfig ulcb_config(const ExperimentConfig& config, const AlgorithmSpec& alg,
                       const NoisyIntegrand& f);
McUcbParams ucb_params(const ExperimentConfig& config, const AlgorithmSpec& alg,
                       const NoisyIntegrand& f, std::int64_t n);

struct CellResult {
  std::string algorithm;
  std::int64_t n = 0;
  int reps = 0;
  std::optional<MseEstimate> mse;
  std::optional<double> pseudo_risk;  // mean over repetitions, true sigma
  std::optional<double> oracle_risk;
  std::string error;
};

struct ExperimentResults {
  std::vector<CellResult> cells;
  std::vector<nlohmann::json> records;  // one per MC-ULCB run
  ReferenceSpec reference;
};

/// Runs every (algorithm, budget) cell; a failing cell is recorded and the
/// others proceed. Output is independent of `jobs`.
ExperimentResults run_experiment(const ExperimentConfig& config);

/// Per-run record of one MC-ULCB run.
nlohmann::json run_record(const UlcbRun& run, std::uint64_t seed, std::int64_t n,
                          const ExperimentConfig& config, const AlgorithmSpec& alg);

/// Re-runs the MC-ULCB run described by a record and returns its tree.
UlcbRun replay_record(const nlohmann::json& record);

void write_csv(std::ostream& os, const ExperimentResults& results);
void write_json(std::ostream& os, const ExperimentResults& results);
/// Gnuplot data: one block per algorithm, columns "n mse stderr".
void write_plot_data(std::ostream& os, const ExperimentResults& results);
/// Writes results.{csv,json}, plot.dat, runs.jsonl and errors.csv (if any).
void write_outputs(const ExperimentConfig& config, const ExperimentResults& results);

/// Resolved constants and planned work, without running anything.
void describe_plan(std::ostream& os, const ExperimentConfig& config);

struct TableCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Reported MSEs of the option benchmark, by algorithm label and budget.
const std::map<std::string, std::map<std::int64_t, double>>& reported_table();

/// The option benchmark (crude, MC-UCB K in {5,10,20,40}, MC-ULCB).
ExperimentConfig benchmark_config(int reps, std::vector<std::int64_t> budgets);

/// Cell checks (max(tolerance, 4 stderr) relative) and ordering checks
/// MC-ULCB < best MC-UCB < crude per budget.
std::vector<TableCheck> check_table(const ExperimentResults& results, double tolerance);

/// Formatted table with the reported A-SSAA row appended.
void write_table(std::ostream& os, const ExperimentResults& results);

}  // namespace mculcb
