#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mculcb/error.hpp"
#include "mculcb/evaluation.hpp"
#include "mculcb/experiment.hpp"

namespace {

using namespace mculcb;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<int> jobs;
  std::vector<std::string> variants;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--out", out, "Output directory");
    app->add_option("--format", format, "Results format")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
    app->add_option("--variant", variants, "Algorithm variant key=value (repeatable)");
  }

  void apply(ExperimentConfig& c) const {
    if (seed) c.seed = *seed;
    if (out) c.out_dir = *out;
    if (format) c.format = *format;
    if (jobs) c.jobs = *jobs;
    for (const std::string& v : variants) add_variant(c.variants, v);
  }
};

int cmd_run(const std::string& path, const Overrides& o) {
  ExperimentConfig config = load_config(path);
  o.apply(config);
  const ExperimentResults results = run_experiment(config);
  write_outputs(config, results);
  write_csv(std::cout, results);
  for (const CellResult& c : results.cells) {
    if (!c.error.empty()) std::cerr << "cell " << c.algorithm << " n=" << c.n << ": " << c.error << '\n';
  }
  return 0;
}

int cmd_dry_run(const std::string& path, const Overrides& o) {
  ExperimentConfig config = load_config(path);
  o.apply(config);
  describe_plan(std::cout, config);
  return 0;
}

int cmd_reproduce(double scale, std::vector<std::int64_t> budgets, double tolerance,
                  const Overrides& o) {
  const double reps = std::round(scale * 1e4);
  if (!(scale > 0.0 && scale <= 1.0) || reps < 100) {
    throw ConfigError("scale must lie in (0, 1] with scale * 10^4 >= 100");
  }
  ExperimentConfig config = benchmark_config(static_cast<int>(reps), std::move(budgets));
  o.apply(config);
  const ExperimentResults results = run_experiment(config);
  write_outputs(config, results);
  write_table(std::cout, results);
  bool ok = true;
  for (const TableCheck& check : check_table(results, tolerance)) {
    std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
    ok = ok && check.pass;
  }
  return ok ? 0 : 1;
}

int cmd_dump_tree(const std::string& path, std::size_t line) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run record '" + path + "'");
  nlohmann::json record;
  std::string text;
  for (std::size_t k = 0; std::getline(in, text); ++k) {
    if (k == line) {
      try {
        record = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception&) {
        in.clear();
        in.seekg(0);
        std::stringstream all;
        all << in.rdbuf();
        record = nlohmann::json::parse(all.str());
      }
      break;
    }
  }
  if (record.is_null()) throw ConfigError("run record '" + path + "' has no line " + std::to_string(line));
  const UlcbRun run = replay_record(record);
  if (record.contains("estimate") && record.at("estimate").get<double>() != run.estimate) {
    std::cerr << "warning: replayed estimate differs from the record\n";
  }
  std::cout << "# h\ti\tT\tsigma_hat\tr\topen\n";
  run.tree.dump(std::cout);
  return 0;
}

int cmd_reference_price(std::int64_t samples, std::uint64_t seed, int jobs) {
  if (samples < 2) throw ConfigError("samples must be >= 2");
  const NoisyIntegrand f = asian_option_integrand(AsianOptionParams{});
  constexpr std::size_t chunks = 1000;
  std::vector<double> sums(chunks), squares(chunks);
  std::vector<std::int64_t> counts(chunks);
  parallel_for(chunks, jobs, [&](std::size_t k) {
    Rng rng(derive_seed(seed, "reference", static_cast<std::uint64_t>(samples), k));
    const std::int64_t m = samples / chunks + (static_cast<std::int64_t>(k) < samples % static_cast<std::int64_t>(chunks) ? 1 : 0);
    double s = 0.0, q = 0.0;
    for (std::int64_t t = 0; t < m; ++t) {
      const double v = f.sample(uniform_open(rng), rng);
      s += v;
      q += v * v;
    }
    sums[k] = s;
    squares[k] = q;
    counts[k] = m;
  });
  double s = 0.0, q = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    s += sums[k];
    q += squares[k];
  }
  const double nd = static_cast<double>(samples);
  const double mean = s / nd;
  const double var = (q / nd - mean * mean) * nd / (nd - 1.0);
  std::printf("price %.9f\nstderr %.7f\nvariance %.6f\nsamples %lld\n", mean, std::sqrt(var / nd), var,
              static_cast<long long>(samples));
  return 0;
}

int cmd_sigma_table(int depth, std::int64_t per_leaf, std::uint64_t seed, int jobs,
                    const std::string& out_path) {
  const NoisyIntegrand f = asian_option_integrand(AsianOptionParams{});
  const MomentTable table = MomentTable::build(f, depth, per_leaf, seed, jobs);
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write '" + out_path + "'");
  table.save(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive stratified Monte-Carlo integration (MC-ULCB, MC-UCB, crude MC)"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  overrides.add_to(run);

  auto* dry = app.add_subcommand("dry-run", "Print resolved constants and planned cells");
  dry->add_option("config", config_path, "JSON experiment config")->required();
  overrides.add_to(dry);

  double scale = 0.1;
  double tolerance = 0.25;
  std::vector<std::int64_t> budgets{200, 2000, 20000};
  auto* table = app.add_subcommand("reproduce-table", "Run the Asian-option benchmark and check it");
  table->add_option("--scale", scale, "Fraction of 10^4 repetitions");
  table->add_option("--budgets", budgets, "Budgets to run");
  table->add_option("--tolerance", tolerance, "Relative tolerance per cell");
  overrides.add_to(table);

  std::string record_path;
  std::size_t record_line = 0;
  auto* dump = app.add_subcommand("dump-tree", "Replay a run record and print its tree");
  dump->add_option("record", record_path, "Run record (JSON, or JSON lines)")->required();
  dump->add_option("--line", record_line, "Record index in a JSON-lines file");

  std::int64_t samples = 100000000;
  std::uint64_t seed = 1;
  int jobs = 0;
  auto* ref = app.add_subcommand("reference-price", "Crude MC reference price of the option");
  ref->add_option("--samples", samples, "Number of samples");
  ref->add_option("--seed", seed, "Seed");
  ref->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

  int depth = 8;
  std::int64_t per_leaf = 100000;
  std::string table_out = "sigma_table.txt";
  auto* sigma = app.add_subcommand("sigma-table", "Brute-force per-stratum moments of the option");
  sigma->add_option("--depth", depth, "Leaf depth");
  sigma->add_option("--samples-per-leaf", per_leaf, "Samples per leaf stratum");
  sigma->add_option("--seed", seed, "Seed");
  sigma->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  sigma->add_option("--out", table_out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path, overrides);
    if (*dry) return cmd_dry_run(config_path, overrides);
    if (*table) return cmd_reproduce(scale, budgets, tolerance, overrides);
    if (*dump) return cmd_dump_tree(record_path, record_line);
    if (*ref) return cmd_reference_price(samples, seed, jobs);
    if (*sigma) return cmd_sigma_table(depth, per_leaf, seed, jobs, table_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
