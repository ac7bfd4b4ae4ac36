#include "mculcb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "mculcb/error.hpp"
#include "mculcb/rng.hpp"

namespace mculcb {

using nlohmann::json;

namespace {

const std::set<std::string>& variant_keys() {
  static const std::set<std::string> keys = {
      "index-variant", "r-init-variant", "B-factor",           "bssa-direction", "A",
      "H",             "c",              "threshold-exponent", "split-coeff",    "exploration-cap"};
  return keys;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double to_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || used == 0 || !std::isfinite(v)) {
    throw ConfigError("variant " + key + ": '" + text + "' is not a number");
  }
  return v;
}

IndexVariant parse_index_variant(const std::string& v) {
  if (v == "theorem") return IndexVariant::theorem;
  if (v == "footnote") return IndexVariant::footnote;
  if (v == "exploitation") return IndexVariant::exploitation;
  throw ConfigError("index-variant must be theorem, footnote or exploitation, got '" + v + "'");
}

Mode parse_mode(const std::string& v) {
  if (v == "theory") return Mode::theory;
  if (v == "experiment") return Mode::experiment;
  throw ConfigError("mode must be theory or experiment, got '" + v + "'");
}

std::string to_string(Mode m) { return m == Mode::theory ? "theory" : "experiment"; }

std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::crude: return "crude";
    case AlgorithmKind::mc_ucb: return "mc_ucb";
    case AlgorithmKind::mc_ulcb: return "mc_ulcb";
  }
  return "?";
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::map<std::string, std::string> parse_variants(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": variants must be an object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number()) {
      text = value.is_number_integer() ? std::to_string(value.get<long long>()) : fmt(value.get<double>());
    } else {
      throw ConfigError(where + "." + key + ": variant values must be strings or numbers");
    }
    add_variant(out, key + "=" + text);
  }
  return out;
}

json asian_to_json(const AsianOptionParams& p) {
  return {{"s0_price", p.s0_price}, {"rate", p.rate},         {"vol", p.vol},
          {"maturity", p.maturity}, {"strike", p.strike},     {"bridge_steps", p.bridge_steps},
          {"f_max", p.f_max},       {"b", p.b}};
}

IntegrandSpec parse_integrand(const json& j) {
  const std::string where = "integrand";
  if (!j.is_object()) throw ConfigError("integrand must be an object");
  reject_unknown(j, {"kind", "params", "asian"}, where);
  IntegrandSpec spec;
  spec.kind = get<std::string>(j, "kind", where);
  if (j.contains("params")) spec.params = get<std::vector<double>>(j, "params", where);
  if (j.contains("asian")) {
    const json& a = j.at("asian");
    reject_unknown(a, {"s0_price", "rate", "vol", "maturity", "strike", "bridge_steps", "f_max", "b"},
                   "integrand.asian");
    AsianOptionParams& p = spec.asian;
    p.s0_price = a.value("s0_price", p.s0_price);
    p.rate = a.value("rate", p.rate);
    p.vol = a.value("vol", p.vol);
    p.maturity = a.value("maturity", p.maturity);
    p.strike = a.value("strike", p.strike);
    p.bridge_steps = a.value("bridge_steps", p.bridge_steps);
    p.f_max = a.value("f_max", p.f_max);
    p.b = a.value("b", p.b);
  }
  if (spec.kind != "asian" && !parse_synthetic_kind(spec.kind)) {
    throw ConfigError("integrand.kind: unknown kind '" + spec.kind + "'");
  }
  if (spec.kind == "asian") {
    if (!spec.params.empty()) throw ConfigError("integrand.params: not used by the option integrand");
    spec.asian.validate();
  }
  return spec;
}

json integrand_to_json(const IntegrandSpec& spec) {
  json j = {{"kind", spec.kind}};
  if (spec.kind == "asian") {
    j["asian"] = asian_to_json(spec.asian);
  } else {
    j["params"] = spec.params;
  }
  return j;
}

AlgorithmSpec parse_algorithm(const json& j, std::size_t index) {
  const std::string where = "algorithms[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where + ": must be an object");
  reject_unknown(j, {"name", "K", "variants"}, where);
  AlgorithmSpec alg;
  const std::string name = get<std::string>(j, "name", where);
  if (name == "crude") {
    alg.kind = AlgorithmKind::crude;
  } else if (name == "mc_ucb") {
    alg.kind = AlgorithmKind::mc_ucb;
    alg.K = get<int>(j, "K", where);
    if (alg.K < 1) throw ConfigError(where + ".K must be >= 1");
  } else if (name == "mc_ulcb") {
    alg.kind = AlgorithmKind::mc_ulcb;
  } else {
    throw ConfigError(where + ".name: unknown algorithm '" + name + "'");
  }
  if (alg.kind != AlgorithmKind::mc_ucb && j.contains("K")) {
    throw ConfigError(where + ": K only applies to mc_ucb");
  }
  if (j.contains("variants")) alg.variants = parse_variants(j.at("variants"), where + ".variants");
  return alg;
}

json algorithm_to_json(const AlgorithmSpec& alg) {
  json j = {{"name", to_string(alg.kind)}};
  if (alg.kind == AlgorithmKind::mc_ucb) j["K"] = alg.K;
  if (!alg.variants.empty()) j["variants"] = alg.variants;
  return j;
}

std::map<std::string, std::string> merged_variants(const ExperimentConfig& config,
                                                   const AlgorithmSpec& alg) {
  std::map<std::string, std::string> v = alg.variants;
  for (const auto& [key, value] : config.variants) v[key] = value;
  return v;
}

}  // namespace

std::string AlgorithmSpec::label() const {
  std::string base;
  switch (kind) {
    case AlgorithmKind::crude: base = "crude_mc"; break;
    case AlgorithmKind::mc_ucb: base = "mc_ucb_K" + std::to_string(K); break;
    case AlgorithmKind::mc_ulcb: base = "mc_ulcb"; break;
  }
  if (variants.empty()) return base;
  base += '[';
  for (auto it = variants.begin(); it != variants.end(); ++it) {
    if (it != variants.begin()) base += ';';
    base += it->first + '=' + it->second;
  }
  return base + ']';
}

void add_variant(std::map<std::string, std::string>& variants, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == assignment.size()) {
    throw ConfigError("variant must look like key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  if (!variant_keys().contains(key)) throw ConfigError("unknown variant '" + key + "'");
  if (key == "index-variant") {
    parse_index_variant(value);
  } else if (key == "r-init-variant") {
    if (value != "plus" && value != "minus") throw ConfigError("r-init-variant must be plus or minus");
  } else if (key == "bssa-direction") {
    if (value != "larger" && value != "smaller") {
      throw ConfigError("bssa-direction must be larger or smaller");
    }
  } else {
    to_number(key, value);
  }
  variants[key] = value;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"integrand", "algorithms", "budgets", "reps", "delta", "mode", "seed", "jobs",
                  "reference", "sigma_table", "output", "variants"},
                 "config");
  ExperimentConfig c;
  if (!j.contains("integrand")) throw ConfigError("config: missing 'integrand'");
  c.integrand = parse_integrand(j.at("integrand"));

  if (!j.contains("algorithms") || !j.at("algorithms").is_array() || j.at("algorithms").empty()) {
    throw ConfigError("config: 'algorithms' must be a non-empty array");
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < j.at("algorithms").size(); ++i) {
    AlgorithmSpec alg = parse_algorithm(j.at("algorithms")[i], i);
    if (!labels.insert(alg.label()).second) {
      throw ConfigError("config: duplicate algorithm '" + alg.label() + "'");
    }
    c.algorithms.push_back(std::move(alg));
  }

  c.budgets = get<std::vector<std::int64_t>>(j, "budgets", "config");
  if (c.budgets.empty()) throw ConfigError("config: 'budgets' must be non-empty");
  for (const std::int64_t n : c.budgets) {
    if (n < 1) throw ConfigError("config: budgets must be >= 1");
  }
  c.reps = j.contains("reps") ? get<int>(j, "reps", "config") : c.reps;
  if (c.reps < 1) throw ConfigError("config: reps must be >= 1");
  c.delta = j.contains("delta") ? get<double>(j, "delta", "config") : c.delta;
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("config: delta must lie in (0, 1)");
  if (j.contains("mode")) c.mode = parse_mode(get<std::string>(j, "mode", "config"));
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("jobs")) c.jobs = get<int>(j, "jobs", "config");

  if (j.contains("reference")) {
    const json& r = j.at("reference");
    reject_unknown(r, {"value", "stderr"}, "reference");
    c.reference = ReferenceSpec{get<double>(r, "value", "reference"),
                                r.contains("stderr") ? get<double>(r, "stderr", "reference") : 0.0};
  }
  if (j.contains("sigma_table")) {
    const json& s = j.at("sigma_table");
    reject_unknown(s, {"path", "depth", "samples_per_leaf"}, "sigma_table");
    SigmaTableSpec t;
    t.path = get<std::string>(s, "path", "sigma_table");
    t.depth = s.value("depth", t.depth);
    t.samples_per_leaf = s.value("samples_per_leaf", t.samples_per_leaf);
    if (t.depth < 0 || t.depth > 20) throw ConfigError("sigma_table.depth must lie in [0, 20]");
    if (t.samples_per_leaf < 2) throw ConfigError("sigma_table.samples_per_leaf must be >= 2");
    c.sigma_table = t;
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    reject_unknown(o, {"dir", "format", "records"}, "output");
    c.out_dir = o.value("dir", c.out_dir);
    c.format = o.value("format", c.format);
    c.records = o.value("records", c.records);
  }
  if (c.format != "csv" && c.format != "json") throw ConfigError("output.format must be csv or json");
  if (j.contains("variants")) c.variants = parse_variants(j.at("variants"), "variants");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json algs = json::array();
  for (const AlgorithmSpec& a : c.algorithms) algs.push_back(algorithm_to_json(a));
  json j = {{"integrand", integrand_to_json(c.integrand)},
            {"algorithms", algs},
            {"budgets", c.budgets},
            {"reps", c.reps},
            {"delta", c.delta},
            {"mode", to_string(c.mode)},
            {"seed", c.seed},
            {"jobs", c.jobs},
            {"output", {{"dir", c.out_dir}, {"format", c.format}, {"records", c.records}}}};
  if (c.reference) j["reference"] = {{"value", c.reference->value}, {"stderr", c.reference->stderr_value}};
  if (c.sigma_table) {
    j["sigma_table"] = {{"path", c.sigma_table->path},
                        {"depth", c.sigma_table->depth},
                        {"samples_per_leaf", c.sigma_table->samples_per_leaf}};
  }
  if (!c.variants.empty()) j["variants"] = c.variants;
  return j;
}

NoisyIntegrand make_integrand(const IntegrandSpec& spec) {
  if (spec.kind == "asian") return asian_option_integrand(spec.asian);
  const auto kind = parse_synthetic_kind(spec.kind);
  if (!kind) throw ConfigError("unknown integrand kind '" + spec.kind + "'");
  return synthetic_integrand(*kind, spec.params);
}

NoisyIntegrand make_integrand(const ExperimentConfig& config, int jobs) {
  NoisyIntegrand f = make_integrand(config.integrand);
  if (f.has_moments() || !config.sigma_table) return f;
  const SigmaTableSpec& spec = *config.sigma_table;
  MomentTable table;
  std::ifstream in(spec.path);
  if (in) {
    table = MomentTable::load(in);
  } else {
    table = MomentTable::build(f, spec.depth, spec.samples_per_leaf, config.seed, jobs);
    const std::filesystem::path path(spec.path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(spec.path);
    if (!out) throw ConfigError("cannot write sigma table '" + spec.path + "'");
    table.save(out);
  }
  return f.with_moments([table](double lo, double hi) { return table.on_interval(lo, hi); });
}

ReferenceSpec reference_for(const ExperimentConfig& config, const NoisyIntegrand& f) {
  if (config.reference) return *config.reference;
  if (config.integrand.kind != "asian") {
    const auto m = f.moments(0.0, 1.0);
    if (m) return {m->mean, 0.0};
  } else {
    const AsianOptionParams defaults;
    const AsianOptionParams& p = config.integrand.asian;
    if (p.s0_price == defaults.s0_price && p.rate == defaults.rate && p.vol == defaults.vol &&
        p.maturity == defaults.maturity && p.strike == defaults.strike &&
        p.bridge_steps == defaults.bridge_steps) {
      return {kAsianReferencePrice, kAsianReferenceStderr};
    }
  }
  throw ConfigError("no reference value known for this integrand; set 'reference'");
}

UlcbConfig ulcb_config(const ExperimentConfig& config, const AlgorithmSpec& alg,
                       const NoisyIntegrand& f) {
  UlcbConfig u;
  u.mode = config.mode;
  u.f_max = f.f_max();
  u.b = f.b();
  u.delta = config.delta;
  for (const auto& [key, value] : merged_variants(config, alg)) {
    if (key == "index-variant") {
      u.index_variant = parse_index_variant(value);
    } else if (key == "r-init-variant") {
      u.root_r = value == "minus" ? RootRVariant::minus : RootRVariant::plus;
    } else if (key == "bssa-direction") {
      u.bssa_direction = value == "smaller" ? BssaDirection::smaller_ratio : BssaDirection::larger_ratio;
    } else if (key == "B-factor") {
      u.B_factor = to_number(key, value);
    } else if (key == "A") {
      u.A = to_number(key, value);
    } else if (key == "H") {
      const double h = to_number(key, value);
      if (h != std::floor(h)) throw ConfigError("variant H must be an integer");
      u.H = static_cast<int>(h);
    } else if (key == "c") {
      u.c = to_number(key, value);
    } else if (key == "threshold-exponent") {
      u.threshold_exponent = to_number(key, value);
    } else if (key == "split-coeff") {
      u.split_coeff = to_number(key, value);
    } else if (key == "exploration-cap") {
      u.exploration_cap_fraction = to_number(key, value);
    }
  }
  return u;
}

McUcbParams ucb_params(const ExperimentConfig& config, const AlgorithmSpec& alg,
                       const NoisyIntegrand& f, std::int64_t n) {
  McUcbParams p = config.mode == Mode::experiment
                      ? McUcbParams::experiment(n)
                      : McUcbParams::theory(f.f_max(), f.b(), config.delta, n);
  for (const auto& [key, value] : merged_variants(config, alg)) {
    if (key == "index-variant") p.variant = parse_index_variant(value);
    if (key == "A") p.A = to_number(key, value);
    if (key == "threshold-exponent") p.n_exponent = to_number(key, value);
  }
  return p;
}

json run_record(const UlcbRun& run, std::uint64_t seed, std::int64_t n,
                const ExperimentConfig& config, const AlgorithmSpec& alg) {
  auto cut_json = [](const Cut& cut) {
    json a = json::array();
    for (const NodeId& node : cut.leaves) a.push_back({node.depth, node.index});
    return a;
  };
  json allocation = json::array();
  for (const auto& [node, count] : run.allocation) allocation.push_back({node.depth, node.index, count});
  const UlcbConstants& k = run.constants;
  return {{"algorithm", alg.label()},
          {"seed", seed},
          {"n", n},
          {"delta", config.delta},
          {"mode", to_string(config.mode)},
          {"constants",
           {{"A", k.A},
            {"H", k.H},
            {"c", k.c},
            {"sigma_tilde", k.sigma_tilde},
            {"B", k.B},
            {"C_max_prime", k.C_max_prime}}},
          {"T_explore", run.t_explore},
          {"exploration_capped", run.exploration_capped},
          {"selected_cut", cut_json(run.selected)},
          {"explored_cut", cut_json(run.explored)},
          {"estimate", run.estimate},
          {"allocation", allocation},
          {"integrand", integrand_to_json(config.integrand)},
          {"variants", merged_variants(config, alg)}};
}

UlcbRun replay_record(const json& record) {
  ExperimentConfig config;
  try {
    config.integrand = parse_integrand(record.at("integrand"));
    config.delta = record.at("delta").get<double>();
    config.mode = parse_mode(record.at("mode").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run record: ") + e.what());
  }
  AlgorithmSpec alg;
  alg.kind = AlgorithmKind::mc_ulcb;
  if (record.contains("variants")) alg.variants = parse_variants(record.at("variants"), "variants");
  const NoisyIntegrand f = make_integrand(config.integrand);
  const auto seed = get<std::uint64_t>(record, "seed", "record");
  const auto n = get<std::int64_t>(record, "n", "record");
  Rng rng(seed);
  return run_mc_ulcb(f, n, ulcb_config(config, alg, f), rng);
}

namespace {

struct RepOutcome {
  double estimate = 0.0;
  std::optional<double> pseudo_risk;
  std::optional<double> oracle_risk;
  json record;
  std::string error;
};

std::optional<std::pair<double, double>> risks_on_strata(const NoisyIntegrand& f,
                                                         std::span<const Stratum> strata,
                                                         std::span<const std::int64_t> counts) {
  std::vector<StratumTerm> terms;
  std::vector<double> weights, sigmas;
  std::int64_t n = 0;
  for (std::size_t k = 0; k < strata.size(); ++k) {
    const auto m = f.moments(strata[k].lo, strata[k].hi);
    if (!m) return std::nullopt;
    terms.push_back({strata[k].weight(), m->sd, counts[k]});
    weights.push_back(strata[k].weight());
    sigmas.push_back(m->sd);
    n += counts[k];
  }
  return std::pair{pseudo_risk(terms), oracle_risk(weights, sigmas, n).risk};
}

RepOutcome run_one(const ExperimentConfig& config, const AlgorithmSpec& alg, const NoisyIntegrand& f,
                   std::int64_t n, std::uint64_t seed) {
  RepOutcome out;
  Rng rng(seed);
  switch (alg.kind) {
    case AlgorithmKind::crude: {
      if (n < 1) throw BudgetError("crude MC: budget must be >= 1");
      out.estimate = crude_mc(f, n, rng);
      const Stratum whole{0.0, 1.0};
      const std::int64_t count = n;
      if (auto r = risks_on_strata(f, std::span(&whole, 1), std::span(&count, 1))) {
        out.pseudo_risk = r->first;
        out.oracle_risk = r->second;
      }
      break;
    }
    case AlgorithmKind::mc_ucb: {
      const std::vector<Stratum> strata = uniform_strata(alg.K);
      const McUcbResult res = mc_ucb(f, strata, n, ucb_params(config, alg, f, n), rng);
      out.estimate = res.estimate;
      if (auto r = risks_on_strata(f, strata, res.counts)) {
        out.pseudo_risk = r->first;
        out.oracle_risk = r->second;
      }
      break;
    }
    case AlgorithmKind::mc_ulcb: {
      const UlcbRun run = run_mc_ulcb(f, n, ulcb_config(config, alg, f), rng);
      out.estimate = run.estimate;
      if (auto report = true_sigma_report(f, run.allocation)) {
        out.pseudo_risk = report->pseudo_risk;
        out.oracle_risk = report->oracle_risk;
      }
      if (config.records) out.record = run_record(run, seed, n, config, alg);
      break;
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<RepOutcome>& reps,
                              std::optional<double> RepOutcome::*field) {
  double sum = 0.0;
  for (const RepOutcome& r : reps) {
    if (!(r.*field)) return std::nullopt;
    sum += *(r.*field);
  }
  return sum / static_cast<double>(reps.size());
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& config) {
  const NoisyIntegrand f = make_integrand(config, config.jobs);
  ExperimentResults results;
  results.reference = reference_for(config, f);

  for (const AlgorithmSpec& alg : config.algorithms) {
    for (const std::int64_t n : config.budgets) {
      CellResult cell;
      cell.algorithm = alg.label();
      cell.n = n;
      cell.reps = config.reps;

      std::vector<std::uint64_t> seeds(static_cast<std::size_t>(config.reps));
      for (std::size_t r = 0; r < seeds.size(); ++r) seeds[r] = derive_seed(config.seed, cell.algorithm, static_cast<std::uint64_t>(n), r);
      std::vector<RepOutcome> reps(seeds.size());
      parallel_for(seeds.size(), config.jobs, [&](std::size_t r) {
        try {
          reps[r] = run_one(config, alg, f, n, seeds[r]);
        } catch (const Error& e) {
          reps[r].error = e.what();
        }
      });

      for (const RepOutcome& r : reps) {
        if (!r.error.empty()) {
          cell.error = r.error;
          break;
        }
      }
      if (cell.error.empty()) {
        std::map<std::uint64_t, double> by_seed;
        for (std::size_t r = 0; r < seeds.size(); ++r) by_seed[seeds[r]] = reps[r].estimate;
        cell.mse = mse_harness([&](std::uint64_t s) { return by_seed.at(s); }, results.reference.value,
                               seeds, 1);
        cell.pseudo_risk = mean_of(reps, &RepOutcome::pseudo_risk);
        cell.oracle_risk = mean_of(reps, &RepOutcome::oracle_risk);
        if (alg.kind == AlgorithmKind::mc_ulcb && config.records) {
          for (RepOutcome& r : reps) results.records.push_back(std::move(r.record));
        }
      }
      results.cells.push_back(std::move(cell));
    }
  }
  return results;
}

void write_csv(std::ostream& os, const ExperimentResults& results) {
  os << "algorithm,n,reps,mse,stderr,pseudo_risk,oracle_risk\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); };
  for (const CellResult& c : results.cells) {
    os << c.algorithm << ',' << c.n << ',' << c.reps << ',';
    if (c.mse) {
      os << fmt(c.mse->mse) << ',' << fmt(c.mse->stderr_mse);
    } else {
      os << "NA,NA";
    }
    os << ',' << opt(c.pseudo_risk) << ',' << opt(c.oracle_risk) << '\n';
  }
}

void write_json(std::ostream& os, const ExperimentResults& results) {
  json cells = json::array();
  for (const CellResult& c : results.cells) {
    json j = {{"algorithm", c.algorithm}, {"n", c.n}, {"reps", c.reps}};
    j["mse"] = c.mse ? json(c.mse->mse) : json(nullptr);
    j["stderr"] = c.mse ? json(c.mse->stderr_mse) : json(nullptr);
    j["pseudo_risk"] = c.pseudo_risk ? json(*c.pseudo_risk) : json(nullptr);
    j["oracle_risk"] = c.oracle_risk ? json(*c.oracle_risk) : json(nullptr);
    if (!c.error.empty()) j["error"] = c.error;
    cells.push_back(j);
  }
  os << json{{"reference", {{"value", results.reference.value}, {"stderr", results.reference.stderr_value}}},
             {"cells", cells}}
            .dump(2)
     << '\n';
}

void write_plot_data(std::ostream& os, const ExperimentResults& results) {
  std::vector<std::string> order;
  for (const CellResult& c : results.cells) {
    if (std::find(order.begin(), order.end(), c.algorithm) == order.end()) order.push_back(c.algorithm);
  }
  bool first = true;
  for (const std::string& alg : order) {
    if (!first) os << "\n\n";
    first = false;
    os << "# " << alg << "\n# n mse stderr\n";
    for (const CellResult& c : results.cells) {
      if (c.algorithm != alg || !c.mse) continue;
      os << c.n << ' ' << fmt(c.mse->mse) << ' ' << fmt(c.mse->stderr_mse) << '\n';
    }
  }
}

void write_outputs(const ExperimentConfig& config, const ExperimentResults& results) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    return out;
  };
  if (config.format == "json") {
    auto out = open("results.json");
    write_json(out, results);
  } else {
    auto out = open("results.csv");
    write_csv(out, results);
  }
  {
    auto out = open("plot.dat");
    write_plot_data(out, results);
  }
  if (config.records && !results.records.empty()) {
    auto out = open("runs.jsonl");
    for (const json& r : results.records) out << r.dump() << '\n';
  }
  std::filesystem::remove(dir / "errors.csv");
  bool any_error = false;
  for (const CellResult& c : results.cells) any_error = any_error || !c.error.empty();
  if (any_error) {
    auto out = open("errors.csv");
    out << "algorithm,n,error\n";
    for (const CellResult& c : results.cells) {
      if (c.error.empty()) continue;
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      out << c.algorithm << ',' << c.n << ",\"" << msg << "\"\n";
    }
  }
}

void describe_plan(std::ostream& os, const ExperimentConfig& config) {
  const NoisyIntegrand f = make_integrand(config.integrand);
  const std::size_t cells = config.algorithms.size() * config.budgets.size();
  os << "integrand: " << f.name() << " (f_max " << fmt(f.f_max()) << ", b " << fmt(f.b()) << ")\n"
     << "mode: " << to_string(config.mode) << ", delta " << fmt(config.delta) << ", base seed "
     << config.seed << '\n'
     << "cells: " << cells << " (" << config.algorithms.size() << " algorithms x "
     << config.budgets.size() << " budgets), " << config.reps << " reps each, "
     << cells * static_cast<std::size_t>(config.reps) << " runs\n";
  for (const AlgorithmSpec& alg : config.algorithms) {
    for (const std::int64_t n : config.budgets) {
      os << alg.label() << " n=" << n << ": ";
      try {
        if (alg.kind == AlgorithmKind::crude) {
          os << "uniform sampling\n";
        } else if (alg.kind == AlgorithmKind::mc_ucb) {
          const McUcbParams p = ucb_params(config, alg, f, n);
          const Thresholds init{p.A, p.n_exponent, n};
          std::int64_t total = 0;
          for (const Stratum& s : uniform_strata(alg.K)) total += std::max<std::int64_t>(init.for_weight(s.weight()), 2);
          os << "A " << fmt(p.A) << ", initialisation " << total << " samples"
             << (n < 4 * alg.K || total > n ? " [budget error]" : "") << '\n';
        } else {
          const UlcbConfig u = ulcb_config(config, alg, f);
          const UlcbConstants k = preliminary_constants(u, n);
          const double sqrt_a = std::sqrt(k.A);
          const double n13 = std::cbrt(static_cast<double>(n));
          const std::int64_t t0 = k.thresholds().at(0);
          os << "A " << fmt(k.A) << ", H " << k.H << ", t_0 " << t0
             << (t0 > n ? " [budget error]" : "") << ", Sigma~ = sigma_root + " << fmt(sqrt_a / n13)
             << ", c = ";
          if (u.c) {
            os << fmt(*u.c);
          } else if (u.mode == Mode::experiment) {
            os << "1";
          } else {
            os << "(8 Sigma~ + 1) * " << fmt(sqrt_a);
          }
          os << ", B = " << fmt(u.B_factor) << " * " << fmt(std::sqrt(2.0 * k.A))
             << " * c * (1 + 1/Sigma~), C'_max = max(B, " << fmt(14.0 * k.H * sqrt_a) << " * c) + "
             << fmt(2.0 * sqrt_a) << '\n';
        }
      } catch (const Error& e) {
        os << "[error] " << e.what() << '\n';
      }
    }
  }
}

const std::map<std::string, std::map<std::int64_t, double>>& reported_table() {
  static const std::map<std::string, std::map<std::int64_t, double>> table = {
      {"crude_mc", {{200, 5.1}, {2000, 0.51}, {20000, 0.051}}},
      {"mc_ucb_K5", {{200, 4.65}, {2000, 0.465}, {20000, 0.0464}}},
      {"mc_ucb_K10", {{200, 4.56}, {2000, 0.455}, {20000, 0.0455}}},
      {"mc_ucb_K20", {{200, 4.63}, {2000, 0.449}, {20000, 0.0441}}},
      {"mc_ucb_K40", {{200, 4.71}, {2000, 0.4655}, {20000, 0.0431}}},
      {"a_ssaa", {{200, 4.32}, {2000, 0.425}, {20000, 0.0413}}},
      {"mc_ulcb", {{200, 4.08}, {2000, 0.395}, {20000, 0.0382}}},
  };
  return table;
}

ExperimentConfig benchmark_config(int reps, std::vector<std::int64_t> budgets) {
  ExperimentConfig c;
  c.integrand.kind = "asian";
  c.algorithms.push_back({AlgorithmKind::crude, 0, {}});
  for (const int K : {5, 10, 20, 40}) c.algorithms.push_back({AlgorithmKind::mc_ucb, K, {}});
  c.algorithms.push_back({AlgorithmKind::mc_ulcb, 0, {}});
  c.budgets = std::move(budgets);
  c.reps = reps;
  c.mode = Mode::experiment;
  c.seed = 2013;
  c.out_dir = "table";
  return c;
}

std::vector<TableCheck> check_table(const ExperimentResults& results, double tolerance) {
  std::vector<TableCheck> checks;
  const auto& reported = reported_table();
  std::map<std::int64_t, std::map<std::string, const CellResult*>> by_budget;
  double smallest = std::numeric_limits<double>::infinity();
  for (const CellResult& c : results.cells) {
    by_budget[c.n][c.algorithm] = &c;
    if (c.mse) smallest = std::min(smallest, c.mse->mse);
    const auto row = reported.find(c.algorithm);
    if (row == reported.end() || !row->second.contains(c.n)) continue;
    const double paper = row->second.at(c.n);
    TableCheck check{c.algorithm + " n=" + std::to_string(c.n), false, ""};
    if (!c.mse) {
      check.detail = "no result: " + c.error;
    } else {
      const double allowed = std::max(tolerance * paper, 4.0 * c.mse->stderr_mse);
      const double diff = std::abs(c.mse->mse - paper);
      check.pass = diff <= allowed;
      check.detail = "mse " + fmt(c.mse->mse) + " +- " + fmt(c.mse->stderr_mse) + " vs reported " +
                     fmt(paper) + " (allowed deviation " + fmt(allowed) + ")";
    }
    checks.push_back(check);
  }
  for (const auto& [n, cells] : by_budget) {
    const auto find = [&](const std::string& label) -> std::optional<double> {
      const auto it = cells.find(label);
      if (it == cells.end() || !it->second->mse) return std::nullopt;
      return it->second->mse->mse;
    };
    std::optional<double> best_ucb;
    std::string best_label;
    for (const auto& [label, cell] : cells) {
      if (label.rfind("mc_ucb_K", 0) != 0 || !cell->mse) continue;
      if (!best_ucb || cell->mse->mse < *best_ucb) {
        best_ucb = cell->mse->mse;
        best_label = label;
      }
    }
    const auto ulcb = find("mc_ulcb");
    const auto crude = find("crude_mc");
    if (!ulcb || !best_ucb || !crude) continue;
    TableCheck check{"ordering n=" + std::to_string(n), *ulcb < *best_ucb && *best_ucb < *crude, ""};
    check.detail = "mc_ulcb " + fmt(*ulcb) + " < " + best_label + " " + fmt(*best_ucb) +
                   " < crude_mc " + fmt(*crude);
    checks.push_back(check);
  }
  if (std::isfinite(smallest)) {
    const double ref_var = results.reference.stderr_value * results.reference.stderr_value;
    checks.push_back({"reference precision", ref_var <= 0.01 * smallest,
                      "reference stderr^2 " + fmt(ref_var) + " vs 1% of smallest mse " +
                          fmt(0.01 * smallest)});
  }
  return checks;
}

void write_table(std::ostream& os, const ExperimentResults& results) {
  std::vector<std::int64_t> budgets;
  std::vector<std::string> order;
  for (const CellResult& c : results.cells) {
    if (std::find(budgets.begin(), budgets.end(), c.n) == budgets.end()) budgets.push_back(c.n);
    if (std::find(order.begin(), order.end(), c.algorithm) == order.end()) order.push_back(c.algorithm);
  }
  auto row = [&](const std::string& label, auto value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-14s", label.c_str());
    os << buf;
    for (const std::int64_t n : budgets) {
      std::snprintf(buf, sizeof buf, " %22s", value(n).c_str());
      os << buf;
    }
    os << '\n';
  };
  row("algorithm", [](std::int64_t n) { return "n=" + std::to_string(n); });
  for (const std::string& alg : order) {
    if (alg == "mc_ulcb") {
      row("a_ssaa", [](std::int64_t n) {
        const auto& r = reported_table().at("a_ssaa");
        return r.contains(n) ? fmt(r.at(n)) + " (reported)" : std::string("-");
      });
    }
    row(alg, [&](std::int64_t n) {
      for (const CellResult& c : results.cells) {
        if (c.algorithm == alg && c.n == n) {
          return c.mse ? fmt(c.mse->mse) + " +- " + fmt(c.mse->stderr_mse) : std::string("error");
        }
      }
      return std::string("-");
    });
  }
}

}  // namespace mculcb
