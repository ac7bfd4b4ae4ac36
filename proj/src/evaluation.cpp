#include "mculcb/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

#include "mculcb/error.hpp"
#include "mculcb/rng.hpp"

namespace mculcb {

double pseudo_risk(std::span<const StratumTerm> strata) {
  double risk = 0.0;
  for (const StratumTerm& s : strata) {
    if (s.count <= 0) throw DomainError("pseudo-risk: stratum with no samples");
    risk += s.weight * s.weight * s.sigma * s.sigma / static_cast<double>(s.count);
  }
  return risk;
}

double pseudo_risk(const Cut& cut, const std::map<NodeId, double>& sigmas,
                   const std::map<NodeId, std::int64_t>& counts) {
  std::vector<StratumTerm> terms;
  for (const NodeId& node : cut.leaves) {
    const auto s = sigmas.find(node);
    const auto c = counts.find(node);
    if (s == sigmas.end() || c == counts.end()) {
      throw DomainError("pseudo-risk: missing sigma or count for a cut member");
    }
    terms.push_back({node.weight(), s->second, c->second});
  }
  return pseudo_risk(terms);
}

OracleAllocation oracle_risk(std::span<const double> weights, std::span<const double> sigmas,
                             std::int64_t n) {
  if (weights.size() != sigmas.size() || weights.empty()) {
    throw DomainError("oracle risk: weights and sigmas must be non-empty and of equal size");
  }
  if (n <= 0) throw DomainError("oracle risk: budget must be positive");
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) sum += weights[k] * sigmas[k];
  OracleAllocation out;
  out.risk = sum * sum / static_cast<double>(n);
  out.lambdas.resize(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out.lambdas[k] = sum > 0.0 ? weights[k] * sigmas[k] / sum
                               : 1.0 / static_cast<double>(weights.size());
  }
  return out;
}

OracleAllocation oracle_risk(const Cut& cut, const std::map<NodeId, double>& sigmas,
                             std::int64_t n) {
  std::vector<double> w, s;
  for (const NodeId& node : cut.leaves) {
    const auto it = sigmas.find(node);
    if (it == sigmas.end()) throw DomainError("oracle risk: missing sigma for a cut member");
    w.push_back(node.weight());
    s.push_back(it->second);
  }
  return oracle_risk(w, s, n);
}

double theorem1_bound(std::span<const double> weights, double sigma_sum, std::int64_t n,
                      double C) {
  if (n <= 0) throw DomainError("bound: budget must be positive");
  double w23 = 0.0;
  for (const double w : weights) {
    const double c = std::cbrt(w);
    w23 += c * c;
  }
  const double nd = static_cast<double>(n);
  return sigma_sum * sigma_sum / nd + C * sigma_sum * w23 / (nd * std::cbrt(nd));
}

double theorem1_bound(const Cut& cut, double sigma_sum, std::int64_t n, double C) {
  std::vector<double> w;
  for (const NodeId& node : cut.leaves) w.push_back(node.weight());
  return theorem1_bound(w, sigma_sum, n, C);
}

double confidence_width(std::int64_t t, double V, double b, double delta) {
  if (t <= 0) throw DomainError("confidence width: t must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("confidence width: delta must lie in (0, 1)");
  if (V < 0.0 || b < 0.0) throw DomainError("confidence width: V and b must be non-negative");
  return 2.0 * std::sqrt((1.0 + 3.0 * b + 4.0 * V) * std::log(2.0 / delta) /
                         static_cast<double>(t));
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

MseEstimate mse_harness(const std::function<double(std::uint64_t)>& run, double reference,
                        std::span<const std::uint64_t> seeds, int jobs) {
  if (seeds.empty()) throw ConfigError("MSE harness: no repetitions");
  std::vector<std::pair<std::uint64_t, double>> errors(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    const double e = run(seeds[i]) - reference;
    errors[i] = {seeds[i], e * e};
  });
  std::sort(errors.begin(), errors.end());

  MseEstimate out;
  out.reps = errors.size();
  double sum = 0.0;
  for (const auto& [seed, sq] : errors) sum += sq;
  out.mse = sum / static_cast<double>(out.reps);
  if (out.reps > 1) {
    double ss = 0.0;
    for (const auto& [seed, sq] : errors) ss += (sq - out.mse) * (sq - out.mse);
    out.stderr_mse = std::sqrt(ss / static_cast<double>(out.reps - 1) /
                               static_cast<double>(out.reps));
  }
  return out;
}

std::optional<RiskReport> true_sigma_report(
    const NoisyIntegrand& f, std::span<const std::pair<NodeId, std::uint64_t>> allocation) {
  std::vector<StratumTerm> terms;
  std::vector<double> weights, sigmas;
  std::int64_t n = 0;
  RiskReport report;
  for (const auto& [node, count] : allocation) {
    const auto m = f.moments(node.lo(), node.hi());
    if (!m) return std::nullopt;
    terms.push_back({node.weight(), m->sd, static_cast<std::int64_t>(count)});
    weights.push_back(node.weight());
    sigmas.push_back(m->sd);
    n += static_cast<std::int64_t>(count);
    report.allocation.emplace_back(node, static_cast<std::int64_t>(count));
  }
  report.pseudo_risk = pseudo_risk(terms);
  report.oracle_risk = oracle_risk(weights, sigmas, n).risk;
  report.sigma_used = SigmaSource::true_sigma;
  return report;
}

MomentTable::MomentTable(int depth, std::vector<double> means, std::vector<double> variances,
                         std::int64_t samples_per_leaf)
    : depth_(depth),
      samples_per_leaf_(samples_per_leaf),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  if (depth < 0 || depth > 24) throw ConfigError("moment table: depth must lie in [0, 24]");
  const std::size_t leaves = std::size_t{1} << depth;
  if (means_.size() != leaves || variances_.size() != leaves) {
    throw ConfigError("moment table: expected " + std::to_string(leaves) + " leaves");
  }
}

MomentTable MomentTable::build(const NoisyIntegrand& f, int depth, std::int64_t samples_per_leaf,
                               std::uint64_t seed, int jobs) {
  if (depth < 0 || depth > 24) throw ConfigError("moment table: depth must lie in [0, 24]");
  if (samples_per_leaf < 2) throw ConfigError("moment table: need at least 2 samples per leaf");
  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> means(leaves), variances(leaves);
  parallel_for(leaves, jobs, [&](std::size_t i) {
    Rng rng(splitmix64(seed ^ splitmix64(i)));
    const NodeId node{depth, i};
    const double lo = node.lo();
    const double w = node.weight();
    double mean = 0.0, m2 = 0.0;
    for (std::int64_t k = 0; k < samples_per_leaf; ++k) {
      double x = lo + w * uniform_open(rng);
      if (x >= node.hi()) x = std::nextafter(node.hi(), lo);
      const double v = f.sample(x, rng);
      const double d = v - mean;
      mean += d / static_cast<double>(k + 1);
      m2 += d * (v - mean);
    }
    means[i] = mean;
    variances[i] = m2 / static_cast<double>(samples_per_leaf);
  });
  return MomentTable(depth, std::move(means), std::move(variances), samples_per_leaf);
}

std::optional<Moments> MomentTable::on_interval(double lo, double hi) const {
  if (means_.empty()) return std::nullopt;
  const double scale = std::ldexp(1.0, depth_);
  const double a = lo * scale, b = hi * scale;
  if (a != std::floor(a) || b != std::floor(b) || a < 0.0 || b > scale || b <= a) {
    return std::nullopt;
  }
  const auto first = static_cast<std::size_t>(a);
  const auto last = static_cast<std::size_t>(b);
  const double k = static_cast<double>(last - first);
  double mean = 0.0;
  for (std::size_t i = first; i < last; ++i) mean += means_[i];
  mean /= k;
  double var = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double d = means_[i] - mean;
    var += variances_[i] + d * d;
  }
  return Moments{mean, std::sqrt(var / k)};
}

void MomentTable::save(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "moment-table " << depth_ << ' ' << samples_per_leaf_ << '\n';
  for (std::size_t i = 0; i < means_.size(); ++i) os << means_[i] << ' ' << variances_[i] << '\n';
  os.precision(old);
}

MomentTable MomentTable::load(std::istream& is) {
  std::string tag;
  int depth = -1;
  std::int64_t samples = 0;
  if (!(is >> tag >> depth >> samples) || tag != "moment-table" || depth < 0 || depth > 24) {
    throw ConfigError("moment table: bad header");
  }
  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> means(leaves), variances(leaves);
  for (std::size_t i = 0; i < leaves; ++i) {
    if (!(is >> means[i] >> variances[i])) throw ConfigError("moment table: truncated");
  }
  return MomentTable(depth, std::move(means), std::move(variances), samples);
}

}  // namespace mculcb
