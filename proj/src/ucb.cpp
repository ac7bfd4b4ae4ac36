#include "mculcb/ucb.hpp"

#include <cmath>
#include <string>

#include "mculcb/error.hpp"

namespace mculcb {

double ucb_index(double weight, std::int64_t count, double sigma_hat, double A, std::int64_t n,
                 IndexVariant variant) {
  if (count < 1) throw DomainError("ucb_index: count must be >= 1");
  const double t = static_cast<double>(count);
  const double n13 = std::cbrt(static_cast<double>(n));
  double radius = 0.0;
  switch (variant) {
    case IndexVariant::theorem:
      radius = std::sqrt(A) / (std::cbrt(weight) * n13);
      break;
    case IndexVariant::footnote:
      radius = A / std::sqrt(t);
      break;
    case IndexVariant::exploitation:
      radius = std::sqrt(A / n13);
      break;
  }
  return weight / t * (sigma_hat + radius);
}

std::vector<Stratum> uniform_strata(int K) {
  if (K < 1) throw ConfigError("uniform_strata: K must be >= 1");
  std::vector<Stratum> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    out.push_back({static_cast<double>(k) / K, static_cast<double>(k + 1) / K});
  }
  return out;
}

std::vector<Stratum> strata_of(const Cut& cut) {
  if (!cut.tiles()) throw ConfigError("strata_of: cut does not tile [0, 1]");
  std::vector<Stratum> out;
  for (const NodeId& leaf : cut.leaves) out.push_back({leaf.lo(), leaf.hi()});
  return out;
}

double theory_A(double f_max, double b, std::int64_t n, double delta) {
  if (!(f_max > 0.0) || !(b >= 0.0)) throw ConfigError("theory_A: invalid f_max or b");
  if (!(delta > 0.0)) throw ConfigError("theory_A: delta must be positive");
  const double nn = static_cast<double>(n);
  const double cube = std::pow(3.0 * f_max, 3.0);
  return 2.0 * std::sqrt(2.0 * (1.0 + 3.0 * b + 4.0 * f_max) * std::log(4.0 * nn * nn * cube / delta));
}

McUcbParams McUcbParams::theory(double f_max, double b, double delta, std::int64_t n) {
  McUcbParams p;
  p.A = theory_A(f_max, b, n, delta);
  return p;
}

McUcbParams McUcbParams::experiment(std::int64_t n) {
  McUcbParams p;
  p.A = 2.0 * std::log(static_cast<double>(n));
  p.n_exponent = 1.0 / 3.0;
  return p;
}

double crude_mc(const NoisyIntegrand& f, std::int64_t n, Rng& rng) {
  if (n < 1) throw BudgetError("crude_mc: n must be >= 1");
  double sum = 0.0;
  for (std::int64_t t = 0; t < n; ++t) sum += f.sample(uniform_open(rng), rng);
  return sum / static_cast<double>(n);
}

namespace {

struct Running {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }
  double sd() const { return count > 0 ? std::sqrt(std::max(m2, 0.0) / static_cast<double>(count)) : 0.0; }
};

double draw_in(const Stratum& s, Rng& rng) {
  double x = s.lo + s.weight() * uniform_open(rng);
  if (x >= s.hi) x = std::nextafter(s.hi, s.lo);
  return x;
}

}  // namespace

McUcbResult mc_ucb(const NoisyIntegrand& f, std::span<const Stratum> strata, std::int64_t n,
                   const McUcbParams& params, Rng& rng) {
  const auto K = static_cast<std::int64_t>(strata.size());
  if (K == 0) throw ConfigError("mc_ucb: empty partition");
  if (n < 4 * K) throw BudgetError("mc_ucb: budget below 4K");
  const Thresholds init{params.A, params.n_exponent, n};

  std::vector<std::int64_t> init_counts;
  std::int64_t init_total = 0;
  for (const Stratum& s : strata) {
    const std::int64_t t = std::max<std::int64_t>(init.for_weight(s.weight()), 2);
    init_counts.push_back(t);
    init_total += t;
  }
  if (init_total > n) {
    throw BudgetError("mc_ucb: initialisation needs " + std::to_string(init_total) +
                      " samples, budget is " + std::to_string(n));
  }

  std::vector<Running> stats(strata.size());
  for (std::size_t k = 0; k < strata.size(); ++k) {
    for (std::int64_t t = 0; t < init_counts[k]; ++t) {
      stats[k].add(f.sample(draw_in(strata[k], rng), rng));
    }
  }

  std::vector<double> indices(strata.size());
  std::vector<std::int64_t> counts(strata.size());
  for (std::int64_t t = init_total; t < n; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < strata.size(); ++k) {
      indices[k] = ucb_index(strata[k].weight(), stats[k].count, stats[k].sd(), params.A, n,
                             params.variant);
      counts[k] = stats[k].count;
      if (indices[k] > indices[best]) best = k;
    }
    if (params.observer) params.observer(indices, counts);
    stats[best].add(f.sample(draw_in(strata[best], rng), rng));
  }

  McUcbResult result;
  for (std::size_t k = 0; k < strata.size(); ++k) {
    result.estimate += strata[k].weight() * stats[k].mean;
    result.counts.push_back(stats[k].count);
    result.means.push_back(stats[k].mean);
    result.sds.push_back(stats[k].sd());
  }
  return result;
}

McUcbResult mc_ucb(const NoisyIntegrand& f, const Cut& cut, std::int64_t n,
                   const McUcbParams& params, Rng& rng) {
  const std::vector<Stratum> strata = strata_of(cut);
  return mc_ucb(f, strata, n, params, rng);
}

}  // namespace mculcb
