#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mculcb/integrand.hpp"
#include "mculcb/partition.hpp"

namespace mculcb {

struct StratumTerm {
  double weight = 0.0;
  double sigma = 0.0;
  std::int64_t count = 0;
};

/// Sum of w^2 sigma^2 / T. Throws DomainError on a zero count.
double pseudo_risk(std::span<const StratumTerm> strata);
double pseudo_risk(const Cut& cut, const std::map<NodeId, double>& sigmas,
                   const std::map<NodeId, std::int64_t>& counts);

struct OracleAllocation {
  double risk = 0.0;
  std::vector<double> lambdas;
};

/// (sum w sigma)^2 / n and lambda = w sigma / sum w sigma. A flat
/// partition gets risk 0 and uniform lambdas.
OracleAllocation oracle_risk(std::span<const double> weights, std::span<const double> sigmas,
                             std::int64_t n);
OracleAllocation oracle_risk(const Cut& cut, const std::map<NodeId, double>& sigmas,
                             std::int64_t n);

/// Sigma^2 / n + C Sigma sum w^{2/3} / n^{4/3}.
double theorem1_bound(std::span<const double> weights, double sigma_sum, std::int64_t n, double C);
double theorem1_bound(const Cut& cut, double sigma_sum, std::int64_t n, double C);

/// 2 sqrt((1 + 3b + 4V) log(2/delta) / t): deviation width of a standard
/// deviation estimate from t samples of variance V.
double confidence_width(std::int64_t t, double V, double b, double delta);

struct MseEstimate {
  double mse = 0.0;
  double stderr_mse = 0.0;
  std::size_t reps = 0;
};

/// MSE of `run(seed)` against `reference` over the seeds plus its standard
/// error. Repetitions run on `jobs` threads; the reduction is ordered by
/// seed so the result does not depend on the seed order or thread count.
MseEstimate mse_harness(const std::function<double(std::uint64_t)>& run, double reference,
                        std::span<const std::uint64_t> seeds, int jobs = 1);

enum class SigmaSource { true_sigma, estimated_sigma };

struct RiskReport {
  double pseudo_risk = 0.0;
  double oracle_risk = 0.0;
  std::optional<double> mse;
  std::vector<std::pair<NodeId, std::int64_t>> allocation;
  SigmaSource sigma_used = SigmaSource::true_sigma;
};

/// Risk of an allocation on a cut using the integrand's exact moments.
/// Returns nullopt if some stratum has no exact moments.
std::optional<RiskReport> true_sigma_report(const NoisyIntegrand& f,
                                            std::span<const std::pair<NodeId, std::uint64_t>> allocation);

/// Brute-force per-stratum moments on the dyadic strata down to `depth`:
/// leaves are sampled directly, ancestors are pooled exactly from them.
class MomentTable {
 public:
  MomentTable() = default;
  MomentTable(int depth, std::vector<double> means, std::vector<double> variances,
              std::int64_t samples_per_leaf);

  static MomentTable build(const NoisyIntegrand& f, int depth, std::int64_t samples_per_leaf,
                           std::uint64_t seed, int jobs = 1);

  int depth() const { return depth_; }
  std::int64_t samples_per_leaf() const { return samples_per_leaf_; }
  /// Moments of [lo, hi) when both ends lie on the depth grid.
  std::optional<Moments> on_interval(double lo, double hi) const;

  void save(std::ostream& os) const;
  static MomentTable load(std::istream& is);

 private:
  int depth_ = 0;
  std::int64_t samples_per_leaf_ = 0;
  std::vector<double> means_;
  std::vector<double> variances_;
};

/// Runs body(i) for i in [0, count) on `jobs` threads.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace mculcb
