#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mculcb/integrand.hpp"
#include "mculcb/partition.hpp"
#include "mculcb/rng.hpp"
#include "mculcb/sampling.hpp"
#include "mculcb/ucb.hpp"

namespace mculcb {

/// theory: constants from (f_max, b, delta). experiment: A = 2 ln n,
/// H = floor(0.3 ln n), thresholds scaled by n^{1/3}, c = 1, and splitting
/// whenever the node is not flat.
enum class Mode { theory, experiment };

/// Initial root share: "plus" = sigma + c sqrt(A)/n^{1/3}, "minus" = sigma - ...
enum class RootRVariant { plus, minus };

struct UlcbConfig {
  Mode mode = Mode::theory;
  double f_max = 1.0;
  double b = 0.0;
  double delta = 0.1;

  std::optional<double> A;
  std::optional<int> H;
  std::optional<double> c;
  /// Split when w sigma >= coeff * H c sqrt(A) w^{2/3} / n^{1/3}.
  std::optional<double> split_coeff;
  std::optional<double> threshold_exponent;

  double B_factor = 38.0;
  RootRVariant root_r = RootRVariant::plus;
  IndexVariant index_variant = IndexVariant::theorem;
  BssaDirection bssa_direction = BssaDirection::larger_ratio;
  /// Initialisation plus exploration never exceed floor(fraction * n).
  double exploration_cap_fraction = 0.5;
};

struct UlcbConstants {
  double A = 0.0;
  int H = 0;
  double c = 0.0;
  double sigma_tilde = 0.0;  // Sigma-tilde = sigma_root + sqrt(A) / n^{1/3}
  double B = 0.0;
  double C_max_prime = 0.0;
  double delta = 0.0;
  double f_max = 0.0;
  double b = 0.0;
  std::int64_t n = 0;
  double threshold_exponent = 2.0 / 3.0;
  double split_coeff = 6.0;

  Thresholds thresholds() const { return {A, threshold_exponent, n}; }
  /// c sqrt(A) w_h^{2/3} / n^{1/3}.
  double radius(int depth) const;
  /// Exploration keeps sampling a leaf while r / T exceeds this.
  double exploration_level() const { return 4.0 * sigma_tilde / static_cast<double>(n); }
  /// Coefficient of sum w^{2/3} / n^{1/3} in the selection objective.
  double selection_penalty() const;
};

int theory_H(double f_max, std::int64_t n);

/// Resolves every constant once sigma-hat of the root is known.
UlcbConstants compute_constants(const UlcbConfig& config, std::int64_t n, double sigma_hat_root);

/// Threshold part only (A, H, exponent): usable before sampling.
UlcbConstants preliminary_constants(const UlcbConfig& config, std::int64_t n);

/// Children shares from the parent's share, at radius
/// `radius` = c sqrt(A) w_{h+1}^{2/3} / n^{1/3}. Clamped at 0; throws
/// InvariantError if they add up to more than the parent's share.
std::pair<double, double> split_r(int parent_depth, std::pair<double, double> child_sigmas,
                                  double parent_sigma_tilde, double parent_r, double radius);

std::pair<double, double> compute_r(const NodeId& parent, std::pair<double, double> child_sigmas,
                                    double parent_sigma_tilde, double parent_r,
                                    const UlcbConstants& k);

struct SplitRecord {
  NodeId parent;
  double r_parent = 0.0;
  double r_left = 0.0;
  double r_right = 0.0;
  double sigma_left = 0.0;
  double sigma_right = 0.0;
  double sigma_tilde = 0.0;
};

struct ExplorationResult {
  std::int64_t drawn = 0;  // total samples in the tree when exploration ends
  bool capped = false;
  std::vector<SplitRecord> splits;
};

/// Initialises sigma-hat and r at the root of a tree holding t_0 samples.
void initialise_root(PartitionTree& tree, const UlcbConstants& k, const UlcbConfig& config);

/// Samples eligible leaves (r/T above 4 Sigma-tilde / n, lowest (h, i)
/// first) by BSS and opens leaves meeting the split rule, until no leaf is
/// eligible or the budget cap is hit.
ExplorationResult exploration_phase(const NoisyIntegrand& f, PartitionTree& tree,
                                    const UlcbConstants& k, const UlcbConfig& config, Rng& rng);

/// Cost of a cut under the selection objective, summed in leaf order.
double cut_cost(const PartitionTree& tree, const Cut& cut, const UlcbConstants& k);

/// Bottom-up minimisation of the selection objective over all cuts of the
/// materialised tree; ties keep the shallower node.
Cut select_partition(const PartitionTree& tree, const UlcbConstants& k);

/// Spends `remaining` draws on the cut: largest index first (lowest (h, i)
/// on ties), each drawn by BSS-A.
void exploitation_phase(const NoisyIntegrand& f, PartitionTree& tree, const Cut& cut,
                        const UlcbConstants& k, const UlcbConfig& config,
                        std::int64_t remaining, Rng& rng);

/// Stratified mean over `leaves`, each stratum using all its samples.
double final_estimate(const PartitionTree& tree, const Cut& leaves);

struct UlcbRun {
  double estimate = 0.0;
  UlcbConstants constants;
  std::int64_t t_explore = 0;
  bool exploration_capped = false;
  Cut selected;
  Cut explored;
  std::vector<std::pair<NodeId, std::uint64_t>> allocation;  // explored leaves
  std::vector<SplitRecord> splits;
  PartitionTree tree{0};
};

/// Initialisation, exploration, selection, exploitation, estimate. Draws
/// exactly n samples. Throws BudgetError when t_0 < 2 or t_0 > n.
UlcbRun run_mc_ulcb(const NoisyIntegrand& f, std::int64_t n, const UlcbConfig& config, Rng& rng);

}  // namespace mculcb
