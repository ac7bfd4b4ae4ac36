#include "mculcb/ulcb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mculcb/error.hpp"

namespace mculcb {

double UlcbConstants::radius(int depth) const {
  const double w13 = std::cbrt(std::ldexp(1.0, -depth));
  return c * std::sqrt(A) * w13 * w13 / std::cbrt(static_cast<double>(n));
}

double UlcbConstants::selection_penalty() const { return C_max_prime - std::sqrt(A); }

int theory_H(double f_max, std::int64_t n) {
  const double cube = std::pow(3.0 * f_max, 3.0);
  return static_cast<int>(std::floor(std::log2(cube * static_cast<double>(n)))) + 1;
}

UlcbConstants preliminary_constants(const UlcbConfig& config, std::int64_t n) {
  if (n < 2) throw ConfigError("MC-ULCB: budget must be >= 2");
  if (!(config.f_max > 0.0)) throw ConfigError("MC-ULCB: f_max must be positive");
  if (!(config.b >= 0.0)) throw ConfigError("MC-ULCB: b must be non-negative");
  if (!(config.delta > 0.0 && config.delta < 1.0)) throw ConfigError("MC-ULCB: delta must lie in (0, 1)");
  if (!(config.B_factor > 0.0)) throw ConfigError("MC-ULCB: B factor must be positive");
  if (!(config.exploration_cap_fraction > 0.0 && config.exploration_cap_fraction <= 1.0)) {
    throw ConfigError("MC-ULCB: exploration cap fraction must lie in (0, 1]");
  }
  const bool experiment = config.mode == Mode::experiment;
  const double log_n = std::log(static_cast<double>(n));

  UlcbConstants k;
  k.n = n;
  k.delta = config.delta;
  k.f_max = config.f_max;
  k.b = config.b;
  k.A = config.A ? *config.A
                 : (experiment ? 2.0 * log_n : theory_A(config.f_max, config.b, n, config.delta));
  k.H = config.H ? *config.H
                 : (experiment ? static_cast<int>(std::floor(0.3 * log_n)) : theory_H(config.f_max, n));
  k.threshold_exponent = config.threshold_exponent.value_or(experiment ? 1.0 / 3.0 : 2.0 / 3.0);
  k.split_coeff = config.split_coeff.value_or(experiment ? 0.0 : 6.0);
  if (!(k.A > 0.0)) throw ConfigError("MC-ULCB: A must be positive");
  if (k.H < 0) throw ConfigError("MC-ULCB: H must be non-negative");
  k.H = std::min(k.H, NodeId::kMaxDepth);
  if (k.threshold_exponent <= 0.0 || k.threshold_exponent > 1.0) {
    throw ConfigError("MC-ULCB: threshold exponent must lie in (0, 1]");
  }
  if (k.thresholds().at(0) < 2) {
    throw ConfigError("MC-ULCB: budget too small, t_0 = " + std::to_string(k.thresholds().at(0)));
  }
  return k;
}

UlcbConstants compute_constants(const UlcbConfig& config, std::int64_t n, double sigma_hat_root) {
  if (!(sigma_hat_root >= 0.0)) throw ConfigError("MC-ULCB: sigma_hat_root must be >= 0");
  UlcbConstants k = preliminary_constants(config, n);
  const double sqrt_a = std::sqrt(k.A);
  k.sigma_tilde = sigma_hat_root + sqrt_a / std::cbrt(static_cast<double>(n));
  if (config.c) {
    k.c = *config.c;
  } else {
    k.c = config.mode == Mode::experiment ? 1.0 : (8.0 * k.sigma_tilde + 1.0) * sqrt_a;
  }
  k.B = config.B_factor * std::sqrt(2.0 * k.A) * k.c * (1.0 + 1.0 / k.sigma_tilde);
  k.C_max_prime = std::max(k.B, 14.0 * k.H * k.c * sqrt_a) + 2.0 * sqrt_a;
  return k;
}

std::pair<double, double> split_r(int parent_depth, std::pair<double, double> child_sigmas,
                                  double parent_sigma_tilde, double parent_r, double radius) {
  const double w_child = std::ldexp(1.0, -(parent_depth + 1));
  const double denom = std::ldexp(1.0, -parent_depth) * parent_sigma_tilde;
  if (!(denom > 0.0)) return {0.5 * parent_r, 0.5 * parent_r};

  const double sigma[2] = {child_sigmas.first, child_sigmas.second};
  double r[2];
  for (int j = 0; j < 2; ++j) {
    const double own = w_child * sigma[j];
    const double other = w_child * sigma[1 - j];
    const double gap = other - own;
    double share;
    if (std::abs(gap) <= 2.0 * radius) {
      share = std::min((w_child * std::min(sigma[0], sigma[1]) + radius) / denom, 0.5);
    } else if (gap > 0.0) {
      share = (own + radius) / denom;  // the flatter child: upper bound
    } else {
      share = (own - radius) / denom;  // the rougher child: lower bound
    }
    r[j] = std::max(share * parent_r, 0.0);
  }
  if (r[0] + r[1] > parent_r) {
    throw InvariantError("r additivity violated: " + std::to_string(r[0]) + " + " +
                         std::to_string(r[1]) + " > " + std::to_string(parent_r));
  }
  return {r[0], r[1]};
}

std::pair<double, double> compute_r(const NodeId& parent, std::pair<double, double> child_sigmas,
                                    double parent_sigma_tilde, double parent_r,
                                    const UlcbConstants& k) {
  return split_r(parent.depth, child_sigmas, parent_sigma_tilde, parent_r,
                 k.radius(parent.depth + 1));
}

void initialise_root(PartitionTree& tree, const UlcbConstants& k, const UlcbConfig& config) {
  const double sigma = prefix_sd(tree, kRoot, k.thresholds().at(0));
  tree.set_sigma_hat(kRoot, sigma);
  const double rad = k.radius(0);
  const double r = config.root_r == RootRVariant::plus ? sigma + rad : sigma - rad;
  tree.set_r_value(kRoot, std::clamp(r, 0.0, k.sigma_tilde));
}

namespace {

bool try_split(const NoisyIntegrand&, PartitionTree& tree, const NodeId& node,
               const UlcbConstants& k, std::vector<SplitRecord>& splits) {
  if (node.depth >= k.H || node.depth >= tree.max_depth()) return false;
  const Thresholds th = k.thresholds();
  const std::int64_t t_child = th.at(node.depth + 1);
  if (t_child < 2) return false;
  const NodeStats& s = tree.stats(node);
  if (static_cast<std::int64_t>(s.count()) < 2 * t_child) return false;
  if (!s.sigma_hat || !s.r_value) throw InvariantError("exploration leaf without sigma or r");
  const double sigma = *s.sigma_hat;
  if (!(sigma > 0.0)) return false;
  if (node.weight() * sigma < k.split_coeff * k.H * k.radius(node.depth)) return false;

  const double r_parent = *s.r_value;
  tree.open(node);
  const double sigma_left = prefix_sd(tree, node.left(), t_child);
  const double sigma_right = prefix_sd(tree, node.right(), t_child);
  const double tilde = prefix_sd(tree, node, 2 * t_child);
  const auto [r_left, r_right] = compute_r(node, {sigma_left, sigma_right}, tilde, r_parent, k);
  tree.set_sigma_hat(node.left(), sigma_left);
  tree.set_sigma_hat(node.right(), sigma_right);
  tree.set_r_value(node.left(), r_left);
  tree.set_r_value(node.right(), r_right);
  splits.push_back({node, r_parent, r_left, r_right, sigma_left, sigma_right, tilde});
  return true;
}

}  // namespace

ExplorationResult exploration_phase(const NoisyIntegrand& f, PartitionTree& tree,
                                    const UlcbConstants& k, const UlcbConfig& config, Rng& rng) {
  ExplorationResult result;
  const auto cap = static_cast<std::size_t>(
      std::floor(config.exploration_cap_fraction * static_cast<double>(k.n)));
  const double level = k.exploration_level();

  for (;;) {
    for (bool split = true; split;) {
      split = false;
      for (const NodeId& leaf : tree.leaves().leaves) {
        if (try_split(f, tree, leaf, k, result.splits)) {
          split = true;
          break;
        }
      }
    }

    std::optional<NodeId> eligible;
    for (const NodeId& leaf : tree.leaves().leaves) {
      const NodeStats& s = tree.stats(leaf);
      const double r = s.r_value.value_or(0.0);
      if (r > level * static_cast<double>(s.count())) {
        eligible = leaf;
        break;
      }
    }
    if (!eligible) break;
    if (tree.total() >= cap) {
      result.capped = true;
      break;
    }
    bss_draw(*eligible, tree, f, rng);
  }
  result.drawn = static_cast<std::int64_t>(tree.total());
  return result;
}

namespace {

double leaf_cost(const PartitionTree& tree, const NodeId& node, double penalty, double n13) {
  const NodeStats& s = tree.stats(node);
  if (!s.sigma_hat) throw InvariantError("partition selection: node without sigma-hat");
  const double w = node.weight();
  const double w13 = std::cbrt(w);
  return w * *s.sigma_hat + penalty * w13 * w13 / n13;
}

double best_cut(const PartitionTree& tree, const NodeId& node, double penalty, double n13,
                std::vector<NodeId>& out) {
  const double own = leaf_cost(tree, node, penalty, n13);
  if (!tree.stats(node).is_open) {
    out.push_back(node);
    return own;
  }
  std::vector<NodeId> below;
  const double split = best_cut(tree, node.left(), penalty, n13, below) +
                       best_cut(tree, node.right(), penalty, n13, below);
  if (split < own) {
    out.insert(out.end(), below.begin(), below.end());
    return split;
  }
  out.push_back(node);
  return own;
}

}  // namespace

double cut_cost(const PartitionTree& tree, const Cut& cut, const UlcbConstants& k) {
  const double penalty = k.selection_penalty();
  const double n13 = std::cbrt(static_cast<double>(k.n));
  double total = 0.0;
  for (const NodeId& leaf : cut.leaves) total += leaf_cost(tree, leaf, penalty, n13);
  return total;
}

Cut select_partition(const PartitionTree& tree, const UlcbConstants& k) {
  Cut cut;
  best_cut(tree, kRoot, k.selection_penalty(), std::cbrt(static_cast<double>(k.n)), cut.leaves);
  cut.sort();
  return cut;
}

void exploitation_phase(const NoisyIntegrand& f, PartitionTree& tree, const Cut& cut,
                        const UlcbConstants& k, const UlcbConfig& config,
                        std::int64_t remaining, Rng& rng) {
  if (remaining <= 0) return;
  Cut ordered = cut;
  ordered.sort();
  for (const NodeId& leaf : ordered.leaves) {
    const NodeStats& s = tree.stats(leaf);
    if (s.count() < 2 || !s.sigma_hat) {
      throw InvariantError("exploitation: cut member without enough samples");
    }
  }
  for (std::int64_t step = 0; step < remaining; ++step) {
    const NodeId* best = nullptr;
    double best_index = 0.0;
    for (const NodeId& leaf : ordered.leaves) {
      const NodeStats& s = tree.stats(leaf);
      const double index = ucb_index(leaf.weight(), static_cast<std::int64_t>(s.count()),
                                     *s.sigma_hat, k.A, k.n, config.index_variant);
      if (best == nullptr || index > best_index) {
        best = &leaf;
        best_index = index;
      }
    }
    bss_a_draw(*best, tree, f, rng, config.bssa_direction);
  }
}

double final_estimate(const PartitionTree& tree, const Cut& leaves) {
  double estimate = 0.0;
  const auto log = tree.log();
  for (const NodeId& leaf : leaves.leaves) {
    const NodeStats& s = tree.stats(leaf);
    if (s.count() == 0) throw InvariantError("final estimate: empty stratum");
    double sum = 0.0;
    for (const std::uint32_t idx : s.samples) sum += log[idx].value;
    estimate += leaf.weight() * (sum / static_cast<double>(s.count()));
  }
  return estimate;
}

UlcbRun run_mc_ulcb(const NoisyIntegrand& f, std::int64_t n, const UlcbConfig& config, Rng& rng) {
  const UlcbConstants pre = preliminary_constants(config, n);
  const std::int64_t t0 = pre.thresholds().at(0);
  if (t0 > n) {
    throw BudgetError("MC-ULCB: initialisation needs t_0 = " + std::to_string(t0) +
                      " samples, budget is " + std::to_string(n));
  }

  UlcbRun run;
  run.tree = PartitionTree(pre.H);
  PartitionTree& tree = run.tree;
  for (std::int64_t t = 0; t < t0; ++t) bss_draw(kRoot, tree, f, rng);

  run.constants = compute_constants(config, n, prefix_sd(tree, kRoot, t0));
  const UlcbConstants& k = run.constants;
  initialise_root(tree, k, config);

  ExplorationResult exploration = exploration_phase(f, tree, k, config, rng);
  run.t_explore = exploration.drawn;
  run.exploration_capped = exploration.capped;
  run.splits = std::move(exploration.splits);

  run.selected = select_partition(tree, k);
  exploitation_phase(f, tree, run.selected, k, config, n - run.t_explore, rng);
  if (static_cast<std::int64_t>(tree.total()) != n) {
    throw InvariantError("MC-ULCB: drew " + std::to_string(tree.total()) + " samples, budget " +
                         std::to_string(n));
  }

  run.explored = tree.leaves();
  run.estimate = final_estimate(tree, run.explored);
  for (const NodeId& leaf : run.explored.leaves) {
    run.allocation.emplace_back(leaf, tree.stats(leaf).count());
  }
  return run;
}

}  // namespace mculcb
