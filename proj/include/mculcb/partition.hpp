#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mculcb {

/// Address [h, i] of the dyadic stratum [i 2^-h, (i+1) 2^-h).
struct NodeId {
  int depth = 0;
  std::uint64_t index = 0;

  static constexpr int kMaxDepth = 50;

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;

  double weight() const;
  double lo() const;
  double hi() const;
  NodeId left() const { return {depth + 1, 2 * index}; }
  NodeId right() const { return {depth + 1, 2 * index + 1}; }
  NodeId child(int side) const { return {depth + 1, 2 * index + static_cast<std::uint64_t>(side)}; }
  NodeId parent() const { return {depth - 1, index / 2}; }
  bool valid() const;
  bool contains(double x) const;
  /// True when `other` is a strict descendant of this node.
  bool is_ancestor_of(const NodeId& other) const;
  /// The depth-`depth` node whose interval contains x in [0, 1).
  static NodeId containing(double x, int depth);
};

inline constexpr NodeId kRoot{0, 0};

struct Sample {
  double x = 0.0;
  double value = 0.0;
};

/// Bookkeeping of a materialised node. `samples` indexes the tree's global
/// log in arrival order and holds every sample whose x lies in the node,
/// including the ones drawn before the node was materialised.
struct NodeStats {
  std::vector<std::uint32_t> samples;
  bool is_open = false;
  std::optional<double> r_value;
  std::optional<double> sigma_hat;

  std::size_t count() const { return samples.size(); }
};

/// An antichain of nodes whose strata tile a root interval.
struct Cut {
  std::vector<NodeId> leaves;

  /// Exact tiling check of `root`'s interval (dyadic integer arithmetic).
  bool tiles(const NodeId& root = kRoot) const;
  void sort();
  friend bool operator==(const Cut&, const Cut&) = default;
};

/// Dyadic hierarchical partitioning of [0, 1] with per-node sample logs.
///
/// Counts are tracked for every node down to `count_depth` whether or not
/// the node is materialised; the sampling schemes navigate on them.
/// Materialised nodes form a full binary tree rooted at [0, 0] whose
/// non-open nodes are the current leaves. Single writer.
class PartitionTree {
 public:
  /// `count_depth` < 0 selects min(max_depth + 20, NodeId::kMaxDepth).
  explicit PartitionTree(int max_depth, int count_depth = -1);

  int max_depth() const { return max_depth_; }
  int count_depth() const { return count_depth_; }

  /// Number of logged samples falling in the node's interval.
  std::uint64_t count(const NodeId& node) const;
  std::size_t total() const { return log_.size(); }
  std::span<const Sample> log() const { return log_; }

  /// Appends a sample and attributes it along its root-to-leaf path.
  void record(double x, double value);

  bool is_materialised(const NodeId& node) const { return nodes_.contains(node); }
  const NodeStats& stats(const NodeId& node) const;
  void set_r_value(const NodeId& node, double r);
  void set_sigma_hat(const NodeId& node, double sigma);

  /// Materialises both children of a materialised leaf (depth < max_depth).
  void open(const NodeId& node);

  /// First `limit` logged values of a materialised node, arrival order.
  std::vector<double> values(const NodeId& node, std::size_t limit) const;
  /// Every logged value of a materialised node.
  std::vector<double> values(const NodeId& node) const;

  /// Materialised nodes that are not open.
  Cut leaves() const;
  /// Materialised nodes in pre-order.
  std::vector<NodeId> preorder(const NodeId& from = kRoot) const;
  /// Depth of the materialised subtree below `from` (0 for a leaf).
  int subtree_height(const NodeId& from) const;

  /// One line per node "h i T sigma_hat r_value is_open", tab-separated,
  /// pre-order; undefined values print as "-".
  void dump(std::ostream& os) const;

 private:
  static std::uint64_t key(const NodeId& node) {
    return (static_cast<std::uint64_t>(node.depth) << 56) | node.index;
  }

  int max_depth_;
  int count_depth_;
  std::vector<Sample> log_;
  std::unordered_map<std::uint64_t, std::uint32_t> counts_;
  std::map<NodeId, NodeStats> nodes_;
};

/// floor(coeff * w_h^{2/3} * n^{exponent}); the theory form uses coeff = A
/// and exponent 2/3.
struct Thresholds {
  double coeff = 1.0;
  double n_exponent = 2.0 / 3.0;
  std::int64_t budget = 1;

  std::int64_t at(int depth) const;
  /// Same formula for a stratum of arbitrary measure.
  std::int64_t for_weight(double weight) const;
};

/// t_h = floor(A 2^{-2h/3} n^{2/3}).
std::int64_t t_threshold(int depth, double A, std::int64_t n);

/// Population standard deviation of the first `t` samples of `node`.
double prefix_sd(const PartitionTree& tree, const NodeId& node, std::int64_t t);

/// sigma-hat over the first t_h samples of the node.
double sigma_hat(const NodeId& node, const PartitionTree& tree, const Thresholds& th);
double sigma_hat(const NodeId& node, const PartitionTree& tree, double A, std::int64_t n);

/// sigma-tilde over the first 2 t_{h+1} samples of the node.
double sigma_tilde(const NodeId& node, const PartitionTree& tree, const Thresholds& th);
double sigma_tilde(const NodeId& node, const PartitionTree& tree, double A, std::int64_t n);

/// Every cut of the materialised subtree under `root`; refuses subtrees
/// deeper than 6 levels. Test oracle for partition selection.
std::vector<Cut> enumerate_cuts(const PartitionTree& tree, const NodeId& root = kRoot);

}  // namespace mculcb
