#include "mculcb/partition.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mculcb/error.hpp"

namespace mculcb {

double NodeId::weight() const { return std::ldexp(1.0, -depth); }
double NodeId::lo() const { return std::ldexp(static_cast<double>(index), -depth); }
double NodeId::hi() const { return std::ldexp(static_cast<double>(index + 1), -depth); }

bool NodeId::valid() const {
  return depth >= 0 && depth <= kMaxDepth && index < (std::uint64_t{1} << depth);
}

bool NodeId::contains(double x) const { return x >= lo() && x < hi(); }

bool NodeId::is_ancestor_of(const NodeId& other) const {
  if (other.depth <= depth) return false;
  return (other.index >> (other.depth - depth)) == index;
}

NodeId NodeId::containing(double x, int depth) {
  if (!(x >= 0.0 && x < 1.0)) throw DomainError("NodeId::containing: x must lie in [0, 1)");
  return {depth, static_cast<std::uint64_t>(std::ldexp(x, depth))};
}

bool Cut::tiles(const NodeId& root) const {
  if (leaves.empty()) return false;
  int deepest = root.depth;
  for (const NodeId& leaf : leaves) {
    if (!leaf.valid()) return false;
    if (!(leaf == root || root.is_ancestor_of(leaf))) return false;
    deepest = std::max(deepest, leaf.depth);
  }
  // Express every leaf as [begin, end) on the 2^deepest grid and require
  // that they chain without gap or overlap from root begin to root end.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  spans.reserve(leaves.size());
  for (const NodeId& leaf : leaves) {
    const int shift = deepest - leaf.depth;
    spans.emplace_back(leaf.index << shift, (leaf.index + 1) << shift);
  }
  std::sort(spans.begin(), spans.end());
  const int root_shift = deepest - root.depth;
  std::uint64_t cursor = root.index << root_shift;
  for (const auto& [begin, end] : spans) {
    if (begin != cursor) return false;
    cursor = end;
  }
  return cursor == (root.index + 1) << root_shift;
}

void Cut::sort() { std::sort(leaves.begin(), leaves.end()); }

PartitionTree::PartitionTree(int max_depth, int count_depth)
    : max_depth_(max_depth),
      count_depth_(count_depth < 0 ? std::min(max_depth + 20, NodeId::kMaxDepth) : count_depth) {
  if (max_depth_ < 0 || max_depth_ > NodeId::kMaxDepth) {
    throw ConfigError("PartitionTree: max_depth out of range");
  }
  if (count_depth_ < max_depth_ || count_depth_ > NodeId::kMaxDepth) {
    throw ConfigError("PartitionTree: count_depth must lie in [max_depth, 50]");
  }
  nodes_.emplace(kRoot, NodeStats{});
}

std::uint64_t PartitionTree::count(const NodeId& node) const {
  if (node.depth > count_depth_) {
    throw DomainError("PartitionTree::count: node below the count floor");
  }
  const auto it = counts_.find(key(node));
  return it == counts_.end() ? 0 : it->second;
}

void PartitionTree::record(double x, double value) {
  if (!(x >= 0.0 && x < 1.0)) throw DomainError("PartitionTree::record: x must lie in [0, 1)");
  const auto idx = static_cast<std::uint32_t>(log_.size());
  log_.push_back({x, value});
  for (int d = 0; d <= count_depth_; ++d) {
    ++counts_[key(NodeId::containing(x, d))];
  }
  NodeId node = kRoot;
  for (;;) {
    NodeStats& stats = nodes_.at(node);
    stats.samples.push_back(idx);
    if (!stats.is_open) break;
    node = node.left().contains(x) ? node.left() : node.right();
  }
}

const NodeStats& PartitionTree::stats(const NodeId& node) const {
  const auto it = nodes_.find(node);
  if (it == nodes_.end()) throw DomainError("PartitionTree: node is not materialised");
  return it->second;
}

void PartitionTree::set_r_value(const NodeId& node, double r) {
  const auto it = nodes_.find(node);
  if (it == nodes_.end()) throw DomainError("PartitionTree: node is not materialised");
  it->second.r_value = r;
}

void PartitionTree::set_sigma_hat(const NodeId& node, double sigma) {
  const auto it = nodes_.find(node);
  if (it == nodes_.end()) throw DomainError("PartitionTree: node is not materialised");
  it->second.sigma_hat = sigma;
}

void PartitionTree::open(const NodeId& node) {
  const auto it = nodes_.find(node);
  if (it == nodes_.end()) throw DomainError("PartitionTree::open: node is not materialised");
  if (it->second.is_open) throw DomainError("PartitionTree::open: node already open");
  if (node.depth >= max_depth_) throw DomainError("PartitionTree::open: depth bound reached");
  NodeStats left;
  NodeStats right;
  const NodeId left_id = node.left();
  for (const std::uint32_t idx : it->second.samples) {
    (left_id.contains(log_[idx].x) ? left : right).samples.push_back(idx);
  }
  it->second.is_open = true;
  nodes_.emplace(left_id, std::move(left));
  nodes_.emplace(node.right(), std::move(right));
}

std::vector<double> PartitionTree::values(const NodeId& node, std::size_t limit) const {
  const NodeStats& s = stats(node);
  const std::size_t m = std::min(limit, s.samples.size());
  std::vector<double> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) out.push_back(log_[s.samples[k]].value);
  return out;
}

std::vector<double> PartitionTree::values(const NodeId& node) const {
  return values(node, stats(node).samples.size());
}

Cut PartitionTree::leaves() const {
  Cut cut;
  for (const auto& [id, s] : nodes_) {
    if (!s.is_open) cut.leaves.push_back(id);
  }
  return cut;
}

std::vector<NodeId> PartitionTree::preorder(const NodeId& from) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{from};
  while (!stack.empty()) {
    const NodeId node = stack.back();
    stack.pop_back();
    const NodeStats& s = stats(node);
    out.push_back(node);
    if (s.is_open) {
      stack.push_back(node.right());
      stack.push_back(node.left());
    }
  }
  return out;
}

int PartitionTree::subtree_height(const NodeId& from) const {
  int height = 0;
  for (const NodeId& node : preorder(from)) height = std::max(height, node.depth - from.depth);
  return height;
}

void PartitionTree::dump(std::ostream& os) const {
  for (const NodeId& node : preorder()) {
    const NodeStats& s = stats(node);
    os << node.depth << '\t' << node.index << '\t' << s.count() << '\t';
    if (s.sigma_hat) os << *s.sigma_hat; else os << '-';
    os << '\t';
    if (s.r_value) os << *s.r_value; else os << '-';
    os << '\t' << (s.is_open ? 1 : 0) << '\n';
  }
}

namespace {

// x^{2/3} and x^{1/3} through cbrt keep exact cubes exact.
double n_power(std::int64_t n, double exponent) {
  const double x = static_cast<double>(n);
  if (exponent == 2.0 / 3.0) {
    const double r = std::cbrt(x);
    return r * r;
  }
  if (exponent == 1.0 / 3.0) return std::cbrt(x);
  return std::pow(x, exponent);
}

}  // namespace

std::int64_t Thresholds::at(int depth) const { return for_weight(std::ldexp(1.0, -depth)); }

std::int64_t Thresholds::for_weight(double weight) const {
  const double w13 = std::cbrt(weight);
  const double value = coeff * w13 * w13 * n_power(budget, n_exponent);
  return static_cast<std::int64_t>(std::floor(value + 1e-9));
}

std::int64_t t_threshold(int depth, double A, std::int64_t n) {
  return Thresholds{A, 2.0 / 3.0, n}.at(depth);
}

double prefix_sd(const PartitionTree& tree, const NodeId& node, std::int64_t t) {
  if (t < 2) throw InsufficientDataError("prefix_sd: need a prefix of at least 2 samples");
  const NodeStats& s = tree.stats(node);
  if (s.count() < static_cast<std::size_t>(t)) {
    throw InsufficientDataError("prefix_sd: node holds fewer samples than the prefix");
  }
  const auto log = tree.log();
  double mean = 0.0;
  for (std::int64_t u = 0; u < t; ++u) mean += log[s.samples[static_cast<std::size_t>(u)]].value;
  mean /= static_cast<double>(t);
  double ss = 0.0;
  for (std::int64_t u = 0; u < t; ++u) {
    const double dev = log[s.samples[static_cast<std::size_t>(u)]].value - mean;
    ss += dev * dev;
  }
  return std::sqrt(ss / static_cast<double>(t));
}

double sigma_hat(const NodeId& node, const PartitionTree& tree, const Thresholds& th) {
  return prefix_sd(tree, node, th.at(node.depth));
}

double sigma_hat(const NodeId& node, const PartitionTree& tree, double A, std::int64_t n) {
  return sigma_hat(node, tree, Thresholds{A, 2.0 / 3.0, n});
}

double sigma_tilde(const NodeId& node, const PartitionTree& tree, const Thresholds& th) {
  return prefix_sd(tree, node, 2 * th.at(node.depth + 1));
}

double sigma_tilde(const NodeId& node, const PartitionTree& tree, double A, std::int64_t n) {
  return sigma_tilde(node, tree, Thresholds{A, 2.0 / 3.0, n});
}

namespace {

std::vector<Cut> cuts_below(const PartitionTree& tree, const NodeId& node) {
  std::vector<Cut> out{Cut{{node}}};
  if (!tree.stats(node).is_open) return out;
  const std::vector<Cut> left = cuts_below(tree, node.left());
  const std::vector<Cut> right = cuts_below(tree, node.right());
  out.reserve(1 + left.size() * right.size());
  for (const Cut& l : left) {
    for (const Cut& r : right) {
      Cut joined = l;
      joined.leaves.insert(joined.leaves.end(), r.leaves.begin(), r.leaves.end());
      out.push_back(std::move(joined));
    }
  }
  return out;
}

}  // namespace

std::vector<Cut> enumerate_cuts(const PartitionTree& tree, const NodeId& root) {
  if (tree.subtree_height(root) > 6) {
    throw DomainError("enumerate_cuts: subtree deeper than 6 levels");
  }
  return cuts_below(tree, root);
}

}  // namespace mculcb
