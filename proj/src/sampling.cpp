#include "mculcb/sampling.hpp"

#include <cmath>

#include "mculcb/error.hpp"

namespace mculcb {

double bss_position(const NodeId& node, const PartitionTree& tree, Rng& rng) {
  NodeId current = node;
  while (current.depth < tree.count_depth()) {
    const std::uint64_t left = tree.count(current.left());
    const std::uint64_t right = tree.count(current.right());
    if (left != right) {
      current = left < right ? current.left() : current.right();
    } else if (left > 0) {
      current = current.child(fair_coin(rng) ? 1 : 0);
    } else {
      break;
    }
  }
  const double lo = current.lo();
  const double hi = current.hi();
  double x = lo + (hi - lo) * uniform_open(rng);
  if (x >= hi) x = std::nextafter(hi, lo);
  return x;
}

Sample bss_draw(const NodeId& node, PartitionTree& tree, const NoisyIntegrand& f, Rng& rng) {
  const double x = bss_position(node, tree, rng);
  const double value = f.sample(x, rng);
  tree.record(x, value);
  return {x, value};
}

NodeId bss_a_target(const NodeId& node, const PartitionTree& tree, BssaDirection direction) {
  NodeId current = node;
  while (tree.stats(current).is_open) {
    double ratio[2];
    for (int side = 0; side < 2; ++side) {
      const NodeStats& s = tree.stats(current.child(side));
      if (!s.r_value) throw InvariantError("BSS-A: explored child without r value");
      if (s.count() == 0) throw InvariantError("BSS-A: explored child without samples");
      ratio[side] = *s.r_value / static_cast<double>(s.count());
    }
    int pick = 0;
    if (direction == BssaDirection::larger_ratio) {
      pick = ratio[1] > ratio[0] ? 1 : 0;
    } else {
      pick = ratio[1] < ratio[0] ? 1 : 0;
    }
    current = current.child(pick);
  }
  return current;
}

Sample bss_a_draw(const NodeId& node, PartitionTree& tree, const NoisyIntegrand& f, Rng& rng,
                  BssaDirection direction) {
  return bss_draw(bss_a_target(node, tree, direction), tree, f, rng);
}

}  // namespace mculcb
