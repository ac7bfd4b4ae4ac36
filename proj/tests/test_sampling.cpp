#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "mculcb/error.hpp"
#include "mculcb/sampling.hpp"

using namespace mculcb;

namespace {

const NoisyIntegrand kZero = synthetic_integrand(SyntheticKind::constant, std::vector<double>{0.0});

bool balanced(const PartitionTree& tree, const NodeId& node, int levels) {
  const std::uint64_t t = tree.count(node);
  for (int l = 1; l <= levels; ++l) {
    const std::uint64_t width = std::uint64_t{1} << l;
    std::uint64_t sum = 0;
    for (std::uint64_t j = 0; j < width; ++j) {
      const std::uint64_t c = tree.count({node.depth + l, node.index * width + j});
      if (c != t / width && c != (t + width - 1) / width) return false;
      sum += c;
    }
    if (sum != t) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("first BSS draw is uniform in the node") {
  PartitionTree tree(4);
  Rng rng(1);
  const Sample s = bss_draw({2, 1}, tree, kZero, rng);
  CHECK(NodeId{2, 1}.contains(s.x));
  CHECK(tree.count({3, 2}) + tree.count({3, 3}) == 1);
}

TEST_CASE("two draws split the halves") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    PartitionTree tree(4);
    Rng rng(seed);
    bss_draw(kRoot, tree, kZero, rng);
    bss_draw(kRoot, tree, kZero, rng);
    CHECK(tree.count({1, 0}) == 1);
    CHECK(tree.count({1, 1}) == 1);
  }
}

TEST_CASE("five draws: depth-1 {3,2}, depth-2 permutation of {2,1,1,1}") {
  std::set<std::vector<std::uint64_t>> seen;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    PartitionTree tree(4);
    Rng rng(seed);
    for (int k = 0; k < 5; ++k) bss_draw(kRoot, tree, kZero, rng);
    std::vector<std::uint64_t> d1{tree.count({1, 0}), tree.count({1, 1})};
    std::sort(d1.begin(), d1.end());
    CHECK(d1 == std::vector<std::uint64_t>{2, 3});
    std::vector<std::uint64_t> d2;
    for (std::uint64_t j = 0; j < 4; ++j) d2.push_back(tree.count({2, j}));
    seen.insert(d2);
    std::sort(d2.begin(), d2.end());
    CHECK(d2 == std::vector<std::uint64_t>{1, 1, 1, 2});
  }
  CHECK(seen.size() == 4);  // every cell can receive the extra sample
}

TEST_CASE("balance holds after every draw, also below a non-root node") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    PartitionTree tree(3);
    Rng rng(seed);
    const NodeId node{2, 3};
    for (int t = 1; t <= 100; ++t) {
      bss_draw(node, tree, kZero, rng);
      REQUIRE(balanced(tree, node, 8));
    }
  }
}

TEST_CASE("BSS consumes one draw per coin and one for the position") {
  PartitionTree tree(2, 2);
  Rng rng(9), mirror(9);
  bss_draw(kRoot, tree, kZero, rng);  // fresh: position only
  mirror();
  CHECK(rng() == mirror());
}

TEST_CASE("BSS-A falls back to BSS when children are unexplored") {
  PartitionTree a(4), b(4);
  Rng ra(21), rb(21);
  for (int k = 0; k < 6; ++k) {
    const Sample x = bss_a_draw(kRoot, a, kZero, ra);
    const Sample y = bss_draw(kRoot, b, kZero, rb);
    CHECK(x.x == y.x);
  }
}

TEST_CASE("BSS-A steers by r/T") {
  PartitionTree tree(4);
  Rng rng(2);
  for (int k = 0; k < 15; ++k) tree.record(k < 10 ? 0.25 : 0.75, 0.0);
  tree.open(kRoot);
  tree.set_r_value({1, 0}, 1.0);  // r/T = 0.1
  tree.set_r_value({1, 1}, 1.0);  // r/T = 0.2
  CHECK(bss_a_target(kRoot, tree) == NodeId{1, 1});
  CHECK(bss_a_target(kRoot, tree, BssaDirection::smaller_ratio) == NodeId{1, 0});
  const Sample s = bss_a_draw(kRoot, tree, kZero, rng);
  CHECK(NodeId{1, 1}.contains(s.x));
}

TEST_CASE("BSS-A ties go to the lower index") {
  PartitionTree tree(4);
  for (int k = 0; k < 12; ++k) tree.record(k < 8 ? 0.25 : 0.75, 0.0);
  tree.open(kRoot);
  tree.set_r_value({1, 0}, 2.0);
  tree.set_r_value({1, 1}, 1.0);
  CHECK(bss_a_target(kRoot, tree) == NodeId{1, 0});
  CHECK(bss_a_target(kRoot, tree, BssaDirection::smaller_ratio) == NodeId{1, 0});
}

TEST_CASE("BSS-A descends through several explored levels") {
  PartitionTree tree(4);
  for (int k = 0; k < 16; ++k) tree.record((k + 0.5) / 16.0, 0.0);
  tree.open(kRoot);
  tree.open({1, 1});
  tree.set_r_value({1, 0}, 1.0);
  tree.set_r_value({1, 1}, 2.0);
  tree.set_r_value({2, 2}, 0.5);
  tree.set_r_value({2, 3}, 1.0);
  CHECK(bss_a_target(kRoot, tree) == NodeId{2, 3});
}

TEST_CASE("BSS-A rejects explored children without r") {
  PartitionTree tree(4);
  tree.record(0.2, 0.0);
  tree.record(0.7, 0.0);
  tree.open(kRoot);
  tree.set_r_value({1, 0}, 1.0);
  CHECK_THROWS_AS(bss_a_target(kRoot, tree), InvariantError);
}
