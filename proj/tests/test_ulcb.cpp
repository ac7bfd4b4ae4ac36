#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mculcb/error.hpp"
#include "mculcb/ulcb.hpp"

using namespace mculcb;

namespace {

UlcbConfig experiment() {
  UlcbConfig c;
  c.mode = Mode::experiment;
  return c;
}

NoisyIntegrand step(std::vector<double> params = {}) {
  return synthetic_integrand(SyntheticKind::step, params);
}

}  // namespace

TEST_CASE("theory constants") {
  UlcbConfig c;
  c.f_max = 1.0 / 3.0;
  CHECK(theory_H(1.0 / 3.0, 1024) == 11);
  CHECK(preliminary_constants(c, 1024).H == 11);

  UlcbConfig fixed;
  fixed.A = 4.0;
  const UlcbConstants k = compute_constants(fixed, 1000, 1.0);
  CHECK(k.sigma_tilde == doctest::Approx(1.2).epsilon(1e-14));
  CHECK(k.c == doctest::Approx(21.2).epsilon(1e-14));
  const double B = 38.0 * std::sqrt(8.0) * 21.2 * (1.0 + 1.0 / 1.2);
  CHECK(k.B == doctest::Approx(B).epsilon(1e-14));
  CHECK(k.C_max_prime ==
        doctest::Approx(std::max(B, 14.0 * k.H * 21.2 * 2.0) + 4.0).epsilon(1e-14));
  CHECK(k.radius(0) == doctest::Approx(21.2 * 2.0 / 10.0).epsilon(1e-14));
  CHECK(k.exploration_level() == doctest::Approx(4.8 / 1000.0).epsilon(1e-14));
  CHECK(k.thresholds().at(0) == 400);
}

TEST_CASE("experiment constants") {
  const UlcbConstants k = compute_constants(experiment(), 2000, 0.0);
  CHECK(k.A == doctest::Approx(15.2018049).epsilon(1e-8));
  CHECK(k.H == 2);
  CHECK(k.c == 1.0);
  CHECK(k.thresholds().at(0) == static_cast<std::int64_t>(std::floor(k.A * std::cbrt(2000.0))));
}

TEST_CASE("constant validation") {
  UlcbConfig c = experiment();
  c.f_max = 0.0;
  CHECK_THROWS_AS(preliminary_constants(c, 1000), ConfigError);
  c = experiment();
  c.delta = 1.5;
  CHECK_THROWS_AS(preliminary_constants(c, 1000), ConfigError);
  c = experiment();
  CHECK_THROWS_AS(preliminary_constants(c, 1), ConfigError);
  c.A = 0.01;
  CHECK_THROWS_AS(preliminary_constants(c, 1000), ConfigError);  // t_0 < 2
  CHECK_THROWS_AS(compute_constants(experiment(), 1000, -1.0), ConfigError);
}

TEST_CASE("r recursion cases") {
  SUBCASE("equal sigmas share the close branch") {
    const auto [l, r] = split_r(0, {0.4, 0.4}, 0.5, 1.0, 0.03);
    CHECK(l == r);
    CHECK(l == doctest::Approx((0.5 * 0.4 + 0.03) / 0.5).epsilon(1e-15));
  }
  SUBCASE("separated sigmas") {
    const auto [l, r] = split_r(0, {1.0, 0.1}, 0.6, 1.0, 0.01);
    CHECK(r == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(l == doctest::Approx(0.49 / 0.6).epsilon(1e-12));
    CHECK(l + r == doctest::Approx(0.9166667).epsilon(1e-6));
  }
  SUBCASE("close branch capped at one half") {
    const auto [l, r] = split_r(0, {0.5, 0.5}, 0.5, 2.0, 0.2);
    CHECK(l == 1.0);
    CHECK(r == 1.0);
  }
  SUBCASE("flat parent halves the share") {
    const auto [l, r] = split_r(3, {0.0, 0.0}, 0.0, 0.8, 0.1);
    CHECK(l == 0.4);
    CHECK(r == 0.4);
  }
  SUBCASE("lower branch stays positive") {
    const auto [l, r] = split_r(0, {0.01, 1.0}, 0.6, 1.0, 0.1);
    CHECK(l == doctest::Approx((0.005 + 0.1) / 0.6).epsilon(1e-12));
    CHECK(r == doctest::Approx((0.5 - 0.1) / 0.6).epsilon(1e-12));
    Rng rng(4);
    for (int k = 0; k < 10000; ++k) {
      const double a = uniform_open(rng), b = uniform_open(rng);
      const double tilde = 0.5 * (a + b) + uniform_open(rng);
      const auto [x, y] = split_r(2, {a, b}, tilde, 1.0, 0.1 * uniform_open(rng));
      CHECK(x >= 0.0);
      CHECK(y >= 0.0);
      CHECK(x + y <= 1.0);
    }
  }
  SUBCASE("additivity violation is reported") {
    CHECK_THROWS_AS(split_r(0, {1.0, 3.0}, 0.5, 1.0, 0.01), InvariantError);
  }
  SUBCASE("compute_r uses the child radius") {
    UlcbConfig c;
    c.A = 4.0;
    c.c = 1.0;
    const UlcbConstants k = compute_constants(c, 1000, 1.0);
    const auto a = compute_r(NodeId{1, 1}, {0.3, 0.2}, 0.4, 0.5, k);
    const auto b = split_r(1, {0.3, 0.2}, 0.4, 0.5, k.radius(2));
    CHECK(a == b);
  }
}

TEST_CASE("selection") {
  UlcbConfig c;
  c.A = 1.0;
  c.c = 0.001;
  UlcbConstants k = compute_constants(c, 1000, 1.0);

  PartitionTree tree(3);
  tree.set_sigma_hat(kRoot, 1.0);
  CHECK(select_partition(tree, k) == Cut{{kRoot}});

  tree.open(kRoot);
  tree.set_sigma_hat({1, 0}, 0.0);
  tree.set_sigma_hat({1, 1}, 0.0);
  // penalty p(w) = (C'_max - 1) w^{2/3} / 10: 2 p(1/2) < 1 + p(1)
  const double p1 = k.selection_penalty() / 10.0;
  REQUIRE(2.0 * std::pow(0.5, 2.0 / 3.0) * p1 < 1.0 + p1);
  CHECK(select_partition(tree, k) == Cut{{{1, 0}, {1, 1}}});

  tree.set_sigma_hat(kRoot, 0.0);
  CHECK(select_partition(tree, k) == Cut{{kRoot}});

  const auto cuts = enumerate_cuts(tree);
  double best = INFINITY;
  for (const Cut& cut : cuts) best = std::min(best, cut_cost(tree, cut, k));
  CHECK(cut_cost(tree, select_partition(tree, k), k) == best);
}

TEST_CASE("constant integrand: no refinement, exact estimate") {
  const auto f = synthetic_integrand(SyntheticKind::constant, std::vector<double>{0.5});
  Rng rng(3);
  const UlcbRun run = run_mc_ulcb(f, 5000, experiment(), rng);
  CHECK(run.estimate == 0.5);
  CHECK(run.explored == Cut{{kRoot}});
  CHECK(run.selected == Cut{{kRoot}});
  CHECK(run.splits.empty());
  // r at the root equals Sigma-tilde when sigma-hat is 0: exploration runs to n / 4.
  CHECK(run.t_explore == 5000 / 4);
  CHECK(run.tree.total() == 5000);
}

TEST_CASE("noiseless step: one split at the jump, exact estimate") {
  const auto f = step();
  Rng rng(9);
  const UlcbRun run = run_mc_ulcb(f, 10000, experiment(), rng);
  CHECK(run.explored == Cut{{{1, 0}, {1, 1}}});
  REQUIRE(run.splits.size() == 1);
  CHECK(run.splits[0].sigma_left == 0.0);
  CHECK(run.splits[0].sigma_right == 0.0);
  CHECK(run.estimate == 0.5);
  std::uint64_t total = 0;
  for (const auto& [node, count] : run.allocation) total += count;
  CHECK(total == 10000);
}

TEST_CASE("noisy runs: budget, depth bound, additivity, determinism") {
  const auto f = synthetic_integrand(SyntheticKind::smooth_hetero, std::vector<double>{1.0, 0.1, 0.5});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const UlcbRun x = run_mc_ulcb(f, 8000, experiment(), a);
    const UlcbRun y = run_mc_ulcb(f, 8000, experiment(), b);
    CHECK(x.estimate == y.estimate);
    CHECK(x.allocation == y.allocation);
    CHECK(x.tree.total() == 8000);
    CHECK(x.explored.tiles());
    CHECK(x.selected.tiles());
    for (const NodeId& node : x.tree.preorder()) CHECK(node.depth <= x.constants.H);
    for (const SplitRecord& s : x.splits) {
      CHECK(s.r_left + s.r_right <= s.r_parent);
      CHECK(s.r_left >= 0.0);
      CHECK(s.r_right >= 0.0);
    }
    CHECK(x.t_explore <= 4000);
  }
}

TEST_CASE("budget errors") {
  const auto f = step();
  Rng rng(1);
  CHECK_THROWS_AS(run_mc_ulcb(f, 1000, UlcbConfig{}, rng), BudgetError);
  UlcbConfig tiny = experiment();
  tiny.A = 0.01;
  CHECK_THROWS_AS(run_mc_ulcb(f, 1000, tiny, rng), ConfigError);
}

TEST_CASE("exploration cap") {
  const auto f = synthetic_integrand(SyntheticKind::smooth_hetero, std::vector<double>{1.0, 0.1, 0.5});
  UlcbConfig c = experiment();
  c.exploration_cap_fraction = 0.06;
  Rng rng(2);
  const UlcbRun run = run_mc_ulcb(f, 10000, c, rng);
  CHECK(run.exploration_capped);
  CHECK(run.t_explore <= std::max<std::int64_t>(600, run.constants.thresholds().at(0)));
  CHECK(run.tree.total() == 10000);
}

TEST_CASE("exploitation on a two-leaf cut follows the oracle share") {
  const auto f = synthetic_integrand(SyntheticKind::step, std::vector<double>{0.5, 0.0, 0.0, 1.0, 3.0});
  const std::int64_t n = 20000;
  const UlcbConstants k = compute_constants(experiment(), n, 2.0);
  Rng rng(6);
  PartitionTree tree(k.H);
  for (int t = 0; t < 200; ++t) bss_draw(kRoot, tree, f, rng);
  tree.open(kRoot);
  for (const NodeId& child : {NodeId{1, 0}, NodeId{1, 1}}) {
    tree.set_sigma_hat(child, prefix_sd(tree, child, 100));
  }
  const Cut cut{{{1, 0}, {1, 1}}};
  exploitation_phase(f, tree, cut, k, experiment(), n - 200, rng);
  CHECK(tree.total() == static_cast<std::size_t>(n));
  const double share = static_cast<double>(tree.count({1, 1})) / static_cast<double>(n);
  CHECK(share >= 0.65);
  CHECK(share <= 0.85);

  PartitionTree single(k.H);
  for (int t = 0; t < 50; ++t) bss_draw(kRoot, single, f, rng);
  single.set_sigma_hat(kRoot, 1.0);
  exploitation_phase(f, single, Cut{{kRoot}}, k, experiment(), 950, rng);
  CHECK(single.count(kRoot) == 1000);
}

TEST_CASE("final estimate over explored leaves") {
  PartitionTree tree(2);
  tree.record(0.1, 1.0);
  tree.record(0.2, 3.0);
  tree.record(0.7, 10.0);
  tree.open(kRoot);
  CHECK(final_estimate(tree, Cut{{{1, 0}, {1, 1}}}) == 0.5 * 2.0 + 0.5 * 10.0);
  PartitionTree empty(2);
  empty.record(0.1, 1.0);
  empty.open(kRoot);
  CHECK_THROWS_AS(final_estimate(empty, Cut{{{1, 0}, {1, 1}}}), InvariantError);
}
