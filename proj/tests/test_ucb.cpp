#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mculcb/error.hpp"
#include "mculcb/ucb.hpp"

using namespace mculcb;

namespace {

// Two equal halves with pure Gaussian noise of standard deviation s1, s2.
NoisyIntegrand two_noise(double s1, double s2) {
  return synthetic_integrand(SyntheticKind::step, std::vector<double>{0.5, 0.0, 0.0, s1, s2});
}

}  // namespace

TEST_CASE("ucb index examples") {
  CHECK(ucb_index(1.0, 1000, 0.0, 1.0, 1000, IndexVariant::theorem) ==
        doctest::Approx(1e-4).epsilon(1e-12));
  for (const double sigma : {0.0, 0.5, 2.0}) {
    CHECK(ucb_index(1.0, 4, sigma, 2.0, 1000, IndexVariant::footnote) ==
          doctest::Approx((sigma + 1.0) / 4.0).epsilon(1e-15));
  }
  CHECK(ucb_index(0.5, 10, 1.0, 8.0, 64, IndexVariant::exploitation) ==
        doctest::Approx(0.05 * (1.0 + std::sqrt(2.0))).epsilon(1e-15));
  for (const auto v : {IndexVariant::theorem, IndexVariant::footnote, IndexVariant::exploitation}) {
    double prev = ucb_index(0.25, 1, 1.0, 3.0, 500, v);
    for (std::int64_t t = 2; t < 100; ++t) {
      const double cur = ucb_index(0.25, t, 1.0, 3.0, 500, v);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  CHECK_THROWS_AS(ucb_index(1.0, 0, 1.0, 1.0, 10, IndexVariant::theorem), DomainError);
}

TEST_CASE("theory A") {
  const double f_max = 1.0, b = 0.5, delta = 0.1;
  const std::int64_t n = 1000;
  const double expected =
      2.0 * std::sqrt(2.0 * (1.0 + 1.5 + 4.0) * std::log(4.0 * 1e6 * 27.0 / delta));
  CHECK(theory_A(f_max, b, n, delta) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(McUcbParams::experiment(2000).A == doctest::Approx(15.2018049).epsilon(1e-8));
}

TEST_CASE("uniform strata") {
  const auto s = uniform_strata(5);
  REQUIRE(s.size() == 5);
  CHECK(s.front().lo == 0.0);
  CHECK(s.back().hi == 1.0);
  CHECK_THROWS_AS(uniform_strata(0), ConfigError);
  const auto c = strata_of(Cut{{{1, 0}, {2, 2}, {2, 3}}});
  CHECK(c[1].lo == 0.5);
  CHECK_THROWS_AS(strata_of(Cut{{{1, 0}}}), ConfigError);
}

TEST_CASE("crude Monte Carlo") {
  const auto c = synthetic_integrand(SyntheticKind::constant, std::vector<double>{0.5});
  Rng rng(4);
  CHECK(crude_mc(c, 17, rng) == 0.5);
  const auto step = synthetic_integrand(SyntheticKind::step, std::vector<double>{});
  CHECK(std::abs(crude_mc(step, 1000000, rng) - 0.5) < 4.0 * 0.5 / 1000.0);
  CHECK_THROWS_AS(crude_mc(c, 0, rng), BudgetError);
}

TEST_CASE("MC-UCB budget rules") {
  const auto f = two_noise(1.0, 3.0);
  Rng rng(8);
  McUcbParams p;
  p.A = 1.0;
  CHECK_THROWS_AS(mc_ucb(f, uniform_strata(10), 39, p, rng), BudgetError);
  p.A = 100.0;
  CHECK_THROWS_AS(mc_ucb(f, uniform_strata(2), 1000, p, rng), BudgetError);
  p.A = 1.0;
  const auto r = mc_ucb(f, uniform_strata(3), 777, p, rng);
  CHECK(std::accumulate(r.counts.begin(), r.counts.end(), std::int64_t{0}) == 777);
  for (const auto c : r.counts) CHECK(c >= 2);
}

TEST_CASE("MC-UCB on flat strata alternates") {
  const auto f = synthetic_integrand(SyntheticKind::step, std::vector<double>{0.5, 2.0, 1.0});
  Rng rng(1);
  McUcbParams p;
  p.A = 0.5;
  const auto r = mc_ucb(f, uniform_strata(2), 1001, p, rng);
  CHECK(std::abs(r.counts[0] - r.counts[1]) <= 1);
  CHECK(r.estimate == 1.5);
}

TEST_CASE("MC-UCB allocation approaches the oracle") {
  const auto f = two_noise(1.0, 3.0);
  const std::int64_t n = 10000;
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto r = mc_ucb(f, uniform_strata(2), n, McUcbParams::experiment(n), rng);
    const double share = static_cast<double>(r.counts[1]) / n;
    inside += share >= 0.70 && share <= 0.80;
  }
  CHECK(inside == 20);
}

TEST_CASE("MC-UCB on a cut") {
  const auto f = two_noise(1.0, 3.0);
  Rng a(5), b(5);
  McUcbParams p;
  p.A = 1.0;
  const auto x = mc_ucb(f, Cut{{{1, 0}, {1, 1}}}, 2000, p, a);
  const auto y = mc_ucb(f, uniform_strata(2), 2000, p, b);
  CHECK(x.counts == y.counts);
  CHECK(x.estimate == y.estimate);
}

TEST_CASE("MC-UCB index rarely undercuts w sigma / T") {
  const auto f = two_noise(1.0, 3.0);
  const std::int64_t n = 2000;
  const double sigma[2] = {1.0, 3.0};
  int runs_with_violation = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    McUcbParams p = McUcbParams::experiment(n);
    bool violated = false;
    p.observer = [&](std::span<const double> idx, std::span<const std::int64_t> counts) {
      for (std::size_t k = 0; k < 2; ++k) {
        if (idx[k] < 0.5 * sigma[k] / static_cast<double>(counts[k])) violated = true;
      }
    };
    mc_ucb(f, uniform_strata(2), n, p, rng);
    runs_with_violation += violated;
  }
  CHECK(runs_with_violation <= 30);
}

TEST_CASE("MC-UCB deviation from the oracle shrinks like n^{-1/3}") {
  const auto f = two_noise(1.0, 3.0);
  std::vector<double> fitted;
  for (const std::int64_t n : {1000, 10000, 100000}) {
    double dev = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const auto r = mc_ucb(f, uniform_strata(2), n, McUcbParams::experiment(n), rng);
      dev += std::abs(static_cast<double>(r.counts[1]) / n - 0.75);
    }
    fitted.push_back(dev / 10.0 * std::cbrt(static_cast<double>(n)));
  }
  for (const double c : fitted) {
    CHECK(c > fitted[0] / 3.0);
    CHECK(c < fitted[0] * 3.0);
  }
}
