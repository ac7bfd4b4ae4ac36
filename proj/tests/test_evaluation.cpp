#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "mculcb/error.hpp"
#include "mculcb/evaluation.hpp"
#include "mculcb/ucb.hpp"

using namespace mculcb;

TEST_CASE("pseudo risk") {
  const std::vector<StratumTerm> one{{1.0, 1.0, 100}};
  CHECK(pseudo_risk(one) == doctest::Approx(0.01).epsilon(1e-15));
  const std::vector<StratumTerm> two{{0.5, 1.0, 50}, {0.5, 3.0, 150}};
  CHECK(pseudo_risk(two) == doctest::Approx(0.02).epsilon(1e-14));
  const std::vector<StratumTerm> flat{{0.5, 0.0, 5}, {0.5, 0.0, 7}};
  CHECK(pseudo_risk(flat) == 0.0);
  const std::vector<StratumTerm> empty{{1.0, 1.0, 0}};
  CHECK_THROWS_AS(pseudo_risk(empty), DomainError);

  const Cut cut{{{1, 0}, {1, 1}}};
  const std::map<NodeId, double> sigmas{{{1, 0}, 1.0}, {{1, 1}, 3.0}};
  const std::map<NodeId, std::int64_t> counts{{{1, 0}, 50}, {{1, 1}, 150}};
  CHECK(pseudo_risk(cut, sigmas, counts) == doctest::Approx(0.02).epsilon(1e-14));
}

TEST_CASE("oracle risk") {
  const std::vector<double> w{0.5, 0.5}, s{1.0, 3.0};
  const auto o = oracle_risk(w, s, 200);
  CHECK(o.risk == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(o.lambdas[0] == 0.25);
  CHECK(o.lambdas[1] == 0.75);
  const std::vector<double> w1{1.0}, s1{2.0};
  CHECK(oracle_risk(w1, s1, 8).risk == 0.5);
  CHECK(oracle_risk(w1, s1, 8).lambdas[0] == 1.0);
  const std::vector<double> w4(4, 0.25), s4(4, 1.7);
  for (const double l : oracle_risk(w4, s4, 10).lambdas) CHECK(l == doctest::Approx(0.25));
  const std::vector<double> z(4, 0.0);
  const auto flat = oracle_risk(w4, z, 10);
  CHECK(flat.risk == 0.0);
  for (const double l : flat.lambdas) CHECK(l == 0.25);
}

TEST_CASE("oracle allocation minimises the pseudo risk") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 6);
    std::vector<double> w(K, 1.0 / K), s(K);
    for (double& v : s) v = uniform_open(rng) * 3.0;
    const std::int64_t n = 100 + static_cast<std::int64_t>(rng() % 1000);
    const auto o = oracle_risk(w, s, n);
    std::vector<StratumTerm> terms;
    for (int k = 0; k < K; ++k) terms.push_back({w[k], s[k], 1 + static_cast<std::int64_t>(rng() % 300)});
    const std::int64_t total = std::accumulate(terms.begin(), terms.end(), std::int64_t{0},
                                               [](std::int64_t a, const StratumTerm& t) { return a + t.count; });
    CHECK(pseudo_risk(terms) >= oracle_risk(w, s, total).risk * (1.0 - 1e-12));
    double real_risk = 0.0;
    for (int k = 0; k < K; ++k) real_risk += w[k] * w[k] * s[k] * s[k] / (o.lambdas[k] * n);
    CHECK(real_risk == doctest::Approx(o.risk).epsilon(1e-12));
  }
}

TEST_CASE("theorem 1 bound") {
  const std::vector<double> halves{0.5, 0.5};
  CHECK(theorem1_bound(halves, 2.0, 200, 0.0) == 0.02);
  const std::vector<double> eighths(8, 0.125);
  const double n = 1000.0;
  const double penalty = theorem1_bound(eighths, 1.5, 1000, 3.0) - 1.5 * 1.5 / n;
  CHECK(penalty == doctest::Approx(3.0 * 1.5 * 2.0 / std::pow(n, 4.0 / 3.0)).epsilon(1e-12));
  // {[1,0], [2,2], [3,6], ..., [d, 2^d - 2], [d, 2^d - 1]}: bounded penalty at any depth
  const double limit = 1.0 / (std::pow(2.0, 2.0 / 3.0) - 1.0) + 1.0;
  double prev = 0.0;
  for (int depth = 1; depth <= 30; ++depth) {
    Cut cut;
    for (int h = 1; h <= depth; ++h) cut.leaves.push_back({h, (std::uint64_t{1} << h) - 2});
    cut.leaves.push_back({depth, (std::uint64_t{1} << depth) - 1});
    REQUIRE(cut.tiles());
    const double b = theorem1_bound(cut, 1.0, 1000, 1.0);
    CHECK(b <= 1.0 / n + limit / std::pow(n, 4.0 / 3.0));
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("confidence width") {
  CHECK(confidence_width(1, 0.0, 0.0, 2.0 / std::exp(1.0)) == doctest::Approx(2.0).epsilon(1e-15));
  for (const std::int64_t t : {1, 7, 100}) {
    CHECK(confidence_width(4 * t, 1.0, 0.5, 0.1) ==
          doctest::Approx(confidence_width(t, 1.0, 0.5, 0.1) / 2.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(confidence_width(0, 1.0, 0.0, 0.1), DomainError);
}

TEST_CASE("MSE harness") {
  std::vector<std::uint64_t> seeds(400);
  std::iota(seeds.begin(), seeds.end(), 1000);
  const auto constant = mse_harness([](std::uint64_t) { return 0.5; }, 0.5, seeds);
  CHECK(constant.mse == 0.0);
  CHECK(constant.reps == 400);

  const auto noise = synthetic_integrand(SyntheticKind::smooth_hetero, std::vector<double>{0.0, 1.0});
  const std::int64_t n = 50;
  auto crude = [&](std::uint64_t seed) {
    Rng rng(seed);
    return crude_mc(noise, n, rng);
  };
  const auto est = mse_harness(crude, 0.0, seeds, 3);
  CHECK(std::abs(est.mse - 1.0 / n) < 3.0 * est.stderr_mse);

  std::vector<std::uint64_t> shuffled = seeds;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[3], shuffled[77]);
  const auto again = mse_harness(crude, 0.0, shuffled, 1);
  CHECK(again.mse == est.mse);
  CHECK(again.stderr_mse == est.stderr_mse);
  CHECK_THROWS_AS(mse_harness(crude, 0.0, std::span<const std::uint64_t>{}, 1), ConfigError);
}

TEST_CASE("parallel_for propagates failures") {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] = 1; });
  CHECK(std::accumulate(hit.begin(), hit.end(), 0) == 100);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw DomainError("boom");
                  }),
                  DomainError);
}

TEST_CASE("true sigma report") {
  const auto f = synthetic_integrand(SyntheticKind::step, std::vector<double>{0.5, 1.0, 0.0, 1.0, 3.0});
  const std::vector<std::pair<NodeId, std::uint64_t>> alloc{{{1, 0}, 50}, {{1, 1}, 150}};
  const auto report = true_sigma_report(f, alloc);
  REQUIRE(report);
  CHECK(report->pseudo_risk == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(report->oracle_risk == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(report->sigma_used == SigmaSource::true_sigma);
  const auto opaque = asian_option_integrand(AsianOptionParams{});
  CHECK_FALSE(true_sigma_report(opaque, alloc));
}

TEST_CASE("moment table") {
  const auto f = synthetic_integrand(SyntheticKind::smooth_hetero, std::vector<double>{1.0, 0.1, 0.3});
  const MomentTable table = MomentTable::build(f, 3, 200000, 77, 2);
  for (const auto& [lo, hi] : {std::pair{0.0, 1.0}, std::pair{0.25, 0.5}, std::pair{0.5, 0.625}}) {
    const Moments exact = *f.moments(lo, hi);
    const Moments est = *table.on_interval(lo, hi);
    CHECK(est.mean == doctest::Approx(exact.mean).epsilon(0.01));
    CHECK(est.sd == doctest::Approx(exact.sd).epsilon(0.01));
  }
  CHECK_FALSE(table.on_interval(0.0, 0.2));
  std::stringstream io;
  table.save(io);
  const MomentTable back = MomentTable::load(io);
  CHECK(back.on_interval(0.25, 0.5)->sd == table.on_interval(0.25, 0.5)->sd);
  CHECK(back.samples_per_leaf() == 200000);
  const MomentTable serial = MomentTable::build(f, 3, 1000, 5, 1);
  const MomentTable threaded = MomentTable::build(f, 3, 1000, 5, 3);
  CHECK(serial.on_interval(0.0, 1.0)->sd == threaded.on_interval(0.0, 1.0)->sd);
  std::stringstream bad("nonsense 3 4");
  CHECK_THROWS_AS(MomentTable::load(bad), ConfigError);
}
