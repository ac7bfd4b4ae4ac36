#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mculcb/integrand.hpp"
#include "mculcb/partition.hpp"
#include "mculcb/rng.hpp"

namespace mculcb {

/// The three upper-confidence indices found for MC-UCB-style allocation.
///   theorem:      w/T (sigma + sqrt(A) / (w^{1/3} n^{1/3}))
///   footnote:     w/T (sigma + A / sqrt(T))
///   exploitation: w/T (sigma + sqrt(A / n^{1/3}))
enum class IndexVariant { theorem, footnote, exploitation };

double ucb_index(double weight, std::int64_t count, double sigma_hat, double A, std::int64_t n,
                 IndexVariant variant);

/// A stratum [lo, hi) of [0, 1] with uniform measure hi - lo.
struct Stratum {
  double lo = 0.0;
  double hi = 1.0;
  double weight() const { return hi - lo; }
};

std::vector<Stratum> uniform_strata(int K);
std::vector<Stratum> strata_of(const Cut& cut);

/// A = 2 sqrt(2 (1 + 3b + 4 f_max) log(4 n^2 (3 f_max)^3 / delta)).
double theory_A(double f_max, double b, std::int64_t n, double delta);

struct McUcbParams {
  double A = 1.0;
  /// Initialisation draws max(floor(A w^{2/3} n^{e}), 2) per stratum.
  double n_exponent = 2.0 / 3.0;
  IndexVariant variant = IndexVariant::theorem;
  /// Called before every post-initialisation draw with current indices and counts.
  std::function<void(std::span<const double>, std::span<const std::int64_t>)> observer;

  static McUcbParams theory(double f_max, double b, double delta, std::int64_t n);
  /// A = 2 ln n with n^{1/3} initialisation.
  static McUcbParams experiment(std::int64_t n);
};

struct McUcbResult {
  double estimate = 0.0;
  std::vector<std::int64_t> counts;
  std::vector<double> means;
  std::vector<double> sds;
};

/// Mean of n uniform samples.
double crude_mc(const NoisyIntegrand& f, std::int64_t n, Rng& rng);

/// MC-UCB on a fixed partition: initialise every stratum, then repeatedly
/// sample (uniformly within the stratum) the stratum with the largest index,
/// lowest index on ties. Throws BudgetError if n < 4K or the initialisation
/// exceeds n.
McUcbResult mc_ucb(const NoisyIntegrand& f, std::span<const Stratum> strata, std::int64_t n,
                   const McUcbParams& params, Rng& rng);
McUcbResult mc_ucb(const NoisyIntegrand& f, const Cut& cut, std::int64_t n,
                   const McUcbParams& params, Rng& rng);

}  // namespace mculcb
