#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mculcb/rng.hpp"

namespace mculcb {

/// Mean and standard deviation of F(X, eps) with X uniform on an interval.
struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

/// A sampleable noisy function F(x, eps) = g(x) + s(x) eps on [0, 1].
///
/// `f_max` bounds |g| and s, `b` is the sub-Gaussian scale of the noise.
/// Sampling is deterministic given (x, rng state) and the object is
/// immutable, so concurrent callers only need their own Rng.
class NoisyIntegrand {
 public:
  using SampleFn = std::function<double(double, Rng&)>;
  using MomentFn = std::function<std::optional<Moments>(double, double)>;

  NoisyIntegrand(std::string name, SampleFn sample, double f_max, double b,
                 MomentFn moments = {});

  double sample(double x, Rng& rng) const { return sample_(x, rng); }

  double f_max() const { return f_max_; }
  double b() const { return b_; }
  const std::string& name() const { return name_; }

  /// Exact stratum moments on [lo, hi) when the integrand can provide them.
  std::optional<Moments> moments(double lo, double hi) const;
  bool has_moments() const { return static_cast<bool>(moments_); }

  /// Copy with a different moment provider (e.g. a brute-force table).
  NoisyIntegrand with_moments(MomentFn moments) const;

 private:
  std::string name_;
  SampleFn sample_;
  double f_max_;
  double b_;
  MomentFn moments_;
};

enum class SyntheticKind { constant, step, smooth_hetero };

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name);
std::string_view to_string(SyntheticKind kind);

// Parameter lists (trailing entries may be omitted, defaults in brackets):
//   constant:      value [0.5]
//   step:          jump [0.5], left [1], right [0], noise_left [0], noise_right [0]
//   smooth_hetero: slope [1], noise_base [0.1], noise_slope [0]
// Noise is Gaussian with the given standard deviation. A trailing pair
// (f_max, b) may follow the kind parameters; otherwise f_max is the sup of
// |g| and s and b is the largest noise standard deviation.
NoisyIntegrand synthetic_integrand(SyntheticKind kind, std::span<const double> params);

struct AsianOptionParams {
  double s0_price = 100.0;
  double rate = 0.05;
  double vol = 0.30;
  double maturity = 1.0;
  double strike = 90.0;
  int bridge_steps = 16;
  double f_max = 60.0;
  double b = 10.0;

  void validate() const;
};

/// Brownian path at t_k = k T / d, k = 1..d, given W_T, filled by a bridge.
std::vector<double> brownian_bridge(const AsianOptionParams& p, double w_terminal, Rng& rng);

/// Discounted arithmetic-average Asian call payoff for a sampled path.
double asian_payoff(const AsianOptionParams& p, std::span<const double> path);

/// The option payoff stratified on the quantile x of W_T ~ N(0, T).
/// Throws DomainError when sampled at x outside (0, 1).
NoisyIntegrand asian_option_integrand(const AsianOptionParams& p);

}  // namespace mculcb
