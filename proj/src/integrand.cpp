#include "mculcb/integrand.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mculcb/error.hpp"
#include "mculcb/normal.hpp"

namespace mculcb {

NoisyIntegrand::NoisyIntegrand(std::string name, SampleFn sample, double f_max, double b,
                               MomentFn moments)
    : name_(std::move(name)),
      sample_(std::move(sample)),
      f_max_(f_max),
      b_(b),
      moments_(std::move(moments)) {
  if (!sample_) throw ConfigError("integrand '" + name_ + "': missing sample function");
  if (!(f_max_ > 0.0)) throw ConfigError("integrand '" + name_ + "': f_max must be positive");
  if (!(b_ >= 0.0)) throw ConfigError("integrand '" + name_ + "': b must be non-negative");
}

std::optional<Moments> NoisyIntegrand::moments(double lo, double hi) const {
  if (!moments_) return std::nullopt;
  return moments_(lo, hi);
}

NoisyIntegrand NoisyIntegrand::with_moments(MomentFn moments) const {
  NoisyIntegrand copy = *this;
  copy.moments_ = std::move(moments);
  return copy;
}

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name) {
  if (name == "constant") return SyntheticKind::constant;
  if (name == "step") return SyntheticKind::step;
  if (name == "smooth_hetero") return SyntheticKind::smooth_hetero;
  return std::nullopt;
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::constant: return "constant";
    case SyntheticKind::step: return "step";
    case SyntheticKind::smooth_hetero: return "smooth_hetero";
  }
  return "?";
}

namespace {

double param_or(std::span<const double> p, std::size_t i, double fallback) {
  return i < p.size() ? p[i] : fallback;
}

void check_interval(double lo, double hi) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) {
    throw DomainError("stratum must satisfy 0 <= lo < hi <= 1");
  }
}

// Trailing (f_max, b) overrides after `arity` kind parameters.
std::pair<double, double> bounds(std::span<const double> p, std::size_t arity,
                                 double f_max, double b) {
  if (p.size() > arity + 2) throw ConfigError("too many integrand parameters");
  return {param_or(p, arity, f_max), param_or(p, arity + 1, b)};
}

}  // namespace

NoisyIntegrand synthetic_integrand(SyntheticKind kind, std::span<const double> params) {
  for (const double v : params) {
    if (!std::isfinite(v)) throw ConfigError("integrand parameters must be finite");
  }
  switch (kind) {
    case SyntheticKind::constant: {
      const double value = param_or(params, 0, 0.5);
      const auto [f_max, b] = bounds(params, 1, std::max(std::abs(value), 1e-12), 0.0);
      return NoisyIntegrand(
          "constant", [value](double, Rng&) { return value; }, f_max, b,
          [value](double lo, double hi) -> std::optional<Moments> {
            check_interval(lo, hi);
            return Moments{value, 0.0};
          });
    }
    case SyntheticKind::step: {
      const double jump = param_or(params, 0, 0.5);
      const double left = param_or(params, 1, 1.0);
      const double right = param_or(params, 2, 0.0);
      const double noise_left = param_or(params, 3, 0.0);
      const double noise_right = param_or(params, 4, 0.0);
      if (!(jump >= 0.0 && jump <= 1.0)) throw ConfigError("step: jump must lie in [0, 1]");
      if (noise_left < 0.0 || noise_right < 0.0) throw ConfigError("step: negative noise");
      const auto [f_max, b] =
          bounds(params, 5,
                 std::max({std::abs(left), std::abs(right), noise_left, noise_right, 1e-12}),
                 std::max(noise_left, noise_right));
      auto sample = [=](double x, Rng& rng) {
        if (x < jump) return noise_left > 0.0 ? left + noise_left * gaussian(rng) : left;
        return noise_right > 0.0 ? right + noise_right * gaussian(rng) : right;
      };
      auto moments = [=](double lo, double hi) -> std::optional<Moments> {
        check_interval(lo, hi);
        const double p = std::clamp((jump - lo) / (hi - lo), 0.0, 1.0);
        const double mean = p * left + (1.0 - p) * right;
        const double var = p * (1.0 - p) * (left - right) * (left - right) +
                           p * noise_left * noise_left + (1.0 - p) * noise_right * noise_right;
        return Moments{mean, std::sqrt(var)};
      };
      return NoisyIntegrand("step", sample, f_max, b, moments);
    }
    case SyntheticKind::smooth_hetero: {
      const double slope = param_or(params, 0, 1.0);
      const double s0 = param_or(params, 1, 0.1);
      const double s1 = param_or(params, 2, 0.0);
      if (s0 < 0.0 || s0 + s1 < 0.0) throw ConfigError("smooth_hetero: noise must be >= 0 on [0, 1]");
      const auto [f_max, b] =
          bounds(params, 3, std::max({std::abs(slope), s0, s0 + s1, 1e-12}), std::max(s0, s0 + s1));
      auto sample = [=](double x, Rng& rng) {
        const double s = s0 + s1 * x;
        return s > 0.0 ? slope * x + s * gaussian(rng) : slope * x;
      };
      auto moments = [=](double lo, double hi) -> std::optional<Moments> {
        check_interval(lo, hi);
        const double width = hi - lo;
        const double mean_noise_sq =
            s0 * s0 + s0 * s1 * (lo + hi) + s1 * s1 * (lo * lo + lo * hi + hi * hi) / 3.0;
        const double var = slope * slope * width * width / 12.0 + mean_noise_sq;
        return Moments{slope * 0.5 * (lo + hi), std::sqrt(var)};
      };
      return NoisyIntegrand("smooth_hetero", sample, f_max, b, moments);
    }
  }
  throw ConfigError("unknown synthetic integrand kind");
}

void AsianOptionParams::validate() const {
  if (!(s0_price > 0.0)) throw ConfigError("asian: s0_price must be positive");
  if (!(vol >= 0.0)) throw ConfigError("asian: vol must be non-negative");
  if (!(maturity > 0.0)) throw ConfigError("asian: maturity must be positive");
  if (bridge_steps < 1) throw ConfigError("asian: bridge_steps must be >= 1");
  if (!std::isfinite(rate) || !std::isfinite(strike)) throw ConfigError("asian: non-finite parameter");
  if (!(f_max > 0.0) || !(b >= 0.0)) throw ConfigError("asian: invalid f_max / b");
}

std::vector<double> brownian_bridge(const AsianOptionParams& p, double w_terminal, Rng& rng) {
  const int d = p.bridge_steps;
  std::vector<double> path(static_cast<std::size_t>(d));
  const double dt = p.maturity / d;
  double prev_w = 0.0;
  double prev_t = 0.0;
  for (int k = 1; k < d; ++k) {
    const double t = k * dt;
    const double remaining = p.maturity - prev_t;
    const double mean = prev_w + (t - prev_t) / remaining * (w_terminal - prev_w);
    const double sd = std::sqrt((t - prev_t) * (p.maturity - t) / remaining);
    prev_w = mean + sd * gaussian(rng);
    prev_t = t;
    path[static_cast<std::size_t>(k - 1)] = prev_w;
  }
  path.back() = w_terminal;
  return path;
}

double asian_payoff(const AsianOptionParams& p, std::span<const double> path) {
  const double dt = p.maturity / static_cast<double>(path.size());
  const double drift = p.rate - 0.5 * p.vol * p.vol;
  double sum = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double t = static_cast<double>(k + 1) * dt;
    sum += p.s0_price * std::exp(drift * t + p.vol * path[k]);
  }
  const double average = sum / static_cast<double>(path.size());
  return std::exp(-p.rate * p.maturity) * std::max(average - p.strike, 0.0);
}

NoisyIntegrand asian_option_integrand(const AsianOptionParams& p) {
  p.validate();
  auto sample = [p](double x, Rng& rng) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("asian option: quantile must lie in (0, 1)");
    const double w_terminal = std::sqrt(p.maturity) * normal_inverse_cdf(x);
    const std::vector<double> path = brownian_bridge(p, w_terminal, rng);
    return asian_payoff(p, path);
  };
  return NoisyIntegrand("asian", sample, p.f_max, p.b);
}

}  // namespace mculcb
