#ifndef RTESTIM_CORE_DELAY_HPP
#define RTESTIM_CORE_DELAY_HPP

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtestim/core/series.hpp"

namespace rtestim::core {

enum class DelayFamily { exponential, gamma, lognormal, weibull, hypoexponential };

std::string to_string(DelayFamily family);
DelayFamily parse_delay_family(const std::string& text);

/**
 * Continuous delay law measured in days.
 *
 * Parameterizations:
 *   exponential      (rate)
 *   gamma            (shape, rate)
 *   lognormal        (meanlog, sdlog)
 *   weibull          (shape, scale)
 *   hypoexponential  (rate1, rate2)   sum of two independent exponentials
 *
 * Invalid parameters throw std::domain_error at construction.
 */
class ContinuousDelay {
public:
  ContinuousDelay(DelayFamily family, std::vector<double> parameters);

  static ContinuousDelay exponential(double rate);
  static ContinuousDelay gamma(double shape, double rate);
  static ContinuousDelay lognormal(double meanlog, double sdlog);
  static ContinuousDelay weibull(double shape, double scale);
  static ContinuousDelay hypoexponential(double rate1, double rate2);

  DelayFamily family() const { return family_; }
  std::span<const double> parameters() const { return parameters_; }
  /// Names of the parameters, in the order of parameters().
  std::vector<std::string> parameter_names() const;

  double cdf(double x) const;
  /// Inverse CDF for p in (0, 1).
  double quantile(double p) const;
  double mean() const;
  double sd() const;

  template <typename Engine>
  double sample(Engine& engine) const;

private:
  DelayFamily family_;
  std::vector<double> parameters_;
};

/**
 * Discretized delay weights. `weights[i]` is the mass at lag `i + offset`.
 * Offset 1 is used for generation times (no same-step transmission), offset 0
 * for the latent period (cases may arise from same-step incidence).
 */
class DiscretizedDelay {
public:
  DiscretizedDelay(std::vector<double> weights, int offset);

  std::span<const double> weights() const { return weights_; }
  int offset() const { return offset_; }
  /// Largest lag with stored mass.
  std::ptrdiff_t max_lag() const {
    return static_cast<std::ptrdiff_t>(weights_.size()) - 1 + offset_;
  }
  /// Weight at an arbitrary lag; zero outside the stored support.
  double at(std::ptrdiff_t lag) const {
    const std::ptrdiff_t i = lag - offset_;
    if (i < 0 || i >= static_cast<std::ptrdiff_t>(weights_.size())) return 0.0;
    return weights_[static_cast<std::size_t>(i)];
  }
  double total() const;

private:
  std::vector<double> weights_;
  int offset_;
};

/**
 * Unit-step discretization:
 *   lag u >= 2:              F(u + 0.5) - F(u - 0.5)
 *   offset 1, lag 1:         F(1.5)
 *   offset 0, lag 0 and 1:   F(0.5), F(1.5) - F(0.5)
 * `length` weights are produced; mass beyond them is dropped, not renormalized.
 */
DiscretizedDelay discretize(const ContinuousDelay& delay, std::size_t length, int offset);

/**
 * Sums unit-step weights into bins of `factor` steps centred on multiples of
 * the factor. Bin u collects lags [factor*u - h, factor*u + h] with
 * h = (factor - 1) / 2, and the first bin additionally absorbs every shorter
 * lag. Applied to daily weights this reproduces the unit-step formula on the
 * coarser grid. `factor` must be odd.
 */
DiscretizedDelay rebin(const DiscretizedDelay& fine, int factor, std::size_t length);

/// Discretizes a delay given in days onto the grid of `step`.
DiscretizedDelay discretize_at_step(const ContinuousDelay& delay, std::size_t length, int offset,
                                    TimeStep step);

/// Smallest number of lags (counted from lag `offset`) whose cumulative mass exceeds `mass`.
std::size_t support_length(const DiscretizedDelay& delay, double mass);

/**
 * Sum over u of incidence[u] * weights.at(t - u). `incidence[i]` holds the
 * value at time `first_time + i`; only times u <= t enter, and lags outside
 * the stored support contribute zero (so offset-1 weights skip lag 0).
 */
double weighted_incidence_sum(std::span<const double> incidence, std::ptrdiff_t first_time,
                              const DiscretizedDelay& weights, std::ptrdiff_t t);

template <typename Engine>
double ContinuousDelay::sample(Engine& engine) const {
  const auto& p = parameters_;
  switch (family_) {
    case DelayFamily::exponential:
      return std::exponential_distribution<double>(p[0])(engine);
    case DelayFamily::gamma:
      return std::gamma_distribution<double>(p[0], 1.0 / p[1])(engine);
    case DelayFamily::lognormal:
      return std::lognormal_distribution<double>(p[0], p[1])(engine);
    case DelayFamily::weibull:
      return std::weibull_distribution<double>(p[0], p[1])(engine);
    case DelayFamily::hypoexponential:
      return std::exponential_distribution<double>(p[0])(engine) +
             std::exponential_distribution<double>(p[1])(engine);
  }
  return 0.0;
}

}  // namespace rtestim::core

#endif  // RTESTIM_CORE_DELAY_HPP
