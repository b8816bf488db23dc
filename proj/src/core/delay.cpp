#include "rtestim/core/delay.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/weibull.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rtestim::core {

std::string to_string(DelayFamily family) {
  switch (family) {
    case DelayFamily::exponential: return "exponential";
    case DelayFamily::gamma: return "gamma";
    case DelayFamily::lognormal: return "lognormal";
    case DelayFamily::weibull: return "weibull";
    case DelayFamily::hypoexponential: return "hypoexponential";
  }
  return "unknown";
}

DelayFamily parse_delay_family(const std::string& text) {
  for (auto f : {DelayFamily::exponential, DelayFamily::gamma, DelayFamily::lognormal,
                 DelayFamily::weibull, DelayFamily::hypoexponential})
    if (to_string(f) == text) return f;
  throw std::invalid_argument("unknown delay family '" + text + "'");
}

namespace {

std::size_t parameter_count(DelayFamily family) {
  return family == DelayFamily::exponential ? 1 : 2;
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

ContinuousDelay::ContinuousDelay(DelayFamily family, std::vector<double> parameters)
    : family_(family), parameters_(std::move(parameters)) {
  if (parameters_.size() != parameter_count(family_))
    throw std::domain_error(to_string(family_) + " delay expects " +
                            std::to_string(parameter_count(family_)) + " parameter(s)");
  const auto& p = parameters_;
  bool ok = true;
  switch (family_) {
    case DelayFamily::lognormal: ok = std::isfinite(p[0]) && positive_finite(p[1]); break;
    default:
      for (double v : p) ok = ok && positive_finite(v);
  }
  if (!ok) throw std::domain_error("invalid parameters for " + to_string(family_) + " delay");
}

ContinuousDelay ContinuousDelay::exponential(double rate) {
  return {DelayFamily::exponential, {rate}};
}
ContinuousDelay ContinuousDelay::gamma(double shape, double rate) {
  return {DelayFamily::gamma, {shape, rate}};
}
ContinuousDelay ContinuousDelay::lognormal(double meanlog, double sdlog) {
  return {DelayFamily::lognormal, {meanlog, sdlog}};
}
ContinuousDelay ContinuousDelay::weibull(double shape, double scale) {
  return {DelayFamily::weibull, {shape, scale}};
}
ContinuousDelay ContinuousDelay::hypoexponential(double rate1, double rate2) {
  return {DelayFamily::hypoexponential, {rate1, rate2}};
}

std::vector<std::string> ContinuousDelay::parameter_names() const {
  switch (family_) {
    case DelayFamily::exponential: return {"rate"};
    case DelayFamily::gamma: return {"shape", "rate"};
    case DelayFamily::lognormal: return {"meanlog", "sdlog"};
    case DelayFamily::weibull: return {"shape", "scale"};
    case DelayFamily::hypoexponential: return {"rate1", "rate2"};
  }
  return {};
}

double ContinuousDelay::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  const auto& p = parameters_;
  switch (family_) {
    case DelayFamily::exponential: return -std::expm1(-p[0] * x);
    case DelayFamily::gamma:
      return boost::math::cdf(boost::math::gamma_distribution<double>(p[0], 1.0 / p[1]), x);
    case DelayFamily::lognormal:
      return boost::math::cdf(boost::math::lognormal_distribution<double>(p[0], p[1]), x);
    case DelayFamily::weibull:
      return boost::math::cdf(boost::math::weibull_distribution<double>(p[0], p[1]), x);
    case DelayFamily::hypoexponential: {
      const double a = p[0];
      const double b = p[1];
      // Erlang(2) limit when the rates coincide.
      if (std::abs(a - b) <= 1e-9 * std::max(a, b)) {
        const double r = 0.5 * (a + b);
        return -std::expm1(-r * x) - r * x * std::exp(-r * x);
      }
      return 1.0 - (b * std::exp(-a * x) - a * std::exp(-b * x)) / (b - a);
    }
  }
  return 0.0;
}

double ContinuousDelay::quantile(double prob) const {
  if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("quantile probability must lie in (0, 1)");
  const auto& p = parameters_;
  switch (family_) {
    case DelayFamily::exponential: return -std::log1p(-prob) / p[0];
    case DelayFamily::gamma:
      return boost::math::quantile(boost::math::gamma_distribution<double>(p[0], 1.0 / p[1]), prob);
    case DelayFamily::lognormal:
      return boost::math::quantile(boost::math::lognormal_distribution<double>(p[0], p[1]), prob);
    case DelayFamily::weibull:
      return boost::math::quantile(boost::math::weibull_distribution<double>(p[0], p[1]), prob);
    case DelayFamily::hypoexponential: {
      // Bracketed by the quantiles of the faster and slower exponential stages.
      const double lo = -std::log1p(-prob) / std::max(p[0], p[1]);
      double hi = -std::log1p(-prob) * (1.0 / p[0] + 1.0 / p[1]) + 1.0;
      while (cdf(hi) < prob) hi *= 2.0;
      boost::math::tools::eps_tolerance<double> tol(52);
      std::uintmax_t iterations = 200;
      const auto r = boost::math::tools::toms748_solve(
          [&](double x) { return cdf(x) - prob; }, lo, hi, tol, iterations);
      return 0.5 * (r.first + r.second);
    }
  }
  return 0.0;
}

double ContinuousDelay::mean() const {
  const auto& p = parameters_;
  switch (family_) {
    case DelayFamily::exponential: return 1.0 / p[0];
    case DelayFamily::gamma: return p[0] / p[1];
    case DelayFamily::lognormal: return std::exp(p[0] + 0.5 * p[1] * p[1]);
    case DelayFamily::weibull: return p[1] * std::tgamma(1.0 + 1.0 / p[0]);
    case DelayFamily::hypoexponential: return 1.0 / p[0] + 1.0 / p[1];
  }
  return 0.0;
}

double ContinuousDelay::sd() const {
  const auto& p = parameters_;
  switch (family_) {
    case DelayFamily::exponential: return 1.0 / p[0];
    case DelayFamily::gamma: return std::sqrt(p[0]) / p[1];
    case DelayFamily::lognormal:
      return std::sqrt(std::expm1(p[1] * p[1])) * std::exp(p[0] + 0.5 * p[1] * p[1]);
    case DelayFamily::weibull: {
      const double g1 = std::tgamma(1.0 + 1.0 / p[0]);
      const double g2 = std::tgamma(1.0 + 2.0 / p[0]);
      return p[1] * std::sqrt(std::max(0.0, g2 - g1 * g1));
    }
    case DelayFamily::hypoexponential:
      return std::sqrt(1.0 / (p[0] * p[0]) + 1.0 / (p[1] * p[1]));
  }
  return 0.0;
}

DiscretizedDelay::DiscretizedDelay(std::vector<double> weights, int offset)
    : weights_(std::move(weights)), offset_(offset) {
  if (offset_ != 0 && offset_ != 1) throw std::invalid_argument("delay offset must be 0 or 1");
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("delay weights must be finite and non-negative");
  if (total() > 1.0 + 1e-12) throw std::invalid_argument("delay weights sum to more than one");
}

double DiscretizedDelay::total() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

DiscretizedDelay discretize(const ContinuousDelay& delay, std::size_t length, int offset) {
  if (length == 0) throw std::invalid_argument("discretization length must be positive");
  if (offset != 0 && offset != 1) throw std::invalid_argument("delay offset must be 0 or 1");
  std::vector<double> weights(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double lag = static_cast<double>(i) + offset;
    // The first weight absorbs all mass below lag + 0.5.
    const double lower = i == 0 ? 0.0 : lag - 0.5;
    weights[i] = std::max(0.0, delay.cdf(lag + 0.5) - delay.cdf(lower));
  }
  return {std::move(weights), offset};
}

DiscretizedDelay rebin(const DiscretizedDelay& fine, int factor, std::size_t length) {
  if (factor < 1 || factor % 2 == 0) throw std::invalid_argument("rebin factor must be odd");
  if (length == 0) throw std::invalid_argument("rebin length must be positive");
  const int half = (factor - 1) / 2;
  const int offset = fine.offset();
  std::vector<double> weights(length, 0.0);
  for (std::ptrdiff_t lag = offset; lag <= fine.max_lag(); ++lag) {
    // Coarse lag whose centred window contains the fine lag; shorter lags fold into the first bin.
    std::ptrdiff_t coarse = (lag + half) / factor;
    if (coarse < offset) coarse = offset;
    const auto slot = static_cast<std::size_t>(coarse - offset);
    if (slot < length) weights[slot] += fine.at(lag);
  }
  return {std::move(weights), offset};
}

DiscretizedDelay discretize_at_step(const ContinuousDelay& delay, std::size_t length, int offset,
                                    TimeStep step) {
  const int factor = step_days(step);
  if (factor == 1) return discretize(delay, length, offset);
  const std::size_t fine_length = factor * (length + 1) + factor;
  return rebin(discretize(delay, fine_length, offset), factor, length);
}

std::size_t support_length(const DiscretizedDelay& delay, double mass) {
  double cumulative = 0.0;
  const auto w = delay.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    cumulative += w[i];
    if (cumulative > mass) return i + 1;
  }
  return w.size();
}

double weighted_incidence_sum(std::span<const double> incidence, std::ptrdiff_t first_time,
                              const DiscretizedDelay& weights, std::ptrdiff_t t) {
  double total = 0.0;
  for (std::size_t i = 0; i < incidence.size(); ++i) {
    const std::ptrdiff_t u = first_time + static_cast<std::ptrdiff_t>(i);
    if (u > t) break;
    total += incidence[i] * weights.at(t - u);
  }
  return total;
}

}  // namespace rtestim::core
