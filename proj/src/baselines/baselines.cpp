#include "rtestim/baselines/baselines.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rtestim/core/format.hpp"

namespace rtestim::baselines {

namespace {

constexpr double kZ975 = 1.959963984540054;

void check_window(std::size_t window, std::size_t minimum) {
  if (window < minimum)
    throw std::invalid_argument("window must be at least " + std::to_string(minimum));
}

struct WindowSums {
  double incidence = 0.0;
  double renewal = 0.0;
};

// Windows start at index >= 1 so that every Lambda has some in-data history.
bool window_available(std::size_t t_end, std::size_t window) { return t_end >= window; }

WindowSums sums(std::span<const double> incidence, std::span<const double> lambda,
                std::size_t t_end, std::size_t window) {
  WindowSums s;
  for (std::size_t t = t_end + 1 - window; t <= t_end; ++t) {
    s.incidence += incidence[t];
    s.renewal += lambda[t];
  }
  return s;
}

struct GammaPosterior {
  bool defined;
  double shape;
  double rate;
};

GammaPosterior window_posterior(const EpiEstimConfig& config, const WindowSums& s) {
  if (!(s.renewal > 0.0)) return {false, NAN, NAN};
  return {true, config.prior_shape + s.incidence, 1.0 / config.prior_scale + s.renewal};
}

}  // namespace

std::vector<double> renewal_sums(std::span<const double> incidence,
                                 const core::DiscretizedDelay& generation) {
  std::vector<double> lambda(incidence.size(), 0.0);
  for (std::size_t t = 0; t < incidence.size(); ++t)
    lambda[t] = core::weighted_incidence_sum(incidence.first(t), 0, generation,
                                             static_cast<std::ptrdiff_t>(t));
  return lambda;
}

std::vector<WindowEstimate> epiestim(std::span<const double> incidence,
                                     const EpiEstimConfig& config) {
  check_window(config.window, 1);
  if (!(config.prior_shape > 0.0 && config.prior_scale > 0.0))
    throw std::invalid_argument("EpiEstim prior shape and scale must be positive");
  const auto lambda = renewal_sums(incidence, config.generation);
  std::vector<WindowEstimate> out(incidence.size());
  for (std::size_t t = 0; t < incidence.size(); ++t) {
    out[t].t_end = t;
    if (!window_available(t, config.window)) continue;
    const auto post = window_posterior(config, sums(incidence, lambda, t, config.window));
    if (!post.defined) continue;
    auto& e = out[t];
    e.defined = true;
    e.posterior_shape = post.shape;
    e.posterior_rate = post.rate;
    const boost::math::gamma_distribution<double> law(post.shape, 1.0 / post.rate);
    e.point_estimate = post.shape / post.rate;
    e.median = boost::math::quantile(law, 0.5);
    e.lower95 = boost::math::quantile(law, 0.025);
    e.upper95 = boost::math::quantile(law, 0.975);
  }
  return out;
}

std::vector<WindowEstimate> epiestim_uncertain(std::span<const double> incidence,
                                               const EpiEstimConfig& config,
                                               std::span<const core::DiscretizedDelay> generations) {
  check_window(config.window, 1);
  if (generations.empty()) throw std::invalid_argument("need at least one generation-time draw");
  std::vector<std::vector<double>> lambdas;
  for (const auto& g : generations) lambdas.push_back(renewal_sums(incidence, g));

  std::vector<WindowEstimate> out(incidence.size());
  for (std::size_t t = 0; t < incidence.size(); ++t) {
    out[t].t_end = t;
    if (!window_available(t, config.window)) continue;
    std::vector<boost::math::gamma_distribution<double>> components;
    double mean = 0.0;
    for (const auto& lambda : lambdas) {
      const auto post = window_posterior(config, sums(incidence, lambda, t, config.window));
      if (!post.defined) continue;
      components.emplace_back(post.shape, 1.0 / post.rate);
      mean += post.shape / post.rate;
    }
    if (components.empty()) continue;
    const double k = static_cast<double>(components.size());
    auto mixture_quantile = [&](double p) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (const auto& c : components) {
        lo = std::min(lo, boost::math::quantile(c, p));
        hi = std::max(hi, boost::math::quantile(c, p));
      }
      if (hi - lo <= 1e-14 * hi) return lo;
      auto f = [&](double x) {
        double cdf = 0.0;
        for (const auto& c : components) cdf += boost::math::cdf(c, x);
        return cdf / k - p;
      };
      boost::math::tools::eps_tolerance<double> tol(50);
      std::uintmax_t iterations = 200;
      const auto bracket = boost::math::tools::toms748_solve(f, lo, hi, tol, iterations);
      return 0.5 * (bracket.first + bracket.second);
    };
    auto& e = out[t];
    e.defined = true;
    e.point_estimate = mean / k;
    e.median = mixture_quantile(0.5);
    e.lower95 = mixture_quantile(0.025);
    e.upper95 = mixture_quantile(0.975);
  }
  return out;
}

std::vector<core::DiscretizedDelay> sample_generation_draws(const core::ContinuousDelay& base,
                                                            std::size_t count, double cv,
                                                            std::size_t length, core::TimeStep step,
                                                            core::Engine& engine) {
  if (!(cv >= 0.0)) throw std::invalid_argument("coefficient of variation must be non-negative");
  const double sdlog = std::sqrt(std::log1p(cv * cv));
  std::normal_distribution<double> normal(-0.5 * sdlog * sdlog, sdlog);
  std::vector<core::DiscretizedDelay> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> params(base.parameters().begin(), base.parameters().end());
    for (std::size_t j = 0; j < params.size(); ++j) {
      // The log-normal location parameter is shifted rather than scaled.
      if (base.family() == core::DelayFamily::lognormal && j == 0)
        params[j] += normal(engine);
      else
        params[j] *= std::exp(normal(engine));
    }
    out.push_back(core::discretize_at_step(core::ContinuousDelay(base.family(), params), length, 1,
                                           step));
  }
  return out;
}

std::vector<WindowEstimate> glm_poisson(std::span<const double> incidence, std::size_t window,
                                        const core::DiscretizedDelay& generation) {
  check_window(window, 1);
  const auto lambda = renewal_sums(incidence, generation);
  std::vector<WindowEstimate> out(incidence.size());
  for (std::size_t t = 0; t < incidence.size(); ++t) {
    out[t].t_end = t;
    if (!window_available(t, window)) continue;
    const auto s = sums(incidence, lambda, t, window);
    if (!(s.renewal > 0.0)) continue;
    auto& e = out[t];
    e.defined = true;
    e.point_estimate = s.incidence / s.renewal;
    e.std_error = std::sqrt(e.point_estimate / s.renewal);
    e.degenerate = e.point_estimate == 0.0;
    e.dispersion = 1.0;
    e.median = e.point_estimate;
    e.lower95 = e.point_estimate - kZ975 * e.std_error;
    e.upper95 = e.point_estimate + kZ975 * e.std_error;
  }
  return out;
}

std::vector<WindowEstimate> glm_quasipoisson(std::span<const double> incidence,
                                             std::size_t window,
                                             const core::DiscretizedDelay& generation) {
  check_window(window, 2);
  const auto lambda = renewal_sums(incidence, generation);
  auto out = glm_poisson(incidence, window, generation);
  for (auto& e : out) {
    if (!e.defined) continue;
    if (e.degenerate) {
      // Pearson dispersion is undefined when every fitted value is zero.
      const std::size_t t_end = e.t_end;
      e = WindowEstimate{};
      e.t_end = t_end;
      continue;
    }
    const double beta = e.point_estimate;
    double pearson = 0.0;
    for (std::size_t t = e.t_end + 1 - window; t <= e.t_end; ++t) {
      const double fitted = beta * lambda[t];
      if (fitted > 0.0) pearson += (incidence[t] - fitted) * (incidence[t] - fitted) / fitted;
    }
    e.dispersion = pearson / static_cast<double>(window - 1);
    e.std_error *= std::sqrt(e.dispersion);
    e.lower95 = beta - kZ975 * e.std_error;
    e.upper95 = beta + kZ975 * e.std_error;
  }
  return out;
}

std::vector<double> cases_as_incidence(const core::ObservedSeries& series) {
  std::vector<double> out;
  for (auto c : series.cases()) out.push_back(static_cast<double>(c));
  return out;
}

void write_estimates_csv(std::ostream& out, const core::ObservedSeries& series,
                         std::span<const WindowEstimate> estimates) {
  out << "t_end,median,lower95,upper95,dispersion\n";
  for (const auto& e : estimates) {
    out << series.label(e.t_end) << ',' << core::format_number(e.median) << ','
        << core::format_number(e.lower95) << ',' << core::format_number(e.upper95) << ','
        << core::format_number(e.dispersion) << '\n';
  }
}

}  // namespace rtestim::baselines
