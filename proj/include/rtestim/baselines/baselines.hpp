#ifndef RTESTIM_BASELINES_BASELINES_HPP
#define RTESTIM_BASELINES_BASELINES_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rtestim/core/delay.hpp"
#include "rtestim/core/random.hpp"
#include "rtestim/core/series.hpp"

namespace rtestim::baselines {

struct EpiEstimConfig {
  std::size_t window = 1;
  double prior_shape = 1.0;
  double prior_scale = 5.0;
  core::DiscretizedDelay generation;
};

/**
 * Estimate for the window ending at `t_end` (0-based). Windows that start at
 * the first time step, or whose renewal sum vanishes, are reported with
 * `defined == false` and NaN summaries.
 */
struct WindowEstimate {
  std::size_t t_end = 0;
  bool defined = false;
  bool degenerate = false;       // zero point estimate (GLMs)
  double posterior_shape = NAN;  // EpiEstim only
  double posterior_rate = NAN;
  double point_estimate = NAN;
  double std_error = NAN;   // GLMs only
  double dispersion = NAN;  // 1 for the Poisson GLM, estimated for quasi-Poisson
  double median = NAN;
  double lower95 = NAN;
  double upper95 = NAN;
};

/// Lambda_t = sum_{s<t} I_s g_{t-s} using only in-data history (Lambda at index 0 is 0).
std::vector<double> renewal_sums(std::span<const double> incidence,
                                 const core::DiscretizedDelay& generation);

/// Conjugate gamma posterior of a constant R over each sliding window.
std::vector<WindowEstimate> epiestim(std::span<const double> incidence,
                                     const EpiEstimConfig& config);

/**
 * EpiEstim averaged over several generation-time draws: the per-window
 * posterior is the equal-weight mixture of the gamma posteriors, and its
 * quantiles are found by root-finding on the mixture CDF.
 */
std::vector<WindowEstimate> epiestim_uncertain(std::span<const double> incidence,
                                               const EpiEstimConfig& config,
                                               std::span<const core::DiscretizedDelay> generations);

/**
 * Generation-time draws for epiestim_uncertain: each parameter of `base` is
 * multiplied by an independent log-normal factor with mean one and
 * coefficient of variation `cv`, then discretized at `step`.
 */
std::vector<core::DiscretizedDelay> sample_generation_draws(const core::ContinuousDelay& base,
                                                            std::size_t count, double cv,
                                                            std::size_t length, core::TimeStep step,
                                                            core::Engine& engine);

/// Identity-link, no-intercept Poisson regression of I_t on Lambda_t per window.
std::vector<WindowEstimate> glm_poisson(std::span<const double> incidence, std::size_t window,
                                        const core::DiscretizedDelay& generation);

/// Same point estimate; Pearson dispersion and dispersion-scaled standard errors.
std::vector<WindowEstimate> glm_quasipoisson(std::span<const double> incidence,
                                             std::size_t window,
                                             const core::DiscretizedDelay& generation);

std::vector<double> cases_as_incidence(const core::ObservedSeries& series);

/// CSV with header t_end,median,lower95,upper95,dispersion; undefined entries as NA.
void write_estimates_csv(std::ostream& out, const core::ObservedSeries& series,
                         std::span<const WindowEstimate> estimates);

}  // namespace rtestim::baselines

#endif  // RTESTIM_BASELINES_BASELINES_HPP
