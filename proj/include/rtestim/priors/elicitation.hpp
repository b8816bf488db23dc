#ifndef RTESTIM_PRIORS_ELICITATION_HPP
#define RTESTIM_PRIORS_ELICITATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "rtestim/core/delay.hpp"
#include "rtestim/models/priors.hpp"
#include "rtestim/sampler/diagnostics.hpp"
#include "rtestim/sampler/nuts.hpp"

namespace rtestim::priors {

// ---- detection rate ----

struct DetectionPriorSpec {
  double overall_low = 0.08;
  double overall_high = 0.26;
  double test_quantile = 0.5;

  void validate() const;
};

/**
 * Log-normal prior on rho such that rho * M_q has 2.5% / 97.5% quantiles at
 * the overall detection bounds, where M_q is the `test_quantile` sample
 * quantile of the tests.
 */
models::NormalPrior elicit_rho(std::span<const std::int64_t> tests, const DetectionPriorSpec& spec);

// ---- over-dispersion ----

/// Cubic B-spline basis on [lower, upper] with equally spaced interior knots.
Eigen::MatrixXd bspline_basis(std::span<const double> x, double lower, double upper,
                              std::size_t interior_knots, int degree = 3);

struct SplineFitConfig {
  int basis_degree = 3;
  std::size_t knot_count = 10;
  double difference_penalty = 1.0;  // precision on second differences of the coefficients
  double ridge_penalty = 0.01;      // precision on the coefficients themselves
  double kappa_prior_shape = 0.01;  // gamma prior on the over-dispersion
  double kappa_prior_rate = 0.01;
  double kappa_cap = 1000.0;        // elicited mu and sigma are capped here
  sampler::SamplerConfig sampler{4, 2000, 1000, 1, 0.8, 10, 1, 10, 0.1};
};

/**
 * Negative-binomial regression of counts on a penalized B-spline in time:
 *   log mu_t = log(mean count + 0.5) + B(t) beta
 *   counts_t ~ NegBinom(mu_t, kappa)
 * beta has a Gaussian prior with precision difference_penalty * D2'D2 +
 * ridge_penalty * I; kappa ~ Gamma(shape, rate) on the log scale.
 */
class SplineNegBinomialModel {
public:
  SplineNegBinomialModel(std::span<const std::int64_t> counts, const SplineFitConfig& config);

  std::size_t dimension() const { return static_cast<std::size_t>(basis_.cols()) + 1; }
  double log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;
  Eigen::VectorXd initial_point() const;

private:
  std::vector<double> counts_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd precision_;
  double offset_;
  double kappa_shape_;
  double kappa_rate_;
};

struct SplineFit {
  int basis_degree = 3;
  std::size_t knot_count = 10;
  double ridge_penalty = 0.0;
  std::vector<double> dispersion_posterior;
  sampler::Diagnostics diagnostics;
};

class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(const std::string& what, sampler::Diagnostics diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const sampler::Diagnostics& diagnostics() const { return diagnostics_; }

private:
  sampler::Diagnostics diagnostics_;
};

/// Samples the spline model; throws NonConvergenceError when the fit fails the gate.
SplineFit fit_spline(std::span<const std::int64_t> counts, const SplineFitConfig& config);

inline const std::vector<double> kKappaQuantiles{0.025, 0.25, 0.5, 0.75, 0.975};

/// Quantile of N(mu, sigma) truncated below at zero.
double truncated_normal_quantile(double mu, double sigma, double p);

/**
 * Truncated normal (mu, sigma) minimizing the squared distance between its
 * quantiles and the given target quantiles at `probabilities`, by
 * Nelder-Mead over 0 < mu, sigma < upper.
 */
models::NormalPrior fit_truncated_normal(std::span<const double> target_quantiles,
                                         std::span<const double> probabilities,
                                         double upper = std::numeric_limits<double>::infinity());
double truncated_normal_loss(const models::NormalPrior& prior,
                             std::span<const double> target_quantiles,
                             std::span<const double> probabilities);

struct KappaElicitation {
  models::NormalPrior prior;
  bool capped = false;
  std::vector<double> posterior_quantiles;  // at kKappaQuantiles
  SplineFit fit;
};

KappaElicitation elicit_kappa(std::span<const std::int64_t> counts, const SplineFitConfig& config);

// ---- variant generation times ----

struct VariantMatch {
  core::ContinuousDelay delay;
  double target_mean;
  double target_sd;
  double sample_mean;
  double sample_sd;
  double loss;
};

/**
 * Finds parameters of the base family whose sampled mean is
 * (1 - mean_reduction) * base mean while keeping the base standard deviation.
 * Moments are estimated from `samples` inverse-CDF draws that reuse the same
 * uniforms for every candidate, so the objective is smooth in the parameters.
 */
VariantMatch match_variant_generation(const core::ContinuousDelay& base, double mean_reduction,
                                      std::uint64_t seed = 20220101, std::size_t samples = 100000);

/// JSON fragment {"priors": {"log_rho": ..., "kappa": ...}} for the model spec.
nlohmann::json prior_fragment(const models::NormalPrior* log_rho, const models::NormalPrior* kappa);

}  // namespace rtestim::priors

#endif  // RTESTIM_PRIORS_ELICITATION_HPP
