#ifndef RTESTIM_MODELS_DENSITIES_HPP
#define RTESTIM_MODELS_DENSITIES_HPP

#include <cstdint>

namespace rtestim::models {

/// Log density of N(mu, sigma^2) at x.
double normal_lpdf(double x, double mu, double sigma);

/// Log density of Gamma(shape, rate) at x > 0.
double gamma_lpdf(double x, double shape, double rate);

/**
 * Negative-binomial log pmf in mean / over-dispersion form:
 * variance = mean + mean^2 / dispersion.
 */
double neg_binomial_lpmf(std::int64_t count, double mean, double dispersion);

struct NegBinomialTerm {
  double value;
  double d_mean;        // derivative with respect to the mean
  double d_dispersion;  // derivative with respect to the dispersion
};

NegBinomialTerm neg_binomial_lpmf_with_derivatives(std::int64_t count, double mean,
                                                   double dispersion);

double poisson_lpmf(std::int64_t count, double mean);

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_DENSITIES_HPP
