#include "rtestim/models/densities.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>

namespace rtestim::models {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

double normal_lpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * z * z;
}

double gamma_lpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double neg_binomial_lpmf(std::int64_t count, double mean, double dispersion) {
  const double y = static_cast<double>(count);
  double value = std::lgamma(y + dispersion) - std::lgamma(dispersion) - std::lgamma(y + 1.0) -
                 dispersion * std::log1p(mean / dispersion);
  if (count > 0) value += y * (std::log(mean) - std::log(dispersion + mean));
  return value;
}

NegBinomialTerm neg_binomial_lpmf_with_derivatives(std::int64_t count, double mean,
                                                   double dispersion) {
  const double y = static_cast<double>(count);
  const double total = dispersion + mean;
  NegBinomialTerm term{};
  term.value = neg_binomial_lpmf(count, mean, dispersion);
  term.d_mean = y / mean - (dispersion + y) / total;
  const double digamma_diff =
      count > 0 ? boost::math::digamma(y + dispersion) - boost::math::digamma(dispersion) : 0.0;
  term.d_dispersion = digamma_diff - std::log1p(mean / dispersion) + (mean - y) / total;
  return term;
}

double poisson_lpmf(std::int64_t count, double mean) {
  const double y = static_cast<double>(count);
  return y * std::log(mean) - mean - std::lgamma(y + 1.0);
}

}  // namespace rtestim::models
