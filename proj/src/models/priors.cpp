#include "rtestim/models/priors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rtestim::models {

namespace {

void check_scale(const NormalPrior& prior, const char* name) {
  if (!(prior.sigma > 0.0) || !std::isfinite(prior.sigma) || !std::isfinite(prior.mu))
    throw std::invalid_argument(std::string("prior '") + name + "' needs finite mu and sigma > 0");
}

}  // namespace

void PriorSet::validate() const {
  check_scale(log_nu, "log_nu");
  check_scale(log_sigma, "log_sigma");
  check_scale(log_r1, "log_r1");
  check_scale(log_rho, "log_rho");
  check_scale(kappa, "kappa");
  if (!(lambda_rate > 0.0)) throw std::invalid_argument("lambda_rate must be positive");
  if (seeding_length < 1) throw std::invalid_argument("seeding_length must be at least 1");
}

void NormalModelPriors::validate() const {
  check_scale(sigma, "sigma");
  check_scale(log_r1, "log_r1");
  check_scale(psi, "psi");
  check_scale(alpha, "alpha");
  check_scale(inv_phi, "inv_phi");
  if (!(lambda_rate > 0.0)) throw std::invalid_argument("lambda_rate must be positive");
  if (seeding_length < 1) throw std::invalid_argument("seeding_length must be at least 1");
}

double truncated_normal_mean(const NormalPrior& prior) {
  const boost::math::normal_distribution<double> standard;
  const double a = -prior.mu / prior.sigma;
  const double tail = boost::math::cdf(boost::math::complement(standard, a));
  return prior.mu + prior.sigma * boost::math::pdf(standard, a) / tail;
}

}  // namespace rtestim::models
