#ifndef RTESTIM_MODELS_PRIORS_HPP
#define RTESTIM_MODELS_PRIORS_HPP

#include <cstddef>

#include "rtestim/core/delay.hpp"
#include "rtestim/core/series.hpp"

namespace rtestim::models {

/// Location and scale of a normal (or zero-truncated normal) prior.
struct NormalPrior {
  double mu = 0.0;
  double sigma = 1.0;
};

/**
 * Hyperparameters of the test-adjusted gamma renewal model.
 *
 * Defaults are the simulation-study values; the detection (`log_rho`) and
 * over-dispersion (`kappa`) priors are normally replaced by elicited ones.
 */
struct PriorSet {
  NormalPrior log_nu{-2.0, 0.7};
  NormalPrior log_sigma{-0.66, 0.6};
  double lambda_rate = 0.3;  // rate of the exponential hyperprior on the seeding rate
  NormalPrior log_r1{0.0, 0.75};
  NormalPrior log_rho{-11.06, 0.3};
  NormalPrior kappa{59.0, 60.0};  // truncated below at zero
  std::size_t seeding_length = 6;

  void validate() const;
};

/// Hyperparameters of the latent-normal comparison model.
struct NormalModelPriors {
  NormalPrior sigma{0.0, 0.1};  // random-walk step sd, truncated at zero
  double lambda_rate = 0.3;
  NormalPrior log_r1{0.0, 0.2};
  NormalPrior psi{10.0, 2.0};     // truncated at zero
  NormalPrior alpha{0.02, 0.05};  // truncated at zero
  NormalPrior inv_phi{10.0, 5.0}; // truncated at zero
  std::size_t seeding_length = 6;

  void validate() const;
};

struct GammaModelConfig {
  PriorSet priors;
  core::DiscretizedDelay generation;  // offset 1
  core::DiscretizedDelay latent;      // offset 0
  core::ObservedSeries series;
};

struct NormalModelConfig {
  NormalModelPriors priors;
  core::DiscretizedDelay generation;  // offset 1
  core::DiscretizedDelay latent;      // offset 0, lag 0 ignored by the emission
  core::ObservedSeries series;
};

/// Mean of a normal(mu, sigma) truncated below at zero.
double truncated_normal_mean(const NormalPrior& prior);

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_PRIORS_HPP
