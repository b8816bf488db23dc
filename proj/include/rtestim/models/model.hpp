#ifndef RTESTIM_MODELS_MODEL_HPP
#define RTESTIM_MODELS_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rtestim/core/series.hpp"

namespace rtestim::models {

/**
 * Common interface of the renewal models.
 *
 * Every unconstrained coordinate is the logarithm of a positive quantity, so
 * the natural-scale value of coordinate i is exp(theta[i]). Coordinates are
 * laid out as [log I (seeding + observed), log R, model scalars...].
 */
class RenewalModel {
public:
  virtual ~RenewalModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t seeding_length() const = 0;
  virtual std::size_t horizon() const = 0;

  virtual double log_density(const Eigen::VectorXd& theta) const = 0;
  virtual double log_density_gradient(const Eigen::VectorXd& theta,
                                      Eigen::VectorXd& gradient) const = 0;

  /// Natural-scale names: I[t] for t = 1-n..T, R[t] for t = 1..T, then scalars.
  virtual std::vector<std::string> parameter_names() const = 0;

  /// Mean of the case emission at each observed time step.
  virtual std::vector<double> expected_cases(const Eigen::VectorXd& theta) const = 0;
  /// Negative-binomial over-dispersion (variance mu + mu^2 / dispersion).
  virtual double case_dispersion(const Eigen::VectorXd& theta) const = 0;

  virtual const core::ObservedSeries& series() const = 0;

  std::size_t incidence_offset() const { return 0; }
  std::size_t rt_offset() const { return seeding_length() + horizon(); }
  std::size_t scalar_offset() const { return seeding_length() + 2 * horizon(); }
};

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_MODEL_HPP
