#ifndef RTESTIM_MODELS_NORMAL_MODEL_HPP
#define RTESTIM_MODELS_NORMAL_MODEL_HPP

#include <span>
#include <vector>

#include "rtestim/models/model.hpp"
#include "rtestim/models/priors.hpp"

namespace rtestim::models {

struct NormalParameterState {
  std::vector<double> log_incidence;  // times 1-n..T
  std::vector<double> log_rt;
  double log_sigma = 0.0;
  double log_psi = 0.0;
  double log_alpha = 0.0;
  double log_inv_phi = 0.0;
  double log_lambda = 0.0;
};

/**
 * Latent-normal comparison model that ignores test volume.
 *
 *   I_t | past ~ N(m_t, (psi * m_t)^2),  m_t = R_t * sum_{s<t} g_{t-s} I_s
 *   log R_t ~ N(log R_{t-1}, sigma^2)
 *   O_t ~ NegBinom(alpha * sum_{s<t} d_{t-s} I_s, phi)
 * with zero-truncated normal priors on sigma, psi, alpha and 1/phi. Incidence
 * is still sampled on the log scale; the normal density is evaluated at the
 * natural-scale value.
 */
class NormalModel final : public RenewalModel {
public:
  explicit NormalModel(NormalModelConfig config);

  enum Scalar : std::size_t { sigma = 0, psi, alpha, inv_phi, lambda, scalar_count };

  std::size_t dimension() const override { return n_ + 2 * T_ + scalar_count; }
  std::size_t seeding_length() const override { return n_; }
  std::size_t horizon() const override { return T_; }

  double log_density(const Eigen::VectorXd& theta) const override;
  double log_density_gradient(const Eigen::VectorXd& theta,
                              Eigen::VectorXd& gradient) const override;

  std::vector<std::string> parameter_names() const override;
  std::vector<double> expected_cases(const Eigen::VectorXd& theta) const override;
  double case_dispersion(const Eigen::VectorXd& theta) const override;
  const core::ObservedSeries& series() const override { return config_.series; }

  Eigen::VectorXd pack(const NormalParameterState& state) const;
  NormalParameterState unpack(const Eigen::VectorXd& theta) const;

  const NormalModelConfig& config() const { return config_; }

private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) const;

  NormalModelConfig config_;
  std::size_t n_;
  std::size_t T_;
};

/// Real-data style starting point for the normal model (priors at their means).
NormalParameterState initialize_normal_model(const NormalModelConfig& config,
                                             std::span<const double> epiestim_medians,
                                             double detection_prior_median);

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_NORMAL_MODEL_HPP
