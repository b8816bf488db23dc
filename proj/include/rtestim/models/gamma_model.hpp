#ifndef RTESTIM_MODELS_GAMMA_MODEL_HPP
#define RTESTIM_MODELS_GAMMA_MODEL_HPP

#include <span>
#include <vector>

#include "rtestim/models/model.hpp"
#include "rtestim/models/priors.hpp"

namespace rtestim::models {

/// One point of the gamma model's parameter space, on the log scale.
struct ParameterState {
  std::vector<double> log_incidence;  // times 1-n..T
  std::vector<double> log_rt;         // times 1..T
  double log_nu = 0.0;
  double log_sigma = 0.0;
  double log_rho = 0.0;
  double log_lambda = 0.0;
  double log_kappa = 0.0;
};

/**
 * Test-adjusted renewal model with a latent gamma incidence process.
 *
 * Joint density, in log-coordinates with Jacobians:
 *   lambda ~ Exp(eta);  I_t ~ Exp(lambda) for the n seeding steps
 *   I_t | past ~ Gamma(shape R_t * Lambda_t * nu, rate nu),  Lambda_t = sum_u g_{t-u} I_u
 *   log R_1 ~ N(mu_r1, sigma_r1^2),  log R_t ~ N(log R_{t-1}, sigma^2 / (T - 1))
 *   O_t ~ NegBinom(mean rho * M_t * D_t, kappa),  D_t = sum_{j <= t} d_{t-j} I_j
 *   log nu, log sigma, log rho normal;  kappa zero-truncated normal
 * The truncation constant of the kappa prior is dropped.
 */
class GammaModel final : public RenewalModel {
public:
  explicit GammaModel(GammaModelConfig config);

  enum Scalar : std::size_t { nu = 0, sigma, rho, lambda, kappa, scalar_count };

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

  /// Renewal means R_t * Lambda_t (the conditional mean of I_t).
  std::vector<double> renewal_means(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd pack(const ParameterState& state) const;
  ParameterState unpack(const Eigen::VectorXd& theta) const;

  const GammaModelConfig& config() const { return config_; }

private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) const;

  GammaModelConfig config_;
  std::size_t n_;
  std::size_t T_;
};

/**
 * Starting point for real-data fits: log R from EpiEstim posterior medians
 * (non-finite or non-positive entries forward-filled, leading gaps
 * back-filled), I_t = detection_median * O_t floored at 1 (seeding steps
 * take the value of I_1), every other parameter at its prior mean.
 */
ParameterState initialize_real_data(const GammaModelConfig& config,
                                    std::span<const double> epiestim_medians,
                                    double detection_prior_median);

/// Fills gaps in a median series as described for initialize_real_data.
std::vector<double> fill_missing_medians(std::span<const double> medians);

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_GAMMA_MODEL_HPP
