#include "rtestim/models/normal_model.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "rtestim/models/densities.hpp"
#include "rtestim/models/gamma_model.hpp"

namespace rtestim::models {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

NormalModel::NormalModel(NormalModelConfig config)
    : config_(std::move(config)),
      n_(config_.priors.seeding_length),
      T_(config_.series.size()) {
  config_.priors.validate();
  if (T_ < 2) throw std::invalid_argument("the renewal model needs at least two observed time steps");
  if (config_.generation.offset() != 1)
    throw std::invalid_argument("generation-time weights must start at lag 1");
  if (config_.latent.offset() != 0)
    throw std::invalid_argument("latent-period weights must start at lag 0");
}

double NormalModel::log_density(const Eigen::VectorXd& theta) const {
  return evaluate(theta, nullptr);
}

double NormalModel::log_density_gradient(const Eigen::VectorXd& theta,
                                         Eigen::VectorXd& gradient) const {
  gradient.setZero(static_cast<Eigen::Index>(dimension()));
  return evaluate(theta, &gradient);
}

double NormalModel::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(theta.size()) != dimension())
    throw std::invalid_argument("parameter vector has the wrong dimension");
  const auto& pr = config_.priors;
  const auto& g = config_.generation;
  const auto& d = config_.latent;
  const auto cases = config_.series.cases();
  const std::size_t N = n_ + T_;
  const std::size_t r0 = N;
  const std::size_t s0 = N + T_;

  std::vector<double> incidence(N);
  for (std::size_t j = 0; j < N; ++j) incidence[j] = std::exp(theta[j]);
  const double log_sigma = theta[s0 + sigma];
  const double log_psi = theta[s0 + psi];
  const double log_alpha = theta[s0 + alpha];
  const double log_inv_phi = theta[s0 + inv_phi];
  const double log_lambda = theta[s0 + lambda];
  const double sigma_v = std::exp(log_sigma);
  const double psi_v = std::exp(log_psi);
  const double alpha_v = std::exp(log_alpha);
  const double inv_phi_v = std::exp(log_inv_phi);
  const double phi_v = 1.0 / inv_phi_v;
  const double lambda_v = std::exp(log_lambda);

  double lp = 0.0;

  lp += std::log(pr.lambda_rate) - pr.lambda_rate * lambda_v + log_lambda;
  if (grad) (*grad)[s0 + lambda] += 1.0 - pr.lambda_rate * lambda_v;
  for (std::size_t j = 0; j < n_; ++j) {
    lp += log_lambda - lambda_v * incidence[j] + theta[j];
    if (grad) {
      (*grad)[s0 + lambda] += 1.0 - lambda_v * incidence[j];
      (*grad)[j] += 1.0 - lambda_v * incidence[j];
    }
  }

  // Latent normal process with sd proportional to the mean.
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double renewal = 0.0;
    for (std::size_t j = 0; j < i; ++j) renewal += g.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    if (!(renewal > 0.0)) return -std::numeric_limits<double>::infinity();
    const double rt = std::exp(theta[r0 + t]);
    const double mean = rt * renewal;
    const double z = (incidence[i] / mean - 1.0) / psi_v;
    lp += -kHalfLog2Pi - log_psi - std::log(mean) - 0.5 * z * z + theta[i];
    if (grad) {
      const double d_mean = -1.0 / mean + z * incidence[i] / (psi_v * mean * mean);
      (*grad)[i] += 1.0 - z * incidence[i] / (psi_v * mean);
      (*grad)[s0 + psi] += -1.0 + z * z;
      (*grad)[r0 + t] += d_mean * mean;
      const double coef = d_mean * rt;
      for (std::size_t j = 0; j < i; ++j)
        (*grad)[j] += coef * g.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    }
  }

  // Random walk with step sd sigma.
  lp += normal_lpdf(theta[r0], pr.log_r1.mu, pr.log_r1.sigma);
  if (grad) (*grad)[r0] -= (theta[r0] - pr.log_r1.mu) / (pr.log_r1.sigma * pr.log_r1.sigma);
  const double step_var = sigma_v * sigma_v;
  for (std::size_t t = 1; t < T_; ++t) {
    const double delta = theta[r0 + t] - theta[r0 + t - 1];
    lp += -kHalfLog2Pi - log_sigma - 0.5 * delta * delta / step_var;
    if (grad) {
      (*grad)[r0 + t] -= delta / step_var;
      (*grad)[r0 + t - 1] += delta / step_var;
      (*grad)[s0 + sigma] += -1.0 + delta * delta / step_var;
    }
  }

  // Emission without same-step contribution.
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double delayed = 0.0;
    for (std::size_t j = 0; j < i; ++j) delayed += d.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    const double mean = alpha_v * delayed;
    const auto term = neg_binomial_lpmf_with_derivatives(cases[t], mean, phi_v);
    lp += term.value;
    if (grad) {
      (*grad)[s0 + alpha] += term.d_mean * mean;
      (*grad)[s0 + inv_phi] -= term.d_dispersion * phi_v;
      const double coef = term.d_mean * alpha_v;
      for (std::size_t j = 0; j < i; ++j)
        (*grad)[j] += coef * d.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    }
  }

  // Zero-truncated normal priors on natural-scale values, with log Jacobians.
  auto positive_prior = [&](double value, double log_value, const NormalPrior& p, std::size_t k) {
    lp += normal_lpdf(value, p.mu, p.sigma) + log_value;
    if (grad) (*grad)[s0 + k] += 1.0 - (value - p.mu) / (p.sigma * p.sigma) * value;
  };
  positive_prior(sigma_v, log_sigma, pr.sigma, sigma);
  positive_prior(psi_v, log_psi, pr.psi, psi);
  positive_prior(alpha_v, log_alpha, pr.alpha, alpha);
  positive_prior(inv_phi_v, log_inv_phi, pr.inv_phi, inv_phi);
  return lp;
}

std::vector<std::string> NormalModel::parameter_names() const {
  std::vector<std::string> names;
  const auto first = 1 - static_cast<std::ptrdiff_t>(n_);
  for (std::size_t j = 0; j < n_ + T_; ++j)
    names.push_back("I[" + std::to_string(first + static_cast<std::ptrdiff_t>(j)) + "]");
  for (std::size_t t = 0; t < T_; ++t) names.push_back("R[" + std::to_string(t + 1) + "]");
  for (const char* s : {"sigma", "psi", "alpha", "inv_phi", "lambda"}) names.emplace_back(s);
  return names;
}

std::vector<double> NormalModel::expected_cases(const Eigen::VectorXd& theta) const {
  const double alpha_v = std::exp(theta[n_ + 2 * T_ + alpha]);
  std::vector<double> out(T_);
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double delayed = 0.0;
    for (std::size_t j = 0; j < i; ++j)
      delayed += config_.latent.at(static_cast<std::ptrdiff_t>(i - j)) * std::exp(theta[j]);
    out[t] = alpha_v * delayed;
  }
  return out;
}

double NormalModel::case_dispersion(const Eigen::VectorXd& theta) const {
  return std::exp(-theta[n_ + 2 * T_ + inv_phi]);
}

Eigen::VectorXd NormalModel::pack(const NormalParameterState& state) const {
  if (state.log_incidence.size() != n_ + T_ || state.log_rt.size() != T_)
    throw std::invalid_argument("parameter state dimensions do not match the model");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dimension()));
  std::size_t k = 0;
  for (double v : state.log_incidence) theta[k++] = v;
  for (double v : state.log_rt) theta[k++] = v;
  theta[k + sigma] = state.log_sigma;
  theta[k + psi] = state.log_psi;
  theta[k + alpha] = state.log_alpha;
  theta[k + inv_phi] = state.log_inv_phi;
  theta[k + lambda] = state.log_lambda;
  return theta;
}

NormalParameterState NormalModel::unpack(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dimension())
    throw std::invalid_argument("parameter vector has the wrong dimension");
  NormalParameterState state;
  state.log_incidence.assign(theta.data(), theta.data() + n_ + T_);
  state.log_rt.assign(theta.data() + n_ + T_, theta.data() + n_ + 2 * T_);
  const std::size_t k = n_ + 2 * T_;
  state.log_sigma = theta[k + sigma];
  state.log_psi = theta[k + psi];
  state.log_alpha = theta[k + alpha];
  state.log_inv_phi = theta[k + inv_phi];
  state.log_lambda = theta[k + lambda];
  return state;
}

NormalParameterState initialize_normal_model(const NormalModelConfig& config,
                                             std::span<const double> epiestim_medians,
                                             double detection_prior_median) {
  if (!(detection_prior_median > 0.0))
    throw std::invalid_argument("detection prior median must be positive");
  const std::size_t T = config.series.size();
  const std::size_t n = config.priors.seeding_length;
  if (epiestim_medians.size() != T)
    throw std::invalid_argument("EpiEstim medians must have one entry per observed time step");
  const auto& pr = config.priors;
  NormalParameterState state;
  for (double m : fill_missing_medians(epiestim_medians)) state.log_rt.push_back(std::log(m));
  std::vector<double> observed(T);
  for (std::size_t t = 0; t < T; ++t)
    observed[t] =
        std::max(1.0, detection_prior_median * static_cast<double>(config.series.cases()[t]));
  state.log_incidence.assign(n, std::log(observed.front()));
  for (double v : observed) state.log_incidence.push_back(std::log(v));
  state.log_sigma = std::log(truncated_normal_mean(pr.sigma));
  state.log_psi = std::log(truncated_normal_mean(pr.psi));
  state.log_alpha = std::log(truncated_normal_mean(pr.alpha));
  state.log_inv_phi = std::log(truncated_normal_mean(pr.inv_phi));
  state.log_lambda = std::log(1.0 / pr.lambda_rate);
  return state;
}

}  // namespace rtestim::models
