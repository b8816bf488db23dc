#include "rtestim/models/gamma_model.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rtestim/models/densities.hpp"

namespace rtestim::models {

namespace {

// log(s) - digamma(s); the asymptotic series is accurate to double precision past s = 10.
double log_minus_digamma(double s) {
  if (s < 10.0) return std::log(s) - boost::math::digamma(s);
  const double r = 1.0 / (s * s);
  return 0.5 / s + r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r / 132))));
}

void check_config(const GammaModelConfig& config) {
  config.priors.validate();
  if (config.series.size() < 2)
    throw std::invalid_argument("the renewal model needs at least two observed time steps");
  if (config.generation.offset() != 1)
    throw std::invalid_argument("generation-time weights must start at lag 1");
  if (config.latent.offset() != 0)
    throw std::invalid_argument("latent-period weights must start at lag 0");
}

}  // namespace

GammaModel::GammaModel(GammaModelConfig config)
    : config_(std::move(config)),
      n_(config_.priors.seeding_length),
      T_(config_.series.size()) {
  check_config(config_);
}

double GammaModel::log_density(const Eigen::VectorXd& theta) const {
  return evaluate(theta, nullptr);
}

double GammaModel::log_density_gradient(const Eigen::VectorXd& theta,
                                        Eigen::VectorXd& gradient) const {
  gradient.setZero(static_cast<Eigen::Index>(dimension()));
  return evaluate(theta, &gradient);
}

double GammaModel::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(theta.size()) != dimension())
    throw std::invalid_argument("parameter vector has the wrong dimension");
  const auto& pr = config_.priors;
  const auto& g = config_.generation;
  const auto& d = config_.latent;
  const auto cases = config_.series.cases();
  const auto tests = config_.series.tests();
  const std::size_t N = n_ + T_;
  const std::size_t r0 = N;
  const std::size_t s0 = N + T_;

  std::vector<double> incidence(N);
  for (std::size_t j = 0; j < N; ++j) incidence[j] = std::exp(theta[j]);

  const double log_nu = theta[s0 + nu];
  const double log_sigma = theta[s0 + sigma];
  const double log_rho = theta[s0 + rho];
  const double log_lambda = theta[s0 + lambda];
  const double log_kappa = theta[s0 + kappa];
  const double nu_v = std::exp(log_nu);
  const double rho_v = std::exp(log_rho);
  const double lambda_v = std::exp(log_lambda);
  const double kappa_v = std::exp(log_kappa);

  double lp = 0.0;

  // Seeding hierarchy, with Jacobians for log lambda and log I.
  lp += std::log(pr.lambda_rate) - pr.lambda_rate * lambda_v + log_lambda;
  if (grad) (*grad)[s0 + lambda] += 1.0 - pr.lambda_rate * lambda_v;
  for (std::size_t j = 0; j < n_; ++j) {
    lp += log_lambda - lambda_v * incidence[j] + theta[j];
    if (grad) {
      (*grad)[s0 + lambda] += 1.0 - lambda_v * incidence[j];
      (*grad)[j] += 1.0 - lambda_v * incidence[j];
    }
  }

  // Latent gamma process. With the log-I Jacobian the term collapses to
  // shape * (log nu + log I) - lgamma(shape) - nu * I.
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double renewal = 0.0;
    for (std::size_t j = 0; j < i; ++j) renewal += g.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    // Underflowed incidence leaves no support; report zero density to the sampler.
    if (!(renewal > 0.0)) return -std::numeric_limits<double>::infinity();
    const double rt = std::exp(theta[r0 + t]);
    const double shape = rt * renewal * nu_v;
    if (!(shape > 0.0) || !std::isfinite(shape)) return -std::numeric_limits<double>::infinity();
    lp += shape * (log_nu + theta[i]) - std::lgamma(shape) - nu_v * incidence[i];
    if (grad) {
      // With u = log I - log(R Lambda): d/d(shape) = u + log_minus_digamma(shape)
      // and nu I = shape e^u. Written this way nothing of size log I cancels
      // when the shape is huge, and the nu derivative keeps its second-order
      // form -shape (e^u - 1 - u).
      const double u = theta[i] - theta[r0 + t] - std::log(renewal);
      const double lmd = log_minus_digamma(shape);
      const double d_shape = u + lmd;
      const double direct = -shape * std::expm1(u);
      (*grad)[i] += direct;
      (*grad)[s0 + nu] += shape * (lmd - (std::expm1(u) - u));
      (*grad)[r0 + t] += d_shape * shape;
      const double coef = d_shape * rt * nu_v;
      for (std::size_t j = 0; j < i; ++j)
        (*grad)[j] += coef * g.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    }
  }

  // Random walk on log R.
  lp += normal_lpdf(theta[r0], pr.log_r1.mu, pr.log_r1.sigma);
  if (grad) (*grad)[r0] += -(theta[r0] - pr.log_r1.mu) / (pr.log_r1.sigma * pr.log_r1.sigma);
  {
    const double steps = static_cast<double>(T_ - 1);
    const double step_var = std::exp(2.0 * log_sigma) / steps;
    const double log_step_sd = log_sigma - 0.5 * std::log(steps);
    for (std::size_t t = 1; t < T_; ++t) {
      const double delta = theta[r0 + t] - theta[r0 + t - 1];
      lp += -0.91893853320467274178 - log_step_sd - 0.5 * delta * delta / step_var;
      if (grad) {
        (*grad)[r0 + t] -= delta / step_var;
        (*grad)[r0 + t - 1] += delta / step_var;
        (*grad)[s0 + sigma] += -1.0 + delta * delta / step_var;
      }
    }
  }

  // Test-adjusted negative-binomial emission.
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double delayed = 0.0;
    for (std::size_t j = 0; j <= i; ++j) delayed += d.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    const double scale = rho_v * static_cast<double>(tests[t]);
    const double mean = scale * delayed;
    const auto term = neg_binomial_lpmf_with_derivatives(cases[t], mean, kappa_v);
    lp += term.value;
    if (grad) {
      (*grad)[s0 + rho] += term.d_mean * mean;
      (*grad)[s0 + kappa] += term.d_dispersion * kappa_v;
      const double coef = term.d_mean * scale;
      for (std::size_t j = 0; j <= i; ++j)
        (*grad)[j] += coef * d.at(static_cast<std::ptrdiff_t>(i - j)) * incidence[j];
    }
  }

  // Hyperpriors. Log-normal priors are normal on the sampled coordinate.
  lp += normal_lpdf(log_nu, pr.log_nu.mu, pr.log_nu.sigma);
  lp += normal_lpdf(log_sigma, pr.log_sigma.mu, pr.log_sigma.sigma);
  lp += normal_lpdf(log_rho, pr.log_rho.mu, pr.log_rho.sigma);
  lp += normal_lpdf(kappa_v, pr.kappa.mu, pr.kappa.sigma) + log_kappa;
  if (grad) {
    (*grad)[s0 + nu] -= (log_nu - pr.log_nu.mu) / (pr.log_nu.sigma * pr.log_nu.sigma);
    (*grad)[s0 + sigma] -= (log_sigma - pr.log_sigma.mu) / (pr.log_sigma.sigma * pr.log_sigma.sigma);
    (*grad)[s0 + rho] -= (log_rho - pr.log_rho.mu) / (pr.log_rho.sigma * pr.log_rho.sigma);
    (*grad)[s0 + kappa] +=
        1.0 - (kappa_v - pr.kappa.mu) / (pr.kappa.sigma * pr.kappa.sigma) * kappa_v;
  }
  return lp;
}

std::vector<std::string> GammaModel::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(dimension());
  const auto first = 1 - static_cast<std::ptrdiff_t>(n_);
  for (std::size_t j = 0; j < n_ + T_; ++j)
    names.push_back("I[" + std::to_string(first + static_cast<std::ptrdiff_t>(j)) + "]");
  for (std::size_t t = 0; t < T_; ++t) names.push_back("R[" + std::to_string(t + 1) + "]");
  for (const char* s : {"nu", "sigma", "rho", "lambda", "kappa"}) names.emplace_back(s);
  return names;
}

std::vector<double> GammaModel::expected_cases(const Eigen::VectorXd& theta) const {
  const std::size_t N = n_ + T_;
  const double rho_v = std::exp(theta[N + T_ + rho]);
  std::vector<double> out(T_);
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double delayed = 0.0;
    for (std::size_t j = 0; j <= i; ++j)
      delayed += config_.latent.at(static_cast<std::ptrdiff_t>(i - j)) * std::exp(theta[j]);
    out[t] = rho_v * static_cast<double>(config_.series.tests()[t]) * delayed;
  }
  return out;
}

double GammaModel::case_dispersion(const Eigen::VectorXd& theta) const {
  return std::exp(theta[n_ + 2 * T_ + kappa]);
}

std::vector<double> GammaModel::renewal_means(const Eigen::VectorXd& theta) const {
  std::vector<double> out(T_);
  for (std::size_t t = 0; t < T_; ++t) {
    const std::size_t i = n_ + t;
    double renewal = 0.0;
    for (std::size_t j = 0; j < i; ++j)
      renewal += config_.generation.at(static_cast<std::ptrdiff_t>(i - j)) * std::exp(theta[j]);
    out[t] = std::exp(theta[n_ + T_ + t]) * renewal;
  }
  return out;
}

Eigen::VectorXd GammaModel::pack(const ParameterState& state) const {
  if (state.log_incidence.size() != n_ + T_ || state.log_rt.size() != T_)
    throw std::invalid_argument("parameter state dimensions do not match the model");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dimension()));
  std::size_t k = 0;
  for (double v : state.log_incidence) theta[k++] = v;
  for (double v : state.log_rt) theta[k++] = v;
  theta[k + nu] = state.log_nu;
  theta[k + sigma] = state.log_sigma;
  theta[k + rho] = state.log_rho;
  theta[k + lambda] = state.log_lambda;
  theta[k + kappa] = state.log_kappa;
  return theta;
}

ParameterState GammaModel::unpack(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dimension())
    throw std::invalid_argument("parameter vector has the wrong dimension");
  ParameterState state;
  state.log_incidence.assign(theta.data(), theta.data() + n_ + T_);
  state.log_rt.assign(theta.data() + n_ + T_, theta.data() + n_ + 2 * T_);
  const std::size_t k = n_ + 2 * T_;
  state.log_nu = theta[k + nu];
  state.log_sigma = theta[k + sigma];
  state.log_rho = theta[k + rho];
  state.log_lambda = theta[k + lambda];
  state.log_kappa = theta[k + kappa];
  return state;
}

std::vector<double> fill_missing_medians(std::span<const double> medians) {
  std::vector<double> out(medians.begin(), medians.end());
  auto usable = [](double v) { return std::isfinite(v) && v > 0.0; };
  double last = 0.0;
  bool seen = false;
  for (double& v : out) {
    if (usable(v)) {
      last = v;
      seen = true;
    } else if (seen) {
      v = last;
    }
  }
  if (!seen) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  double first = 1.0;
  for (double v : out)
    if (usable(v)) {
      first = v;
      break;
    }
  for (double& v : out) {
    if (usable(v)) break;
    v = first;
  }
  return out;
}

ParameterState initialize_real_data(const GammaModelConfig& config,
                                    std::span<const double> epiestim_medians,
                                    double detection_prior_median) {
  if (!(detection_prior_median > 0.0))
    throw std::invalid_argument("detection prior median must be positive");
  const std::size_t T = config.series.size();
  const std::size_t n = config.priors.seeding_length;
  if (epiestim_medians.size() != T)
    throw std::invalid_argument("EpiEstim medians must have one entry per observed time step");
  const auto& pr = config.priors;

  ParameterState state;
  for (double m : fill_missing_medians(epiestim_medians)) state.log_rt.push_back(std::log(m));

  std::vector<double> observed(T);
  for (std::size_t t = 0; t < T; ++t)
    observed[t] = std::max(1.0, detection_prior_median * static_cast<double>(config.series.cases()[t]));
  state.log_incidence.assign(n, std::log(observed.front()));
  for (double v : observed) state.log_incidence.push_back(std::log(v));

  auto lognormal_mean = [](const NormalPrior& p) { return p.mu + 0.5 * p.sigma * p.sigma; };
  state.log_nu = lognormal_mean(pr.log_nu);
  state.log_sigma = lognormal_mean(pr.log_sigma);
  state.log_rho = lognormal_mean(pr.log_rho);
  state.log_lambda = std::log(1.0 / pr.lambda_rate);
  state.log_kappa = std::log(truncated_normal_mean(pr.kappa));
  return state;
}

}  // namespace rtestim::models
