#include "rtestim/priors/elicitation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <functional>
#include <numeric>

#include "rtestim/core/random.hpp"
#include "rtestim/models/densities.hpp"
#include "rtestim/models/config_io.hpp"

namespace rtestim::priors {

namespace {

constexpr double kZ975 = 1.959963984540054;

struct NelderMeadResult {
  std::vector<double> x;
  double value;
  bool converged;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, std::vector<double> steps,
                             double size_tolerance, std::size_t max_iterations) {
  const std::size_t n = start.size();
  struct Payload {
    const std::function<double(const std::vector<double>&)>* f;
    std::size_t n;
  } payload{&f, n};
  gsl_multimin_function fn;
  fn.n = n;
  fn.params = &payload;
  fn.f = [](const gsl_vector* v, void* params) {
    const auto* p = static_cast<Payload*>(params);
    std::vector<double> x(p->n);
    for (std::size_t i = 0; i < p->n; ++i) x[i] = gsl_vector_get(v, i);
    const double value = (*p->f)(x);
    return std::isfinite(value) ? value : GSL_POSINF;
  };
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(ss, i, steps[i]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  bool converged = false;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tolerance) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  NelderMeadResult result{std::vector<double>(n), s->fval, converged};
  for (std::size_t i = 0; i < n; ++i) result.x[i] = gsl_vector_get(s->x, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return result;
}

}  // namespace

// ---------------------------------------------------------------- detection

void DetectionPriorSpec::validate() const {
  if (!(overall_low > 0.0 && overall_low < overall_high && overall_high <= 1.0))
    throw std::invalid_argument("detection bounds must satisfy 0 < low < high <= 1");
  if (!(test_quantile > 0.0 && test_quantile < 1.0))
    throw std::invalid_argument("test quantile must lie in (0, 1)");
}

models::NormalPrior elicit_rho(std::span<const std::int64_t> tests,
                               const DetectionPriorSpec& spec) {
  spec.validate();
  if (tests.empty()) throw std::invalid_argument("tests must not be empty");
  std::vector<double> values;
  for (auto m : tests) {
    if (m <= 0) throw std::invalid_argument("tests must be positive");
    values.push_back(static_cast<double>(m));
  }
  const double m_q = sampler::quantile(values, spec.test_quantile);
  const double mu_p = 0.5 * (std::log(spec.overall_low) + std::log(spec.overall_high));
  const double sigma_p = (std::log(spec.overall_high) - std::log(spec.overall_low)) / (2.0 * kZ975);
  return {mu_p - std::log(m_q), sigma_p};
}

// ---------------------------------------------------------------- spline fit

Eigen::MatrixXd bspline_basis(std::span<const double> x, double lower, double upper,
                              std::size_t interior_knots, int degree) {
  if (!(upper > lower)) throw std::invalid_argument("spline range must be non-empty");
  if (degree < 0) throw std::invalid_argument("spline degree must be non-negative");
  std::vector<double> knots;
  for (int i = 0; i <= degree; ++i) knots.push_back(lower);
  for (std::size_t k = 1; k <= interior_knots; ++k)
    knots.push_back(lower + (upper - lower) * static_cast<double>(k) /
                                static_cast<double>(interior_knots + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(upper);
  const std::size_t count = interior_knots + static_cast<std::size_t>(degree) + 1;

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()),
                                                static_cast<Eigen::Index>(count));
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double v = std::clamp(x[r], lower, upper);
    // Cox-de Boor recursion, starting from the indicator of the knot span.
    std::vector<double> b(knots.size() - 1, 0.0);
    std::size_t span = static_cast<std::size_t>(degree) + interior_knots;  // last non-empty span
    for (std::size_t i = static_cast<std::size_t>(degree); i < knots.size() - 1; ++i)
      if (v >= knots[i] && v < knots[i + 1]) {
        span = i;
        break;
      }
    b[span] = 1.0;
    for (int d = 1; d <= degree; ++d) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(d) < knots.size() - 1; ++i) {
        double value = 0.0;
        const double left = knots[i + static_cast<std::size_t>(d)] - knots[i];
        const double right = knots[i + static_cast<std::size_t>(d) + 1] - knots[i + 1];
        if (left > 0.0) value += (v - knots[i]) / left * b[i];
        if (right > 0.0) value += (knots[i + static_cast<std::size_t>(d) + 1] - v) / right * b[i + 1];
        b[i] = value;
      }
    }
    for (std::size_t j = 0; j < count; ++j) basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = b[j];
  }
  return basis;
}

SplineNegBinomialModel::SplineNegBinomialModel(std::span<const std::int64_t> counts,
                                               const SplineFitConfig& config)
    : kappa_shape_(config.kappa_prior_shape), kappa_rate_(config.kappa_prior_rate) {
  std::vector<double> time;
  double total = 0.0;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] < 0) throw std::invalid_argument("counts must be non-negative");
    counts_.push_back(static_cast<double>(counts[t]));
    time.push_back(static_cast<double>(t));
    total += counts_.back();
  }
  offset_ = std::log(total / static_cast<double>(counts.size()) + 0.5);
  basis_ = bspline_basis(time, 0.0, static_cast<double>(counts.size() - 1), config.knot_count,
                         config.basis_degree);
  const Eigen::Index k = basis_.cols();
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(k - 2, k);
  for (Eigen::Index i = 0; i < k - 2; ++i) {
    d2(i, i) = 1.0;
    d2(i, i + 1) = -2.0;
    d2(i, i + 2) = 1.0;
  }
  precision_ = config.difference_penalty * d2.transpose() * d2 +
               config.ridge_penalty * Eigen::MatrixXd::Identity(k, k);
}

double SplineNegBinomialModel::log_density_gradient(const Eigen::VectorXd& theta,
                                                    Eigen::VectorXd& gradient) const {
  const Eigen::Index k = basis_.cols();
  const auto beta = theta.head(k);
  const double log_kappa = theta[k];
  const double kappa = std::exp(log_kappa);
  gradient.setZero(theta.size());

  const Eigen::VectorXd eta = (basis_ * beta).array() + offset_;
  Eigen::VectorXd d_eta(eta.size());
  double lp = 0.0;
  double d_kappa = 0.0;
  for (Eigen::Index t = 0; t < eta.size(); ++t) {
    const double mu = std::exp(eta[t]);
    const auto term = models::neg_binomial_lpmf_with_derivatives(
        static_cast<std::int64_t>(counts_[static_cast<std::size_t>(t)]), mu, kappa);
    lp += term.value;
    d_eta[t] = term.d_mean * mu;
    d_kappa += term.d_dispersion;
  }
  const Eigen::VectorXd pb = precision_ * beta;
  lp -= 0.5 * beta.dot(pb);
  gradient.head(k) = basis_.transpose() * d_eta - pb;
  lp += kappa_shape_ * log_kappa - kappa_rate_ * kappa;
  gradient[k] = d_kappa * kappa + kappa_shape_ - kappa_rate_ * kappa;
  return lp;
}

Eigen::VectorXd SplineNegBinomialModel::initial_point() const {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(basis_.cols() + 1);
  // Start from a least-squares fit of log counts so chains begin near the trend.
  Eigen::VectorXd target(basis_.rows());
  for (Eigen::Index t = 0; t < target.size(); ++t)
    target[t] = std::log(counts_[static_cast<std::size_t>(t)] + 0.5) - offset_;
  const Eigen::MatrixXd lhs = basis_.transpose() * basis_ + precision_;
  theta.head(basis_.cols()) = lhs.ldlt().solve(basis_.transpose() * target);
  theta[basis_.cols()] = std::log(10.0);
  return theta;
}

SplineFit fit_spline(std::span<const std::int64_t> counts, const SplineFitConfig& config) {
  if (counts.size() < 20) throw std::invalid_argument("need at least 20 counts to fit the spline");
  const SplineNegBinomialModel model(counts, config);
  const auto target = [&model](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return model.log_density_gradient(theta, grad);
  };
  const std::vector<Eigen::VectorXd> inits(config.sampler.chains, model.initial_point());
  const std::size_t kappa_index = model.dimension() - 1;
  // Only the over-dispersion is kept; the spline coefficients are nuisance.
  const auto output = [kappa_index](const Eigen::VectorXd& theta) {
    Eigen::VectorXd out(1);
    out[0] = std::exp(theta[static_cast<Eigen::Index>(kappa_index)]);
    return out;
  };
  sampler::SamplerConfig sc = config.sampler;
  sc.init_jitter = std::max(sc.init_jitter, 0.5);
  // Jitter every chain so that the Rhat check is meaningful.
  std::vector<Eigen::VectorXd> jittered = inits;
  auto engine = core::make_engine(sc.seed, 0xE11C17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& init : jittered)
    for (Eigen::Index i = 0; i < init.size(); ++i) init[i] += u(engine);
  const auto draws = sampler::sample(target, jittered, sc, {"kappa"}, output);
  SplineFit fit;
  fit.basis_degree = config.basis_degree;
  fit.knot_count = config.knot_count;
  fit.ridge_penalty = config.ridge_penalty;
  fit.dispersion_posterior = draws.pooled(0);
  fit.diagnostics = sampler::diagnose(draws);
  if (!fit.diagnostics.converged())
    throw NonConvergenceError("spline fit for the over-dispersion prior did not converge (" +
                                  fit.diagnostics.verdict() + ")",
                              fit.diagnostics);
  return fit;
}

// ---------------------------------------------------------------- truncated normal

double truncated_normal_quantile(double mu, double sigma, double p) {
  const boost::math::normal standard;
  // Upper-tail form keeps precision when the truncation point is far in the tail.
  const double upper_mass = boost::math::cdf(standard, mu / sigma);
  const double q = (1.0 - p) * upper_mass;
  if (!(q > 0.0)) return 0.0;
  return mu - sigma * boost::math::quantile(standard, q);
}

double truncated_normal_loss(const models::NormalPrior& prior,
                             std::span<const double> target_quantiles,
                             std::span<const double> probabilities) {
  double loss = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double diff =
        target_quantiles[i] - truncated_normal_quantile(prior.mu, prior.sigma, probabilities[i]);
    loss += diff * diff;
  }
  return loss;
}

models::NormalPrior fit_truncated_normal(std::span<const double> target_quantiles,
                                         std::span<const double> probabilities, double upper) {
  if (target_quantiles.size() != probabilities.size() || probabilities.empty())
    throw std::invalid_argument("quantile targets and probabilities must align");
  if (!(upper > 0.0)) throw std::invalid_argument("upper bound must be positive");
  std::vector<double> sorted(target_quantiles.begin(), target_quantiles.end());
  std::sort(sorted.begin(), sorted.end());
  const double centre = std::max(sorted[sorted.size() / 2], 1e-6);
  const double spread = std::max(sorted.back() - sorted.front(), 1e-6 * std::max(1.0, centre));

  // Skewed targets pull an unconstrained fit towards mu -> -infinity (the
  // truncated normal then degenerates into an exponential), so both
  // parameters live in (0, upper): log scale when unbounded, logistic below.
  const bool bounded = std::isfinite(upper);
  const auto to_natural = [&](double x) {
    return bounded ? upper / (1.0 + std::exp(-x)) : std::exp(x);
  };
  const auto to_free = [&](double v) {
    if (!bounded) return std::log(v);
    const double u = std::clamp(v / upper, 1e-9, 1.0 - 1e-9);
    return std::log(u / (1.0 - u));
  };
  const auto loss = [&](const std::vector<double>& x) {
    return truncated_normal_loss({to_natural(x[0]), to_natural(x[1])}, target_quantiles,
                                 probabilities);
  };
  NelderMeadResult best{};
  bool first = true;
  for (const auto& [mu, sigma] : {std::pair{centre, spread / 4.0}, std::pair{0.1 * centre, spread / 2.0}}) {
    auto r = nelder_mead(loss, {to_free(mu), to_free(sigma)}, {0.5, 0.5}, 1e-10, 5000);
    // A restart from the optimum guards against premature simplex collapse.
    r = nelder_mead(loss, r.x, {0.1, 0.1}, 1e-12, 5000);
    if (first || r.value < best.value) best = r;
    first = false;
  }
  return {to_natural(best.x[0]), to_natural(best.x[1])};
}

KappaElicitation elicit_kappa(std::span<const std::int64_t> counts, const SplineFitConfig& config) {
  KappaElicitation out;
  out.fit = fit_spline(counts, config);
  std::vector<double> sorted = out.fit.dispersion_posterior;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> targets;
  for (double q : kKappaQuantiles) targets.push_back(sampler::quantile_sorted(sorted, q));
  out.posterior_quantiles = targets;
  out.prior = fit_truncated_normal(targets, kKappaQuantiles, config.kappa_cap);
  // A posterior centred beyond the cap carries no usable over-dispersion signal.
  if (targets[2] > config.kappa_cap) {
    out.prior.mu = config.kappa_cap;
    out.capped = true;
  }
  if (out.prior.mu >= (1.0 - 1e-6) * config.kappa_cap || out.prior.sigma >= (1.0 - 1e-6) * config.kappa_cap)
    out.capped = true;
  return out;
}

// ---------------------------------------------------------------- variant generation times

VariantMatch match_variant_generation(const core::ContinuousDelay& base, double mean_reduction,
                                      std::uint64_t seed, std::size_t samples) {
  if (!(mean_reduction >= 0.0 && mean_reduction < 1.0))
    throw std::invalid_argument("mean reduction must lie in [0, 1)");
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  const double target_mean = (1.0 - mean_reduction) * base.mean();
  const double target_sd = base.sd();

  auto engine = core::make_engine(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> uniforms(samples);
  for (double& v : uniforms) {
    do v = unit(engine);
    while (v <= 0.0);
  }

  const auto family = base.family();
  const bool first_unconstrained = family == core::DelayFamily::lognormal;
  const auto to_params = [&](const std::vector<double>& x) {
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      p[i] = (first_unconstrained && i == 0) ? x[i] : std::exp(x[i]);
    return p;
  };
  struct Moments {
    double mean, sd;
  };
  // Log-normal, Weibull and exponential quantiles are closed-form transforms
  // of one standard value per uniform, so those are computed once; the draws
  // are the same as inverting the CDF of every candidate.
  std::vector<double> standard(samples);
  if (family == core::DelayFamily::lognormal) {
    const boost::math::normal_distribution<double> unit_normal;
    for (std::size_t i = 0; i < samples; ++i) standard[i] = boost::math::quantile(unit_normal, uniforms[i]);
  } else {
    for (std::size_t i = 0; i < samples; ++i) standard[i] = -std::log1p(-uniforms[i]);
  }
  const auto draw = [&](const core::ContinuousDelay& d, std::size_t i) {
    const auto p = d.parameters();
    switch (family) {
      case core::DelayFamily::lognormal: return std::exp(p[0] + p[1] * standard[i]);
      case core::DelayFamily::weibull: return p[1] * std::pow(standard[i], 1.0 / p[0]);
      case core::DelayFamily::exponential: return standard[i] / p[0];
      default: return d.quantile(uniforms[i]);
    }
  };
  const auto moments = [&](const core::ContinuousDelay& d) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double v = draw(d, i);
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    return Moments{mean, std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)))};
  };
  const auto loss = [&](const std::vector<double>& x) {
    try {
      const auto m = moments(core::ContinuousDelay(family, to_params(x)));
      return (m.mean - target_mean) * (m.mean - target_mean) +
             (m.sd - target_sd) * (m.sd - target_sd);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<double> start;
  for (std::size_t i = 0; i < base.parameters().size(); ++i)
    start.push_back((first_unconstrained && i == 0) ? base.parameters()[i]
                                                    : std::log(base.parameters()[i]));
  auto result = nelder_mead(loss, start, std::vector<double>(start.size(), 0.1), 1e-9, 4000);
  result = nelder_mead(loss, result.x, std::vector<double>(start.size(), 0.01), 1e-11, 4000);
  const core::ContinuousDelay matched(family, to_params(result.x));
  const auto m = moments(matched);
  if (!result.converged)
    throw std::runtime_error("variant generation-time search did not converge; best candidate " +
                             core::to_string(family) + " loss " + std::to_string(result.value));
  return {matched, target_mean, target_sd, m.mean, m.sd, result.value};
}

nlohmann::json prior_fragment(const models::NormalPrior* log_rho, const models::NormalPrior* kappa) {
  nlohmann::json priors = nlohmann::json::object();
  if (log_rho) priors["log_rho"] = models::to_json(*log_rho);
  if (kappa) priors["kappa"] = models::to_json(*kappa);
  return {{"priors", priors}};
}

}  // namespace rtestim::priors
