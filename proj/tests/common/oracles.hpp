// Independent reference implementations used by the unit and acceptance tests.
//
// The log posteriors below are written from the model definitions in quad
// precision, term by term with textbook densities, and share no code with the
// library's evaluators. Quad precision matters: prior draws can produce gamma
// shapes near 1e7, where lgamma is ~1e8 and a long double reference would
// lose the last digits a 1e-5 finite-difference step depends on. Finite
// differences are taken on these references, so a gradient check compares
// the analytic gradient against an independently derived slope.
#ifndef RTESTIM_TESTS_ORACLES_HPP
#define RTESTIM_TESTS_ORACLES_HPP

#include <quadmath.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rtestim/core/random.hpp"
#include "rtestim/models/gamma_model.hpp"
#include "rtestim/models/normal_model.hpp"

namespace oracle {

using Real = __float128;
using RealVector = std::vector<Real>;

inline Real log(Real x) { return logq(x); }
inline Real exp(Real x) { return expq(x); }
inline Real sqrt(Real x) { return sqrtq(x); }
inline Real lgamma(Real x) { return lgammaq(x); }
inline Real fabs(Real x) { return fabsq(x); }

const Real kLogSqrt2Pi = 0.5Q * logq(2 * M_PIq);

inline Real normal_log_pdf(Real x, Real mu, Real sd) {
  const Real z = (x - mu) / sd;
  return -kLogSqrt2Pi - log(sd) - z * z / 2;
}

inline Real exponential_log_pdf(Real x, Real rate) { return log(rate) - rate * x; }

inline Real gamma_log_pdf(Real x, Real shape, Real rate) {
  return shape * log(rate) - lgamma(shape) + (shape - 1) * log(x) - rate * x;
}

// P(Y = y) with Y ~ NegBinom(size kappa, prob kappa / (kappa + mu)).
inline Real neg_binomial_log_pmf(long long y, Real mu, Real kappa) {
  const Real yy = static_cast<Real>(y);
  return lgamma(yy + kappa) - lgamma(kappa) - lgamma(yy + 1) +
         kappa * log(kappa / (kappa + mu)) + yy * log(mu / (kappa + mu));
}

// Delay weight at a lag, zero outside the stored support.
inline Real weight(const rtestim::core::DiscretizedDelay& delay, long lag) {
  const long i = lag - delay.offset();
  if (i < 0 || i >= static_cast<long>(delay.weights().size())) return 0;
  return delay.weights()[static_cast<std::size_t>(i)];
}

// Unconstrained layout: [log I_{1-n..T}, log R_{1..T}, log nu, log sigma, log rho, log lambda, log kappa].
inline Real gamma_log_posterior(const RealVector& x, const rtestim::models::GammaModelConfig& c) {
  const auto& p = c.priors;
  const long n = static_cast<long>(p.seeding_length);
  const long T = static_cast<long>(c.series.size());
  auto I = [&](long time) { return exp(x[static_cast<std::size_t>(time + n - 1)]); };
  auto logR = [&](long time) { return x[static_cast<std::size_t>(n + T + time - 1)]; };
  const std::size_t s = static_cast<std::size_t>(n + 2 * T);
  const Real nu = exp(x[s]), sigma = exp(x[s + 1]), rho = exp(x[s + 2]),
             lambda = exp(x[s + 3]), kappa = exp(x[s + 4]);

  Real lp = exponential_log_pdf(lambda, p.lambda_rate) + x[s + 3];
  for (long t = 1 - n; t <= 0; ++t) lp += exponential_log_pdf(I(t), lambda) + log(I(t));
  for (long t = 1; t <= T; ++t) {
    Real Lambda = 0;
    for (long u = 1 - n; u <= t - 1; ++u) Lambda += weight(c.generation, t - u) * I(u);
    lp += gamma_log_pdf(I(t), exp(logR(t)) * Lambda * nu, nu) + log(I(t));
  }
  lp += normal_log_pdf(logR(1), p.log_r1.mu, p.log_r1.sigma);
  for (long t = 2; t <= T; ++t)
    lp += normal_log_pdf(logR(t), logR(t - 1), sigma / sqrt(static_cast<Real>(T - 1)));
  for (long t = 1; t <= T; ++t) {
    Real D = 0;
    for (long j = 1 - n; j <= t; ++j) D += weight(c.latent, t - j) * I(j);
    const Real mu = rho * static_cast<Real>(c.series.tests()[static_cast<std::size_t>(t - 1)]) * D;
    lp += neg_binomial_log_pmf(c.series.cases()[static_cast<std::size_t>(t - 1)], mu, kappa);
  }
  lp += normal_log_pdf(x[s], p.log_nu.mu, p.log_nu.sigma);
  lp += normal_log_pdf(x[s + 1], p.log_sigma.mu, p.log_sigma.sigma);
  lp += normal_log_pdf(x[s + 2], p.log_rho.mu, p.log_rho.sigma);
  lp += normal_log_pdf(kappa, p.kappa.mu, p.kappa.sigma) + x[s + 4];
  return lp;
}

// Layout: [log I_{1-n..T}, log R_{1..T}, log sigma, log psi, log alpha, log inv_phi, log lambda].
inline Real normal_log_posterior(const RealVector& x, const rtestim::models::NormalModelConfig& c) {
  const auto& p = c.priors;
  const long n = static_cast<long>(p.seeding_length);
  const long T = static_cast<long>(c.series.size());
  auto I = [&](long time) { return exp(x[static_cast<std::size_t>(time + n - 1)]); };
  auto logR = [&](long time) { return x[static_cast<std::size_t>(n + T + time - 1)]; };
  const std::size_t s = static_cast<std::size_t>(n + 2 * T);
  const Real sigma = exp(x[s]), psi = exp(x[s + 1]), alpha = exp(x[s + 2]),
             inv_phi = exp(x[s + 3]), lambda = exp(x[s + 4]);

  Real lp = exponential_log_pdf(lambda, p.lambda_rate) + x[s + 4];
  for (long t = 1 - n; t <= 0; ++t) lp += exponential_log_pdf(I(t), lambda) + log(I(t));
  for (long t = 1; t <= T; ++t) {
    Real renewal = 0;
    for (long u = 1 - n; u <= t - 1; ++u) renewal += weight(c.generation, t - u) * I(u);
    const Real mean = exp(logR(t)) * renewal;
    lp += normal_log_pdf(I(t), mean, mean * psi) + log(I(t));
  }
  lp += normal_log_pdf(logR(1), p.log_r1.mu, p.log_r1.sigma);
  for (long t = 2; t <= T; ++t) lp += normal_log_pdf(logR(t), logR(t - 1), sigma);
  for (long t = 1; t <= T; ++t) {
    Real delayed = 0;
    for (long j = 1 - n; j <= t - 1; ++j) delayed += weight(c.latent, t - j) * I(j);
    lp += neg_binomial_log_pmf(c.series.cases()[static_cast<std::size_t>(t - 1)], alpha * delayed,
                               1 / inv_phi);
  }
  lp += normal_log_pdf(sigma, p.sigma.mu, p.sigma.sigma) + x[s];
  lp += normal_log_pdf(psi, p.psi.mu, p.psi.sigma) + x[s + 1];
  lp += normal_log_pdf(alpha, p.alpha.mu, p.alpha.sigma) + x[s + 2];
  lp += normal_log_pdf(inv_phi, p.inv_phi.mu, p.inv_phi.sigma) + x[s + 3];
  return lp;
}

inline RealVector to_real(const Eigen::VectorXd& theta) {
  return RealVector(theta.data(), theta.data() + theta.size());
}

inline RealVector to_real(std::initializer_list<double> values) {
  return RealVector(values.begin(), values.end());
}

// Central differences with step h = 1e-5 * max(1, |x_i|), refined by one
// Richardson extrapolation against h / 2.
inline RealVector fd_gradient(const std::function<Real(const RealVector&)>& f, const RealVector& x) {
  RealVector grad(x.size());
  RealVector y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto central = [&](Real h) {
      y[i] = x[i] + h;
      const Real up = f(y);
      y[i] = x[i] - h;
      const Real down = f(y);
      y[i] = x[i];
      return (up - down) / (2 * h);
    };
    const Real h = Real(1e-5) * std::max<Real>(1, fabs(x[i]));
    grad[i] = (4 * central(h / 2) - central(h)) / 3;
  }
  return grad;
}

struct GradientCheck {
  std::size_t coordinates = 0;
  std::size_t failures = 0;
  double worst_excess = 0.0;  // largest |error| / allowed over all coordinates
};

// Allowed error per coordinate: max(absolute floor, relative * |reference|).
inline GradientCheck compare_gradient(const Eigen::VectorXd& analytic, const RealVector& reference,
                                      double relative = 1e-6, double floor = 1e-8) {
  GradientCheck out;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double ref = static_cast<double>(reference[i]);
    const double allowed = std::max(floor, relative * std::fabs(ref));
    const double err = std::fabs(analytic[static_cast<Eigen::Index>(i)] - ref);
    ++out.coordinates;
    if (!(err <= allowed)) ++out.failures;
    out.worst_excess = std::max(out.worst_excess, err / allowed);
  }
  return out;
}

inline double truncated_normal_draw(const rtestim::models::NormalPrior& p, rtestim::core::Engine& e) {
  std::normal_distribution<double> normal(p.mu, p.sigma);
  double v;
  do v = normal(e);
  while (!(v > 0.0));
  return v;
}

// Incidence draws are floored at this value so that a long run of tiny gamma
// draws cannot underflow the renewal sums.
constexpr double kIncidenceFloor = 1e-2;

// A state drawn forward from the gamma model's priors.
inline Eigen::VectorXd draw_gamma_state(const rtestim::models::GammaModel& model,
                                        rtestim::core::Engine& e) {
  const auto& c = model.config();
  const auto& p = c.priors;
  const std::size_t n = p.seeding_length, T = c.series.size();
  rtestim::models::ParameterState s;
  s.log_nu = std::normal_distribution<double>(p.log_nu.mu, p.log_nu.sigma)(e);
  s.log_sigma = std::normal_distribution<double>(p.log_sigma.mu, p.log_sigma.sigma)(e);
  s.log_rho = std::normal_distribution<double>(p.log_rho.mu, p.log_rho.sigma)(e);
  const double lambda = std::exponential_distribution<double>(p.lambda_rate)(e);
  s.log_lambda = std::log(lambda);
  s.log_kappa = std::log(truncated_normal_draw(p.kappa, e));
  std::vector<double> I;
  for (std::size_t j = 0; j < n; ++j)
    I.push_back(std::max(kIncidenceFloor, std::exponential_distribution<double>(lambda)(e)));
  double log_r = std::normal_distribution<double>(p.log_r1.mu, p.log_r1.sigma)(e);
  const double step = std::exp(s.log_sigma) / std::sqrt(static_cast<double>(T - 1));
  const double nu = std::exp(s.log_nu);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) log_r += std::normal_distribution<double>(0.0, step)(e);
    s.log_rt.push_back(log_r);
    double renewal = 0.0;
    for (std::size_t j = 0; j < I.size(); ++j)
      renewal += static_cast<double>(weight(c.generation, static_cast<long>(I.size() - j))) * I[j];
    const double shape = std::exp(log_r) * renewal * nu;
    I.push_back(std::max(kIncidenceFloor, std::gamma_distribution<double>(shape, 1.0 / nu)(e)));
  }
  for (double v : I) s.log_incidence.push_back(std::log(v));
  return model.pack(s);
}

inline Eigen::VectorXd draw_normal_state(const rtestim::models::NormalModel& model,
                                         rtestim::core::Engine& e) {
  const auto& c = model.config();
  const auto& p = c.priors;
  const std::size_t n = p.seeding_length, T = c.series.size();
  rtestim::models::NormalParameterState s;
  const double sigma = truncated_normal_draw(p.sigma, e);
  const double psi = truncated_normal_draw(p.psi, e);
  s.log_sigma = std::log(sigma);
  s.log_psi = std::log(psi);
  s.log_alpha = std::log(truncated_normal_draw(p.alpha, e));
  s.log_inv_phi = std::log(truncated_normal_draw(p.inv_phi, e));
  const double lambda = std::exponential_distribution<double>(p.lambda_rate)(e);
  s.log_lambda = std::log(lambda);
  std::vector<double> I;
  for (std::size_t j = 0; j < n; ++j)
    I.push_back(std::max(kIncidenceFloor, std::exponential_distribution<double>(lambda)(e)));
  double log_r = std::normal_distribution<double>(p.log_r1.mu, p.log_r1.sigma)(e);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) log_r += std::normal_distribution<double>(0.0, sigma)(e);
    s.log_rt.push_back(log_r);
    double renewal = 0.0;
    for (std::size_t j = 0; j < I.size(); ++j)
      renewal += static_cast<double>(weight(c.generation, static_cast<long>(I.size() - j))) * I[j];
    const double mean = std::exp(log_r) * renewal;
    std::normal_distribution<double> latent(mean, mean * psi);
    double v;
    do v = latent(e);
    while (!(v > 0.0));
    I.push_back(std::max(kIncidenceFloor, v));
  }
  for (double v : I) s.log_incidence.push_back(std::log(v));
  return model.pack(s);
}

}  // namespace oracle

#endif  // RTESTIM_TESTS_ORACLES_HPP
