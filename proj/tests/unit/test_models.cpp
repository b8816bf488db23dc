#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "rtestim/models/config_io.hpp"
#include "rtestim/models/densities.hpp"
#include "rtestim/models/gamma_model.hpp"
#include "rtestim/models/normal_model.hpp"

using namespace rtestim;
using namespace rtestim::models;

TEST_SUITE("models") {
  TEST_CASE("density building blocks") {
    CHECK(gamma_lpdf(1.0, 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(neg_binomial_lpmf(0, 1.0, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(normal_lpdf(0.0, 0.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-15));
    for (std::int64_t y : {0, 1, 3, 17, 40})
      for (double mu : {0.3, 4.0, 80.0})
        CHECK(std::abs(neg_binomial_lpmf(y, mu, 1e8) - poisson_lpmf(y, mu)) < 1e-4);
    for (std::int64_t y : {0, 4, 40})
      for (double mu : {0.5, 12.0})
        for (double k : {0.7, 5.0, 90.0})
          CHECK(neg_binomial_lpmf(y, mu, k) ==
                doctest::Approx(static_cast<double>(oracle::neg_binomial_log_pmf(y, mu, k))).epsilon(1e-12));
  }

  TEST_CASE("negative-binomial derivatives match finite differences") {
    for (std::int64_t y : {0, 3, 50})
      for (double mu : {0.4, 7.0, 300.0})
        for (double k : {0.5, 5.0, 400.0}) {
          const auto term = neg_binomial_lpmf_with_derivatives(y, mu, k);
          CHECK(term.value == doctest::Approx(neg_binomial_lpmf(y, mu, k)).epsilon(1e-14));
          auto f_mu = [&](oracle::RealVector x) { return oracle::neg_binomial_log_pmf(y, x[0], k); };
          const auto at_mu = oracle::to_real({mu}), at_k = oracle::to_real({k});
          auto f_k = [&](oracle::RealVector x) { return oracle::neg_binomial_log_pmf(y, mu, x[0]); };
          CHECK(term.d_mean == doctest::Approx(static_cast<double>(oracle::fd_gradient(f_mu, at_mu)[0])).epsilon(1e-8));
          CHECK(term.d_dispersion == doctest::Approx(static_cast<double>(oracle::fd_gradient(f_k, at_k)[0])).epsilon(1e-7));
        }
  }

  TEST_CASE("gamma model log posterior equals the independent density sum") {
    const GammaModel model(fixture::gamma_config());
    auto e = core::make_engine(101, 0);
    for (int k = 0; k < 25; ++k) {
      const auto theta = oracle::draw_gamma_state(model, e);
      const double ours = model.log_density(theta);
      const double reference = static_cast<double>(oracle::gamma_log_posterior(oracle::to_real(theta), model.config()));
      CHECK(ours == doctest::Approx(reference).epsilon(1e-10));
      Eigen::VectorXd grad;
      CHECK(model.log_density_gradient(theta, grad) == doctest::Approx(ours).epsilon(1e-14));
    }
  }

  TEST_CASE("normal model log posterior equals the independent density sum") {
    const NormalModel model(fixture::normal_config());
    auto e = core::make_engine(102, 0);
    for (int k = 0; k < 25; ++k) {
      const auto theta = oracle::draw_normal_state(model, e);
      const double ours = model.log_density(theta);
      const double reference = static_cast<double>(oracle::normal_log_posterior(oracle::to_real(theta), model.config()));
      CHECK(ours == doctest::Approx(reference).epsilon(1e-10));
    }
  }

  TEST_CASE("analytic gradients match finite differences at prior draws") {
    const GammaModel gamma(fixture::gamma_config());
    const NormalModel normal(fixture::normal_config());
    auto e = core::make_engine(103, 0);
    std::size_t failures = 0;
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      {
        const auto theta = oracle::draw_gamma_state(gamma, e);
        Eigen::VectorXd grad;
        gamma.log_density_gradient(theta, grad);
        const auto fd = oracle::fd_gradient(
            [&](const oracle::RealVector& x) { return oracle::gamma_log_posterior(x, gamma.config()); },
            oracle::to_real(theta));
        const auto check = oracle::compare_gradient(grad, fd);
        failures += check.failures;
        worst = std::max(worst, check.worst_excess);
      }
      {
        const auto theta = oracle::draw_normal_state(normal, e);
        Eigen::VectorXd grad;
        normal.log_density_gradient(theta, grad);
        const auto fd = oracle::fd_gradient(
            [&](const oracle::RealVector& x) { return oracle::normal_log_posterior(x, normal.config()); },
            oracle::to_real(theta));
        const auto check = oracle::compare_gradient(grad, fd);
        failures += check.failures;
        worst = std::max(worst, check.worst_excess);
      }
    }
    INFO("worst error / allowance = " << worst);
    CHECK(failures == 0);
  }

  TEST_CASE("seeding-rate gradient is the seeding block alone") {
    auto config = fixture::gamma_config(1);
    const GammaModel model(config);
    auto e = core::make_engine(104, 0);
    const auto theta = oracle::draw_gamma_state(model, e);
    Eigen::VectorXd grad;
    model.log_density_gradient(theta, grad);
    const double lambda = std::exp(theta[model.scalar_offset() + GammaModel::lambda]);
    const double seed = std::exp(theta[0]);
    const double eta = config.priors.lambda_rate;
    // d/dlog(lambda) of [log Exp(lambda; eta) + log lambda + log Exp(I_0; lambda)]
    const double expected = -eta * lambda + 1.0 + 1.0 - lambda * seed;
    CHECK(grad[model.scalar_offset() + GammaModel::lambda] == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("R gradient at constant log R is walk start term plus latent terms") {
    const auto config = fixture::gamma_config();
    const GammaModel model(config);
    auto e = core::make_engine(105, 0);
    auto state = model.unpack(oracle::draw_gamma_state(model, e));
    const double c = 0.3;
    std::fill(state.log_rt.begin(), state.log_rt.end(), c);
    const auto theta = model.pack(state);
    Eigen::VectorXd grad;
    model.log_density_gradient(theta, grad);
    const auto means = model.renewal_means(theta);
    const double nu = std::exp(state.log_nu);
    const std::size_t n = model.seeding_length();
    for (std::size_t t = 0; t < model.horizon(); ++t) {
      const double shape = means[t] * nu;
      const double latent = shape * (std::log(nu) + state.log_incidence[n + t] - boost::math::digamma(shape));
      const double walk = t == 0 ? -(c - config.priors.log_r1.mu) / std::pow(config.priors.log_r1.sigma, 2) : 0.0;
      CHECK(grad[model.rt_offset() + t] == doctest::Approx(walk + latent).epsilon(1e-10));
    }
  }

  TEST_CASE("normal latent term at its conditional mean") {
    const double mean = 37.0, psi = 0.4;
    CHECK(normal_lpdf(mean, mean, mean * psi) ==
          doctest::Approx(-std::log(mean * psi) - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-15));
    // psi = 1 / sqrt(nu R Lambda) gives the gamma model's variance R Lambda / nu.
    const double nu = 0.15, renewal_mean = 42.0;
    const double matched = 1.0 / std::sqrt(nu * renewal_mean);
    CHECK(std::pow(renewal_mean * matched, 2) == doctest::Approx(renewal_mean / nu).epsilon(1e-14));
  }

  TEST_CASE("latent gamma conditional has mean R Lambda and variance R Lambda / nu") {
    const GammaModel model(fixture::gamma_config());
    auto e = core::make_engine(106, 0);
    const auto theta = oracle::draw_gamma_state(model, e);
    const double nu = std::exp(theta[model.scalar_offset() + GammaModel::nu]);
    const double m = model.renewal_means(theta)[5];
    std::gamma_distribution<double> latent(m * nu, 1.0 / nu);
    double sum = 0.0, sum2 = 0.0;
    const int draws = 1'000'000;
    for (int i = 0; i < draws; ++i) {
      const double x = latent(e);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / draws, var = sum2 / draws - mean * mean;
    CHECK(mean == doctest::Approx(m).epsilon(0.01));
    CHECK(var == doctest::Approx(m / nu).epsilon(0.01));
  }

  TEST_CASE("emission mean is linear in tests") {
    auto config = fixture::gamma_config();
    const GammaModel model(config);
    std::vector<std::int64_t> doubled;
    for (auto m : config.series.tests()) doubled.push_back(2 * m);
    auto twice = config;
    twice.series = core::ObservedSeries(config.series.start(), config.series.step(),
                                        {config.series.cases().begin(), config.series.cases().end()}, doubled);
    const GammaModel model2(twice);
    auto e = core::make_engine(107, 0);
    const auto theta = oracle::draw_gamma_state(model, e);
    const auto a = model.expected_cases(theta), b = model2.expected_cases(theta);
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(b[t] == 2.0 * a[t]);
  }

  TEST_CASE("log posterior is unchanged by a natural-scale round trip") {
    const GammaModel gamma(fixture::gamma_config());
    const NormalModel normal(fixture::normal_config());
    auto e = core::make_engine(108, 0);
    for (int k = 0; k < 10; ++k) {
      const auto theta = oracle::draw_gamma_state(gamma, e);
      const Eigen::VectorXd back = theta.array().exp().log();
      CHECK(std::abs(gamma.log_density(back) - gamma.log_density(theta)) < 1e-12 * std::max(1.0, std::abs(gamma.log_density(theta))));
      CHECK(gamma.pack(gamma.unpack(theta)) == theta);
      const auto phi = oracle::draw_normal_state(normal, e);
      const Eigen::VectorXd phi_back = phi.array().exp().log();
      CHECK(std::abs(normal.log_density(phi_back) - normal.log_density(phi)) < 1e-12 * std::max(1.0, std::abs(normal.log_density(phi))));
      CHECK(normal.pack(normal.unpack(phi)) == phi);
    }
  }

  TEST_CASE("parameter names and dimensions") {
    const GammaModel model(fixture::gamma_config(3));
    const auto names = model.parameter_names();
    CHECK(names.size() == model.dimension());
    CHECK(model.dimension() == 3 + 2 * 12 + 5);
    CHECK(names[0] == "I[-2]");
    CHECK(names[3] == "I[1]");
    CHECK(names[model.rt_offset()] == "R[1]");
    CHECK(names[model.scalar_offset()] == "nu");
    CHECK(names.back() == "kappa");
    Eigen::VectorXd wrong = Eigen::VectorXd::Zero(4);
    CHECK_THROWS(model.log_density(wrong));
    const NormalModel normal(fixture::normal_config(3));
    CHECK(normal.parameter_names()[normal.scalar_offset() + NormalModel::inv_phi] == "inv_phi");
  }

  TEST_CASE("real-data initialization") {
    auto config = fixture::gamma_config(2);
    config.series = core::ObservedSeries(core::TimeLabel::index(1), core::TimeStep::weekly, {100, 200, 0},
                                         {1000, 1000, 1000});
    const std::vector<double> medians{1.2, NAN, 0.8};
    const auto state = initialize_real_data(config, medians, 0.05);
    CHECK(std::exp(state.log_incidence[2]) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(std::exp(state.log_incidence[3]) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(std::exp(state.log_incidence[4]) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::exp(state.log_rt[1]) == doctest::Approx(1.2));
    const auto& p = config.priors;
    CHECK(std::exp(state.log_rho) == doctest::Approx(std::exp(p.log_rho.mu + 0.5 * p.log_rho.sigma * p.log_rho.sigma)).epsilon(1e-14));
    CHECK(std::exp(state.log_lambda) == doctest::Approx(1.0 / p.lambda_rate));
    CHECK(std::exp(state.log_kappa) == doctest::Approx(truncated_normal_mean(p.kappa)).epsilon(1e-12));
    CHECK_THROWS(initialize_real_data(config, medians, 0.0));
    CHECK_THROWS(initialize_real_data(config, std::vector<double>{1.0}, 0.05));
    const auto filled = fill_missing_medians(std::vector<double>{NAN, 2.0, NAN, -1.0, 3.0});
    CHECK(filled == std::vector<double>{2.0, 2.0, 2.0, 2.0, 3.0});
  }

  TEST_CASE("truncated normal mean") {
    CHECK(truncated_normal_mean({0.0, 1.0}) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
    CHECK(truncated_normal_mean({50.0, 1.0}) == doctest::Approx(50.0).epsilon(1e-12));
  }

  TEST_CASE("model specs round-trip through JSON and reject unknown fields") {
    ModelSpec spec;
    spec.priors.kappa = {33.0, 25.0};
    spec.seeding_length = 5;
    spec.generation.length = 20;
    const auto back = model_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
    CHECK(back.priors.kappa.mu == 33.0);
    CHECK(*back.seeding_length == 5);

    CHECK_THROWS(model_spec_from_json(nlohmann::json{{"prior", {}}}));
    CHECK_THROWS(model_spec_from_json(nlohmann::json{{"priors", {{"log_nu", {{"mu", 1}, {"sd", 2}}}}}}));
    CHECK_THROWS(model_spec_from_json(nlohmann::json{{"priors", {{"log_nu", {{"mu", 1}, {"sigma", -2}}}}}}));
    CHECK_THROWS(model_spec_from_json(nlohmann::json{{"generation", {{"family", "cauchy"}, {"parameters", {1}}}}}));

    const auto merged = merge_documents({nlohmann::json{{"priors", {{"kappa", {{"mu", 1}, {"sigma", 2}}}}}},
                                         nlohmann::json{{"priors", {{"kappa", {{"mu", 7}}}}}}});
    const auto m = model_spec_from_json(merged);
    CHECK(m.priors.kappa.mu == 7.0);
    CHECK(m.priors.kappa.sigma == 2.0);
    CHECK(m.priors.log_nu.mu == -2.0);
  }

  TEST_CASE("configs built from a spec") {
    ModelSpec spec;
    const auto series = fixture::weekly_series();
    const auto n = resolve_seeding_length(spec, core::TimeStep::weekly);
    const auto g = core::discretize_at_step(spec.generation.delay, 60, 1, core::TimeStep::weekly);
    CHECK(n == core::support_length(g, 0.99));
    CHECK(n >= 1);
    const auto config = build_gamma_config(spec, series);
    CHECK(config.priors.seeding_length == n);
    CHECK(config.generation.weights().size() == n + series.size());
    CHECK(config.latent.offset() == 0);
    CHECK(config.generation.offset() == 1);
    spec.seeding_length = 2;
    CHECK(build_normal_config(spec, series).priors.seeding_length == 2);
  }
}
