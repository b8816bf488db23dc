#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rtestim/core/random.hpp"
#include "rtestim/sampler/diagnostics.hpp"
#include "rtestim/sampler/nuts.hpp"

using namespace rtestim;
using namespace rtestim::sampler;

namespace {

double standard_normal(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  grad = -x;
  return -0.5 * x.squaredNorm();
}

std::vector<Eigen::VectorXd> zeros(std::size_t chains, Eigen::Index dim) {
  return std::vector<Eigen::VectorXd>(chains, Eigen::VectorXd::Zero(dim));
}

std::vector<std::vector<double>> iid_chains(std::size_t chains, std::size_t draws, std::uint64_t seed,
                                            double shift = 0.0) {
  auto e = core::make_engine(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out(chains);
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t i = 0; i < draws; ++i) out[c].push_back(normal(e) + (c == 0 ? shift : 0.0));
  return out;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("standard normal target is recovered") {
    SamplerConfig config;
    config.seed = 42;
    const auto draws = sample(standard_normal, zeros(4, 10), config);
    REQUIRE(draws.chain_count() == 4);
    REQUIRE(draws.iterations() == 1000);
    const auto diag = diagnose(draws);
    for (std::size_t p = 0; p < 10; ++p) {
      const auto values = draws.pooled(p);
      double mean = 0.0, sq = 0.0;
      for (double v : values) mean += v;
      mean /= values.size();
      for (double v : values) sq += (v - mean) * (v - mean);
      const double sd = std::sqrt(sq / (values.size() - 1));
      CHECK(std::abs(mean) < 4.0 / std::sqrt(diag.ess_bulk[p]));
      CHECK(sd == doctest::Approx(1.0).epsilon(0.05));
      CHECK(diag.rhat[p] < 1.01);
    }
    CHECK(diag.converged());
    for (const auto& s : draws.status) {
      CHECK(s.mean_accept_stat == doctest::Approx(0.8).epsilon(0.0625));  // within +-0.05
      CHECK(s.step_size > 0.0);
    }
  }

  TEST_CASE("gamma target sampled on the log scale") {
    // y = log x with x ~ Gamma(3, 2): log p(y) = 3y - 2 e^y
    auto target = [](const Eigen::VectorXd& y, Eigen::VectorXd& grad) {
      grad.resize(1);
      grad[0] = 3.0 - 2.0 * std::exp(y[0]);
      return 3.0 * y[0] - 2.0 * std::exp(y[0]);
    };
    SamplerConfig config;
    config.seed = 7;
    const auto draws = sample(target, zeros(4, 1), config, {"x"},
                              [](const Eigen::VectorXd& y) -> Eigen::VectorXd { return y.array().exp(); });
    const auto values = draws.pooled(0);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    const double ess = ess_bulk(draws.by_chain(0));
    CHECK(std::abs(mean - 1.5) < 4.0 * (std::sqrt(3.0) / 2.0) / std::sqrt(ess));
    CHECK(draws.names == std::vector<std::string>{"x"});
  }

  TEST_CASE("two-dimensional correlated Gaussian converges in mean and covariance") {
    Eigen::Matrix2d cov;
    cov << 1.0, 0.8, 0.8, 2.0;
    const Eigen::Matrix2d precision = cov.inverse();
    const Eigen::Vector2d mu(1.0, -2.0);
    auto target = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      const Eigen::VectorXd d = x - mu;
      grad = -precision * d;
      return -0.5 * d.dot(precision * d);
    };
    SamplerConfig config;
    config.seed = 3;
    config.iterations = 3500;
    config.warmup = 1000;
    const auto draws = sample(target, zeros(4, 2), config);  // 10^4 retained draws
    const auto diag = diagnose(draws);
    const auto x = draws.pooled(0), y = draws.pooled(1);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
      sxy += (x[i] - mx) * (y[i] - my);
    }
    sxx /= n - 1;
    syy /= n - 1;
    sxy /= n - 1;
    const double ess = std::min(diag.ess_bulk[0], diag.ess_bulk[1]);
    CHECK(std::abs(mx - 1.0) < 3.0 * std::sqrt(1.0 / ess));
    CHECK(std::abs(my + 2.0) < 3.0 * std::sqrt(2.0 / ess));
    // Var of a sample variance is about 2 s^4 / ess; of the covariance (s_xx s_yy + s_xy^2) / ess.
    CHECK(std::abs(sxx - 1.0) < 3.0 * std::sqrt(2.0 / ess));
    CHECK(std::abs(syy - 2.0) < 3.0 * std::sqrt(8.0 / ess));
    CHECK(std::abs(sxy - 0.8) < 3.0 * std::sqrt((2.0 + 0.64) / ess));
  }

  TEST_CASE("identical seeds give bitwise identical draws regardless of jobs") {
    SamplerConfig config;
    config.seed = 99;
    config.chains = 3;
    config.iterations = 300;
    config.warmup = 150;
    const auto a = sample(standard_normal, zeros(3, 4), config);
    const auto b = sample(standard_normal, zeros(3, 4), config);
    config.jobs = 3;
    const auto c = sample(standard_normal, zeros(3, 4), config);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK((a.chains[k].array() == b.chains[k].array()).all());
      CHECK((a.chains[k].array() == c.chains[k].array()).all());
    }
    config.seed = 100;
    const auto d = sample(standard_normal, zeros(3, 4), config);
    CHECK(!(a.chains[0].array() == d.chains[0].array()).all());
  }

  TEST_CASE("leapfrog conserves energy at tiny step sizes") {
    const LogDensity target = standard_normal;
    auto e = core::make_engine(5, 0);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd q(6), p(6), grad;
      for (int i = 0; i < 6; ++i) {
        q[i] = normal(e);
        p[i] = normal(e);
      }
      const Eigen::VectorXd metric = Eigen::VectorXd::Ones(6);
      const double lp0 = target(q, grad);
      const double h0 = hamiltonian(lp0, p, metric);
      const double lp1 = leapfrog(target, q, p, grad, metric, 1e-6);
      CHECK(std::abs(hamiltonian(lp1, p, metric) - h0) < 1e-8);
    }
  }

  TEST_CASE("non-finite targets fail at initialization") {
    auto nowhere = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      grad = Eigen::VectorXd::Zero(x.size());
      return -std::numeric_limits<double>::infinity();
    };
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 20;
    config.warmup = 10;
    CHECK_THROWS_AS(sample(nowhere, zeros(2, 2), config), std::runtime_error);

    // finite only for x > 0.05: a zero init is rescued by jitter
    auto shifted = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      grad = -(x.array() - 1.0).matrix();
      if ((x.array() <= 0.05).any()) return -std::numeric_limits<double>::infinity();
      return -0.5 * (x.array() - 1.0).square().sum();
    };
    config.chains = 1;
    config.init_jitter = 2.0;
    config.init_retries = 200;
    const auto draws = sample(shifted, std::vector<Eigen::VectorXd>(1, Eigen::VectorXd::Zero(1)), config);
    CHECK(draws.status[0].init_attempts > 1);
  }

  TEST_CASE("math errors inside the target reject the point instead of aborting") {
    // a standard normal that throws like a special function at its pole beyond x = 1.5
    auto fragile = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
      if (x[0] > 1.5) throw std::domain_error("pole");
      grad = -x;
      return -0.5 * x.squaredNorm();
    };
    SamplerConfig config;
    config.seed = 11;
    config.chains = 2;
    const auto draws = sample(fragile, zeros(2, 1), config);
    const auto v = draws.pooled(0);
    CHECK(*std::max_element(v.begin(), v.end()) <= 1.5);
    CHECK(draws.total_divergences() > 0);

    auto broken = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
      if (x[0] > 0.5) throw std::invalid_argument("bug");
      grad = -x;
      return -0.5 * x.squaredNorm();
    };
    CHECK_THROWS_AS(sample(broken, zeros(2, 1), config), std::invalid_argument);
  }

  TEST_CASE("sampler configuration is validated") {
    SamplerConfig c;
    CHECK_NOTHROW(c.validate());
    c.warmup = c.iterations;
    CHECK_THROWS(c.validate());
    c = SamplerConfig{};
    c.target_acceptance = 1.0;
    CHECK_THROWS(c.validate());
    c = SamplerConfig{};
    c.chains = 0;
    CHECK_THROWS(c.validate());
    c = SamplerConfig{};
    c.max_tree_depth = 0;
    CHECK_THROWS(c.validate());
    CHECK_THROWS(sample(standard_normal, zeros(3, 2), SamplerConfig{}));  // 3 inits for 4 chains
  }

  TEST_CASE("Rhat of iid chains is close to one") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const double r = split_rhat(iid_chains(4, 1000, seed));
      CHECK(r >= 1.0 - 1e-3);
      CHECK(r <= 1.02);
    }
    CHECK(split_rhat(iid_chains(4, 1000, 9, 3.0)) > 1.05);
  }

  TEST_CASE("constant distinct chains return the sentinel") {
    const std::vector<std::vector<double>> chains{std::vector<double>(100, 1.0), std::vector<double>(100, 2.0)};
    CHECK(split_rhat(chains) == kRhatSentinel);
    const std::vector<std::vector<double>> same{std::vector<double>(100, 1.0), std::vector<double>(100, 1.0)};
    CHECK(std::isfinite(split_rhat(same)));
  }

  TEST_CASE("ESS of white noise is close to the draw count") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto chains = iid_chains(4, 1000, seed);
      CHECK(ess_bulk(chains) == doctest::Approx(4000.0).epsilon(0.2));
      CHECK(ess_tail(chains) == doctest::Approx(4000.0).epsilon(0.2));
      CHECK(ess_basic(chains) == doctest::Approx(4000.0).epsilon(0.2));
    }
    // AR(1) with coefficient 0.9 has ESS about N (1 - 0.9) / (1 + 0.9)
    auto e = core::make_engine(17, 0);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> ar(4);
    for (auto& chain : ar) {
      double x = normal(e) / std::sqrt(1 - 0.81);
      for (int i = 0; i < 5000; ++i) {
        x = 0.9 * x + normal(e);
        chain.push_back(x);
      }
    }
    CHECK(ess_bulk(ar) == doctest::Approx(20000.0 * 0.1 / 1.9).epsilon(0.25));
  }

  TEST_CASE("diagnostics gate and single-chain flag") {
    PosteriorDraws draws;
    draws.names = {"a", "b"};
    auto e = core::make_engine(23, 0);
    std::normal_distribution<double> normal;
    for (int c = 0; c < 4; ++c) {
      Eigen::MatrixXd m(500, 2);
      for (int i = 0; i < 500; ++i) {
        m(i, 0) = normal(e);
        m(i, 1) = normal(e) + (c == 0 ? 5.0 : 0.0);
      }
      draws.chains.push_back(m);
    }
    const auto bad = diagnose(draws);
    CHECK(bad.rhat[0] < 1.05);
    CHECK(bad.rhat[1] > 1.05);
    CHECK(!bad.converged());
    CHECK(bad.verdict().find("not converged") != std::string::npos);
    draws.chains[0].col(1).array() -= 5.0;
    CHECK(diagnose(draws).converged());

    PosteriorDraws single = draws;
    single.chains.resize(1);
    const auto one = diagnose(single);
    CHECK(one.single_chain);
    CHECK(!one.converged());
    CHECK(std::isfinite(one.rhat[0]));

    PosteriorDraws tiny = draws;
    for (auto& m : tiny.chains) m = m.topRows(3).eval();
    CHECK_THROWS(diagnose(tiny));
  }

  TEST_CASE("type-7 quantiles and summaries") {
    CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({5}, 0.9) == 5.0);
    CHECK(quantile({3, 1, 2}, 0.0) == 1.0);
    CHECK(quantile({3, 1, 2}, 1.0) == 3.0);

    PosteriorDraws draws;
    draws.names = {"x"};
    Eigen::MatrixXd a(3, 1), b(3, 1);
    a << 1, 2, 3;
    b << 4, 5, 6;
    draws.chains = {a, b};
    const auto s = summarize(draws);
    CHECK(s[0].median == 3.5);
    CHECK(s[0].mean == 3.5);
    std::ostringstream csv;
    write_draws_csv(csv, draws);
    CHECK(csv.str().rfind("chain,iteration,parameter,value\n1,1,x,1\n", 0) == 0);
    CHECK(draws.index_of("x") == 0);
    CHECK_THROWS(draws.index_of("y"));
  }
}
