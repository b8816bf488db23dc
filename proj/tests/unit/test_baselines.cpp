#include <cmath>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "rtestim/baselines/baselines.hpp"
#include "rtestim/sim/seir.hpp"

using namespace rtestim;
using namespace rtestim::baselines;

namespace {

// Unit mass at a single lag makes Lambda_t = I_{t-lag}, so windows can be
// given any renewal sums we like by writing them `lag` steps earlier.
core::DiscretizedDelay single_lag(int lag) {
  std::vector<double> w(static_cast<std::size_t>(lag), 0.0);
  w.back() = 1.0;
  return core::DiscretizedDelay(std::move(w), 1);
}

std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

EpiEstimConfig make_config(core::DiscretizedDelay generation) {
  return EpiEstimConfig{1, 1.0, 5.0, std::move(generation)};
}

constexpr double kZ = 1.959963984540054;

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("renewal sums use only in-data history") {
    const std::vector<double> I{1, 2, 4};
    const core::DiscretizedDelay g({0.5, 0.25}, 1);
    const auto lambda = renewal_sums(I, g);
    CHECK(lambda[0] == 0.0);
    CHECK(lambda[1] == doctest::Approx(0.5));
    CHECK(lambda[2] == doctest::Approx(2 * 0.5 + 1 * 0.25));
  }

  TEST_CASE("EpiEstim conjugate update") {
    auto config = make_config(single_lag(1));
    auto est = epiestim(std::vector<double>{5, 10}, config);
    REQUIRE(est[1].defined);
    CHECK(est[1].posterior_shape == 11.0);
    CHECK(est[1].posterior_rate == doctest::Approx(5.2).epsilon(1e-15));
    CHECK(est[1].point_estimate == doctest::Approx(2.1154).epsilon(1e-4));
    CHECK(!est[0].defined);
    CHECK(std::isnan(est[0].median));

    est = epiestim(std::vector<double>{5, 0}, config);
    CHECK(est[1].posterior_shape == 1.0);
    CHECK(est[1].point_estimate == doctest::Approx(0.1923).epsilon(1e-3));
    // Gamma(1, rate) is exponential: median log 2 / rate
    CHECK(est[1].median == doctest::Approx(std::log(2.0) / 5.2).epsilon(1e-12));
    CHECK(est[1].lower95 < est[1].median);
    CHECK(est[1].median < est[1].upper95);
  }

  TEST_CASE("EpiEstim sliding windows and undefined points") {
    auto config = make_config(single_lag(1));
    config.window = 3;
    const std::vector<double> I{2, 3, 4, 5, 6};
    const auto est = epiestim(I, config);
    for (std::size_t t = 0; t < 3; ++t) CHECK(!est[t].defined);
    CHECK(est[3].posterior_shape == 1 + 3 + 4 + 5);
    CHECK(est[3].posterior_rate == doctest::Approx(0.2 + 2 + 3 + 4));
    CHECK(est[4].posterior_shape == 1 + 4 + 5 + 6);

    // a renewal sum of zero leaves the window undefined
    config.window = 1;
    const auto zero = epiestim(std::vector<double>{0, 0, 3}, config);
    CHECK(!zero[1].defined);
    CHECK(!zero[2].defined);

    config.prior_shape = 0.0;
    CHECK_THROWS(epiestim(I, config));
    config.prior_shape = 1.0;
    config.window = 0;
    CHECK_THROWS(epiestim(I, config));
  }

  TEST_CASE("diffuse prior on a stationary series gives R close to one") {
    auto config = make_config(single_lag(1));
    config.prior_shape = 1e-6;
    config.prior_scale = 1e6;
    const auto est = epiestim(std::vector<double>(10, 50.0), config);
    for (std::size_t t = 1; t < 10; ++t) CHECK(est[t].point_estimate == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("seventeen weekly points give sixteen estimates") {
    auto config = make_config(fixture::generation(20));
    std::vector<double> I;
    for (int t = 0; t < 17; ++t) I.push_back(3.0 + t);
    const auto est = epiestim(I, config);
    REQUIRE(est.size() == 17);
    std::size_t defined = 0;
    for (const auto& e : est) defined += e.defined;
    CHECK(defined == 16);
    CHECK(!est[0].defined);
  }

  TEST_CASE("Poisson GLM closed form") {
    // window of four with Lambda = I = [5, 10, 15, 20]
    const auto I = concat({5, 10, 15, 20}, {5, 10, 15, 20});
    auto est = glm_poisson(I, 4, single_lag(4));
    REQUIRE(est[7].defined);
    CHECK(est[7].point_estimate == 1.0);
    CHECK(est[7].std_error == doctest::Approx(std::sqrt(1.0 / 50.0)).epsilon(1e-14));
    CHECK(est[7].lower95 == doctest::Approx(1.0 - kZ * std::sqrt(0.02)));
    CHECK(est[7].dispersion == 1.0);

    est = glm_poisson(std::vector<double>{10, 20, 30, 30}, 2, single_lag(2));
    CHECK(est[3].point_estimate == 2.0);

    est = glm_poisson(std::vector<double>{4, 4, 0, 0}, 2, single_lag(2));
    CHECK(est[3].point_estimate == 0.0);
    CHECK(est[3].std_error == 0.0);
    CHECK(est[3].degenerate);
  }

  TEST_CASE("quasi-Poisson Pearson dispersion") {
    const std::vector<double> I{10, 20, 12, 18};
    const auto poisson = glm_poisson(I, 2, single_lag(2));
    const auto quasi = glm_quasipoisson(I, 2, single_lag(2));
    REQUIRE(quasi[3].defined);
    CHECK(quasi[3].point_estimate == 1.0);
    CHECK(quasi[3].dispersion == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(quasi[3].std_error == doctest::Approx(std::sqrt(0.6) * std::sqrt(1.0 / 30.0)).epsilon(1e-14));
    CHECK(poisson[3].std_error == doctest::Approx(std::sqrt(1.0 / 30.0)).epsilon(1e-14));

    const auto exact = glm_quasipoisson(std::vector<double>{10, 20, 20, 40}, 2, single_lag(2));
    CHECK(exact[3].point_estimate == 2.0);
    CHECK(exact[3].dispersion == 0.0);
    CHECK(exact[3].lower95 == exact[3].upper95);

    // every fitted value zero: dispersion is missing
    const auto zero = glm_quasipoisson(std::vector<double>{4, 4, 0, 0}, 2, single_lag(2));
    CHECK(!zero[3].defined);
    CHECK(std::isnan(zero[3].dispersion));

    CHECK_THROWS(glm_quasipoisson(I, 1, single_lag(2)));
  }

  TEST_CASE("quasi and Poisson GLMs share point estimates and differ in width by sqrt(phi)") {
    const auto I = fixture::weekly_series();
    const auto incidence = cases_as_incidence(I);
    const auto g = fixture::generation(20);
    for (std::size_t window : {2u, 3u, 4u}) {
      const auto p = glm_poisson(incidence, window, g);
      const auto q = glm_quasipoisson(incidence, window, g);
      for (std::size_t t = 0; t < incidence.size(); ++t) {
        CHECK(p[t].defined == q[t].defined);
        if (!q[t].defined) continue;
        CHECK(q[t].point_estimate == p[t].point_estimate);
        CHECK(q[t].upper95 - q[t].lower95 ==
              doctest::Approx((p[t].upper95 - p[t].lower95) * std::sqrt(q[t].dispersion)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("EpiEstim with a flat prior agrees with the Poisson GLM") {
    const auto incidence = cases_as_incidence(fixture::weekly_series());
    auto config = make_config(fixture::generation(20));
    config.prior_scale = 1e6;
    for (std::size_t window : {1u, 3u}) {
      config.window = window;
      // The default shape of 1 adds one pseudo-case to every window, which
      // does not wash out at these counts; the limit needs shape -> 0 too.
      config.prior_shape = 1e-12;
      const auto e = epiestim(incidence, config);
      const auto g = glm_poisson(incidence, window, config.generation);
      for (std::size_t t = 0; t < incidence.size(); ++t) {
        REQUIRE(e[t].defined == g[t].defined);
        if (!g[t].defined) continue;
        CHECK(e[t].point_estimate == doctest::Approx(g[t].point_estimate).epsilon(1e-3));
      }
    }
  }

  TEST_CASE("negative-binomial windows are over-dispersed") {
    // Lambda = 100 for every window, incidence ~ NB(100, 5)
    auto engine = core::make_engine(11, 0);
    const std::size_t window = 7, windows = 200;
    std::size_t above_one = 0, wider = 0;
    for (std::size_t w = 0; w < windows; ++w) {
      std::vector<double> I(window, 100.0);
      for (std::size_t i = 0; i < window; ++i)
        I.push_back(static_cast<double>(sim::draw_neg_binomial(100.0, 5.0, engine)));
      const auto p = glm_poisson(I, window, single_lag(static_cast<int>(window)));
      const auto q = glm_quasipoisson(I, window, single_lag(static_cast<int>(window)));
      const auto& last = q.back();
      REQUIRE(last.defined);
      above_one += last.dispersion > 1.0;
      wider += (last.upper95 - last.lower95) > (p.back().upper95 - p.back().lower95);
    }
    CHECK(above_one >= 0.95 * windows);
    CHECK(wider == above_one);
  }

  TEST_CASE("uncertain generation time") {
    const auto incidence = cases_as_incidence(fixture::weekly_series());
    auto config = make_config(fixture::generation(20));

    // a single draw equal to the fixed interval reproduces the fixed result
    const std::vector<core::DiscretizedDelay> one{config.generation};
    const auto fixed = epiestim(incidence, config);
    const auto mixed = epiestim_uncertain(incidence, config, one);
    for (std::size_t t = 1; t < incidence.size(); ++t) {
      CHECK(mixed[t].median == doctest::Approx(fixed[t].median).epsilon(1e-12));
      CHECK(mixed[t].lower95 == doctest::Approx(fixed[t].lower95).epsilon(1e-12));
    }

    auto engine = core::make_engine(4242, 0);
    const auto draws = sample_generation_draws(core::ContinuousDelay::hypoexponential(0.25, 1.0 / 7.5),
                                               50, 0.3, 20, core::TimeStep::weekly, engine);
    REQUIRE(draws.size() == 50);
    const auto est = epiestim_uncertain(incidence, config, draws);
    for (std::size_t t = 1; t < incidence.size(); ++t) {
      REQUIRE(est[t].defined);
      CHECK(est[t].lower95 < est[t].median);
      CHECK(est[t].median < est[t].upper95);
      // the mixture CDF at its own median is one half
      double cdf = 0.0;
      for (const auto& g : draws) {
        const auto single = epiestim(incidence, EpiEstimConfig{1, 1.0, 5.0, g});
        cdf += boost::math::cdf(boost::math::gamma_distribution<double>(single[t].posterior_shape,
                                                                         1.0 / single[t].posterior_rate),
                                est[t].median);
      }
      CHECK(cdf / 50.0 == doctest::Approx(0.5).epsilon(1e-8));
    }

    // cv = 0 gives identical draws
    const auto same = sample_generation_draws(core::ContinuousDelay::exponential(0.25), 3, 0.0, 5,
                                              core::TimeStep::weekly, engine);
    CHECK(same[0].weights()[2] == same[2].weights()[2]);
    CHECK_THROWS(epiestim_uncertain(incidence, config, std::vector<core::DiscretizedDelay>{}));
  }

  TEST_CASE("estimate CSV marks undefined windows") {
    const auto series = fixture::weekly_series();
    auto config = make_config(fixture::generation(20));
    const auto est = epiestim(cases_as_incidence(series), config);
    std::ostringstream out;
    write_estimates_csv(out, series, est);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t_end,median,lower95,upper95,dispersion");
    std::getline(in, line);
    CHECK(line == "1,NA,NA,NA,NA");
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == series.size());
  }
}
