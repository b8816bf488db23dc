// Small hand-made data sets shared by several test suites.
#ifndef RTESTIM_TESTS_FIXTURES_HPP
#define RTESTIM_TESTS_FIXTURES_HPP

#include <vector>

#include "rtestim/core/delay.hpp"
#include "rtestim/core/series.hpp"
#include "rtestim/models/priors.hpp"

namespace fixture {

using namespace rtestim;

// Twelve weeks shaped like an analysed simulation replicate with ramping tests.
inline core::ObservedSeries weekly_series() {
  return core::ObservedSeries(core::TimeLabel::index(1), core::TimeStep::weekly,
                              {3, 2, 5, 7, 6, 11, 14, 19, 17, 25, 21, 16},
                              {5000, 5000, 5000, 5000, 7273, 9545, 11818, 14091, 16364, 18636,
                               20909, 23182});
}

inline core::DiscretizedDelay generation(std::size_t length) {
  return core::discretize_at_step(core::ContinuousDelay::hypoexponential(1.0 / 4.0, 1.0 / 7.5),
                                  length, 1, core::TimeStep::weekly);
}

inline core::DiscretizedDelay latent(std::size_t length) {
  return core::discretize_at_step(core::ContinuousDelay::exponential(1.0 / 4.0), length, 0,
                                  core::TimeStep::weekly);
}

inline models::GammaModelConfig gamma_config(std::size_t seeding = 4) {
  const auto series = weekly_series();
  models::PriorSet priors;
  priors.seeding_length = seeding;
  const std::size_t length = seeding + series.size();
  return {priors, generation(length), latent(length), series};
}

inline models::NormalModelConfig normal_config(std::size_t seeding = 4) {
  const auto series = weekly_series();
  models::NormalModelPriors priors;
  priors.seeding_length = seeding;
  const std::size_t length = seeding + series.size();
  return {priors, generation(length), latent(length), series};
}

}  // namespace fixture

#endif  // RTESTIM_TESTS_FIXTURES_HPP
