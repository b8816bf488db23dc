#ifndef RTESTIM_SIM_SEIR_HPP
#define RTESTIM_SIM_SEIR_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rtestim/core/random.hpp"
#include "rtestim/core/series.hpp"

namespace rtestim::sim {

/// Piecewise-linear function of time in days, constant beyond its end points.
class PiecewiseLinear {
public:
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);
  double operator()(double day) const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
  std::vector<std::pair<double, double>> knots_;
};

/// Default reproduction-number path: rise, fall, rise again (knots given in weeks).
PiecewiseLinear default_r0_trajectory();

struct SeirConfig {
  std::int64_t population = 1'000'000;
  std::int64_t initial_infectious = 10;
  double latent_mean_days = 4.0;
  double infectious_mean_days = 7.5;
  PiecewiseLinear r0 = default_r0_trajectory();
  int horizon_weeks = 28;
  int discard_weeks = 11;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TestingScenario {
  enum class Kind { normal_draw, flat_then_ramp };
  Kind kind = Kind::normal_draw;
  std::string name;
  // normal_draw
  double weekly_mean = 1e4;
  double weekly_sd = 1e3;
  // flat_then_ramp; weeks are counted from the first analysed week
  int flat_weeks = 6;
  double flat_level = 5e3;
  double ramp_target = 3e4;
  int ramp_weeks = 11;

  /// Ramp level at analysed week w (flat_then_ramp only).
  double ramp_level(double week) const;
  nlohmann::json to_json() const;
};

TestingScenario scenario_preset(const std::string& name);  // "s1", "s2" or "s3"
std::vector<TestingScenario> scenario_presets();

struct Emission {
  double rho = 9e-5;
  double kappa = 5.0;
};

struct DailyRecord {
  std::int64_t S, E, I, R;
  std::int64_t exposures;    // S -> E during the day
  std::int64_t transitions;  // E -> I during the day
  double rt;                 // R0(day) * S / N at the start of the day
};

struct SimulationTruth {
  std::vector<DailyRecord> days;
  core::ObservedSeries daily;        // whole horizon
  core::ObservedSeries weekly;       // analysed weeks only
  std::vector<double> weekly_rt;     // Rt of the third day of each analysed week
  std::vector<double> weekly_exposures;
  std::vector<double> weekly_transitions;
  bool extinct_before_analysis = false;
  int discard_weeks = 0;
};

/**
 * Exact-event SEIR outbreak with daily piecewise-constant transmission rate
 * beta(day) = R0(day) / infectious_mean, followed by negative-binomial case
 * emission from the daily E -> I transitions, capped at the daily tests.
 */
SimulationTruth simulate(const SeirConfig& config, const TestingScenario& scenario,
                         const Emission& emission);

/// Weekly tests over the whole horizon for a scenario.
std::vector<std::int64_t> weekly_tests(const TestingScenario& scenario, const SeirConfig& config,
                                       core::Engine& engine);

/// Draw from NegBinom(mean, dispersion) as a gamma-Poisson mixture.
std::int64_t draw_neg_binomial(double mean, double dispersion, core::Engine& engine);

/// CSV: day,S,E,I,R,transitions,Rt,exposures.
void write_truth_csv(std::ostream& out, const SimulationTruth& truth);
/// CSV: week,Rt,exposures,transitions for the analysed weeks.
void write_weekly_truth_csv(std::ostream& out, const SimulationTruth& truth);

struct WeeklyTruth {
  std::vector<double> rt;
  std::vector<double> exposures;
};
WeeklyTruth read_weekly_truth_csv(std::istream& in);

}  // namespace rtestim::sim

#endif  // RTESTIM_SIM_SEIR_HPP
