#include "rtestim/sim/seir.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rtestim/core/format.hpp"

namespace rtestim::sim {

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
  if (knots_.empty()) throw std::invalid_argument("trajectory needs at least one knot");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i].first > knots_[i - 1].first))
      throw std::invalid_argument("trajectory knots must be strictly increasing in time");
  for (const auto& k : knots_)
    if (!(k.second >= 0.0)) throw std::invalid_argument("trajectory values must be non-negative");
}

double PiecewiseLinear::operator()(double day) const {
  if (day <= knots_.front().first) return knots_.front().second;
  if (day >= knots_.back().first) return knots_.back().second;
  const auto hi = std::upper_bound(knots_.begin(), knots_.end(), day,
                                   [](double d, const auto& k) { return d < k.first; });
  const auto lo = hi - 1;
  const double w = (day - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

PiecewiseLinear default_r0_trajectory() {
  std::vector<std::pair<double, double>> knots;
  for (auto [week, value] : std::vector<std::pair<double, double>>{
           {0, 2.0}, {8, 0.9}, {14, 1.5}, {20, 0.8}, {28, 1.1}})
    knots.emplace_back(7.0 * week, value);
  return PiecewiseLinear(knots);
}

void SeirConfig::validate() const {
  if (population < 1 || initial_infectious < 1 || initial_infectious > population)
    throw std::invalid_argument("population and initial infectious count must be positive");
  if (!(latent_mean_days > 0.0 && infectious_mean_days > 0.0))
    throw std::invalid_argument("latent and infectious periods must be positive");
  if (horizon_weeks < 1 || discard_weeks < 0 || discard_weeks >= horizon_weeks)
    throw std::invalid_argument("need 0 <= discard weeks < horizon weeks");
}

double TestingScenario::ramp_level(double week) const {
  if (week <= flat_weeks) return flat_level;
  if (week >= flat_weeks + ramp_weeks) return ramp_target;
  return flat_level + (ramp_target - flat_level) * (week - flat_weeks) / ramp_weeks;
}

nlohmann::json TestingScenario::to_json() const {
  if (kind == Kind::normal_draw)
    return {{"name", name}, {"kind", "normal-draw"}, {"weekly_mean", weekly_mean},
            {"weekly_sd", weekly_sd}};
  return {{"name", name},
          {"kind", "flat-then-ramp"},
          {"flat_weeks", flat_weeks},
          {"flat_level", flat_level},
          {"ramp_target", ramp_target},
          {"ramp_weeks", ramp_weeks}};
}

TestingScenario scenario_preset(const std::string& name) {
  TestingScenario s;
  s.name = name;
  if (name == "s1") {
    s.kind = TestingScenario::Kind::normal_draw;
  } else if (name == "s2") {
    s.kind = TestingScenario::Kind::flat_then_ramp;
    s.flat_weeks = 6;
    s.ramp_weeks = 11;
    s.ramp_target = 3e4;
  } else if (name == "s3") {
    s.kind = TestingScenario::Kind::flat_then_ramp;
    s.flat_weeks = 8;
    s.ramp_weeks = 9;
    s.ramp_target = 5e4;
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "' (expected s1, s2 or s3)");
  }
  return s;
}

std::vector<TestingScenario> scenario_presets() {
  return {scenario_preset("s1"), scenario_preset("s2"), scenario_preset("s3")};
}

std::vector<std::int64_t> weekly_tests(const TestingScenario& scenario, const SeirConfig& config,
                                       core::Engine& engine) {
  std::vector<std::int64_t> out;
  std::normal_distribution<double> normal(scenario.weekly_mean, scenario.weekly_sd);
  for (int w = 0; w < config.horizon_weeks; ++w) {
    double level = 0.0;
    if (scenario.kind == TestingScenario::Kind::normal_draw) {
      do level = std::round(normal(engine));
      while (!(level >= 7.0));
    } else {
      level = std::round(scenario.ramp_level(w - config.discard_weeks));
    }
    out.push_back(static_cast<std::int64_t>(level));
  }
  return out;
}

std::int64_t draw_neg_binomial(double mean, double dispersion, core::Engine& engine) {
  if (!(mean > 0.0)) return 0;
  std::gamma_distribution<double> gamma(dispersion, mean / dispersion);
  const double lambda = gamma(engine);
  if (!(lambda > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(lambda)(engine);
}

SimulationTruth simulate(const SeirConfig& config, const TestingScenario& scenario,
                         const Emission& emission) {
  config.validate();
  if (!(emission.rho > 0.0 && emission.kappa > 0.0))
    throw std::invalid_argument("emission rho and kappa must be positive");
  auto trajectory_engine = core::make_engine(config.seed, 0);
  auto testing_engine = core::make_engine(config.seed, 1);
  auto emission_engine = core::make_engine(config.seed, 2);

  const double N = static_cast<double>(config.population);
  std::int64_t S = config.population - config.initial_infectious, E = 0,
               I = config.initial_infectious, R = 0;
  const double sigma = 1.0 / config.latent_mean_days;
  const double gamma = 1.0 / config.infectious_mean_days;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int days = 7 * config.horizon_weeks;
  std::vector<DailyRecord> records;
  records.reserve(static_cast<std::size_t>(days));
  bool extinct_before_analysis = false;
  for (int day = 0; day < days; ++day) {
    const double r0 = config.r0(static_cast<double>(day));
    DailyRecord rec{S, E, I, R, 0, 0, r0 * static_cast<double>(S) / N};
    const double beta = r0 / config.infectious_mean_days;
    double t = 0.0;
    while (true) {
      const double a1 = beta * static_cast<double>(S) * static_cast<double>(I) / N;
      const double a2 = sigma * static_cast<double>(E);
      const double a3 = gamma * static_cast<double>(I);
      const double a0 = a1 + a2 + a3;
      if (!(a0 > 0.0)) break;
      t += std::exponential_distribution<double>(a0)(trajectory_engine);
      if (t >= 1.0) break;  // rates change at the day boundary; memorylessness makes this exact
      const double u = unit(trajectory_engine) * a0;
      if (u < a1) {
        --S;
        ++E;
        ++rec.exposures;
      } else if (u < a1 + a2) {
        --E;
        ++I;
        ++rec.transitions;
      } else {
        --I;
        ++R;
      }
    }
    records.push_back(rec);
    if (E + I == 0 && day < 7 * config.discard_weeks) extinct_before_analysis = true;
  }

  const auto weekly = weekly_tests(scenario, config, testing_engine);
  std::vector<std::int64_t> daily_tests, daily_cases;
  for (int w = 0; w < config.horizon_weeks; ++w) {
    const std::int64_t per_day = weekly[static_cast<std::size_t>(w)] / 7;
    for (int d = 0; d < 7; ++d)
      daily_tests.push_back(d < 6 ? per_day : weekly[static_cast<std::size_t>(w)] - 6 * per_day);
  }
  for (int day = 0; day < days; ++day) {
    const auto m = daily_tests[static_cast<std::size_t>(day)];
    const double mean = emission.rho * static_cast<double>(m) *
                        static_cast<double>(records[static_cast<std::size_t>(day)].transitions);
    daily_cases.push_back(std::min(m, draw_neg_binomial(mean, emission.kappa, emission_engine)));
  }

  core::ObservedSeries daily(core::TimeLabel::index(1), core::TimeStep::daily, daily_cases,
                             daily_tests);
  const auto all_weeks = core::aggregate_weekly(daily).series;
  const auto first = static_cast<std::size_t>(config.discard_weeks);
  const std::size_t analysed = static_cast<std::size_t>(config.horizon_weeks - config.discard_weeks);

  SimulationTruth truth{records, daily, all_weeks.slice(first, analysed), {}, {}, {},
                        extinct_before_analysis, config.discard_weeks};
  for (std::size_t w = first; w < first + analysed; ++w) {
    truth.weekly_rt.push_back(records[7 * w + 2].rt);
    double exposures = 0.0, transitions = 0.0;
    for (std::size_t d = 7 * w; d < 7 * w + 7; ++d) {
      exposures += static_cast<double>(records[d].exposures);
      transitions += static_cast<double>(records[d].transitions);
    }
    truth.weekly_exposures.push_back(exposures);
    truth.weekly_transitions.push_back(transitions);
  }
  return truth;
}

void write_truth_csv(std::ostream& out, const SimulationTruth& truth) {
  out << "day,S,E,I,R,transitions,Rt,exposures\n";
  for (std::size_t d = 0; d < truth.days.size(); ++d) {
    const auto& r = truth.days[d];
    out << d + 1 << ',' << r.S << ',' << r.E << ',' << r.I << ',' << r.R << ',' << r.transitions
        << ',' << core::format_number(r.rt) << ',' << r.exposures << '\n';
  }
}

void write_weekly_truth_csv(std::ostream& out, const SimulationTruth& truth) {
  out << "week,Rt,exposures,transitions\n";
  for (std::size_t w = 0; w < truth.weekly_rt.size(); ++w)
    out << truth.weekly.label(w) << ',' << core::format_number(truth.weekly_rt[w]) << ','
        << core::format_number(truth.weekly_exposures[w]) << ','
        << core::format_number(truth.weekly_transitions[w]) << '\n';
}

WeeklyTruth read_weekly_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("week,Rt", 0) != 0)
    throw std::runtime_error("weekly truth CSV must start with a 'week,Rt,...' header");
  WeeklyTruth truth;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string week, rt, exposures;
    std::getline(row, week, ',');
    std::getline(row, rt, ',');
    std::getline(row, exposures, ',');
    try {
      truth.rt.push_back(std::stod(rt));
      truth.exposures.push_back(std::stod(exposures));
    } catch (const std::exception&) {
      throw std::runtime_error("malformed weekly truth row: " + line);
    }
  }
  return truth;
}

}  // namespace rtestim::sim
