#ifndef RTESTIM_CORE_SERIES_HPP
#define RTESTIM_CORE_SERIES_HPP

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rtestim::core {

enum class TimeStep { daily, weekly };

/// Number of days covered by one time step.
int step_days(TimeStep step);
std::string to_string(TimeStep step);
TimeStep parse_time_step(const std::string& text);

/**
 * Label of the first time step of a series: either a calendar date or a
 * plain integer index. Dates advance by the step length in days, integer
 * indices advance by one per step.
 */
class TimeLabel {
public:
  static TimeLabel date(std::chrono::sys_days day);
  static TimeLabel index(std::int64_t value);

  bool is_date() const { return is_date_; }
  std::chrono::sys_days as_date() const;
  std::int64_t as_index() const { return index_; }

  /// Label `steps` time steps after this one, rendered as CSV text.
  std::string advanced(std::size_t steps, TimeStep step) const;

  bool operator==(const TimeLabel&) const = default;

private:
  bool is_date_ = false;
  std::int64_t index_ = 0;  // days since epoch when is_date_
};

/// Parses "YYYY-MM-DD"; returns nullopt when the text is not an ISO date.
std::optional<std::chrono::sys_days> parse_iso_date(const std::string& text);
std::string format_iso_date(std::chrono::sys_days day);

/**
 * Aligned observed case counts and administered test counts at a fixed time
 * step. Construction validates that both vectors have the same non-zero
 * length, tests are positive, cases are non-negative and never exceed tests.
 */
class ObservedSeries {
public:
  ObservedSeries(TimeLabel start, TimeStep step, std::vector<std::int64_t> cases,
                 std::vector<std::int64_t> tests);

  const TimeLabel& start() const { return start_; }
  TimeStep step() const { return step_; }
  std::size_t size() const { return cases_.size(); }
  std::span<const std::int64_t> cases() const { return cases_; }
  std::span<const std::int64_t> tests() const { return tests_; }
  std::string label(std::size_t i) const { return start_.advanced(i, step_); }

  /// Sub-series [first, first + count).
  ObservedSeries slice(std::size_t first, std::size_t count) const;

private:
  TimeLabel start_;
  TimeStep step_;
  std::vector<std::int64_t> cases_;
  std::vector<std::int64_t> tests_;
};

struct AggregationResult {
  ObservedSeries series;
  std::size_t dropped_days = 0;  // trailing partial week
};

/// Sums consecutive blocks of 7 daily values. Throws for fewer than 7 days.
AggregationResult aggregate_weekly(const ObservedSeries& daily);

/**
 * Reads the `date,cases,tests` CSV format. Labels are either ISO-8601 dates
 * (step inferred from the spacing, 1 or 7 days) or integer indices (step taken
 * from `index_step`). Negative values, missing cells and non-consecutive
 * labels are rejected with std::runtime_error.
 */
ObservedSeries read_series_csv(std::istream& in, TimeStep index_step = TimeStep::daily);
ObservedSeries read_series_csv_file(const std::string& path,
                                    TimeStep index_step = TimeStep::daily);
void write_series_csv(std::ostream& out, const ObservedSeries& series);

}  // namespace rtestim::core

#endif  // RTESTIM_CORE_SERIES_HPP
