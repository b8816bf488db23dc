#include "rtestim/core/series.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtestim::core {

int step_days(TimeStep step) { return step == TimeStep::daily ? 1 : 7; }

std::string to_string(TimeStep step) { return step == TimeStep::daily ? "daily" : "weekly"; }

TimeStep parse_time_step(const std::string& text) {
  if (text == "daily") return TimeStep::daily;
  if (text == "weekly") return TimeStep::weekly;
  throw std::invalid_argument("unknown time step '" + text + "' (expected daily or weekly)");
}

TimeLabel TimeLabel::date(std::chrono::sys_days day) {
  TimeLabel label;
  label.is_date_ = true;
  label.index_ = day.time_since_epoch().count();
  return label;
}

TimeLabel TimeLabel::index(std::int64_t value) {
  TimeLabel label;
  label.index_ = value;
  return label;
}

std::chrono::sys_days TimeLabel::as_date() const {
  if (!is_date_) throw std::logic_error("time label is an integer index, not a date");
  return std::chrono::sys_days{std::chrono::days{index_}};
}

std::string TimeLabel::advanced(std::size_t steps, TimeStep step) const {
  const auto n = static_cast<std::int64_t>(steps);
  if (is_date_) return format_iso_date(as_date() + std::chrono::days{n * step_days(step)});
  return std::to_string(index_ + n);
}

std::optional<std::chrono::sys_days> parse_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const char* s = text.data();
  if (std::from_chars(s, s + 4, y).ec != std::errc{}) return std::nullopt;
  if (std::from_chars(s + 5, s + 7, m).ec != std::errc{}) return std::nullopt;
  if (std::from_chars(s + 8, s + 10, d).ec != std::errc{}) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

std::string format_iso_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

ObservedSeries::ObservedSeries(TimeLabel start, TimeStep step, std::vector<std::int64_t> cases,
                               std::vector<std::int64_t> tests)
    : start_(start), step_(step), cases_(std::move(cases)), tests_(std::move(tests)) {
  if (cases_.size() != tests_.size())
    throw std::invalid_argument("cases and tests must have equal length");
  if (cases_.empty()) throw std::invalid_argument("series must contain at least one time step");
  for (std::size_t t = 0; t < cases_.size(); ++t) {
    if (tests_[t] <= 0)
      throw std::invalid_argument("tests must be positive (time step " + std::to_string(t) + ")");
    if (cases_[t] < 0)
      throw std::invalid_argument("cases must be non-negative (time step " + std::to_string(t) +
                                  ")");
    if (cases_[t] > tests_[t])
      throw std::invalid_argument("cases exceed tests at time step " + std::to_string(t));
  }
}

ObservedSeries ObservedSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw std::out_of_range("series slice out of range");
  TimeLabel start = start_;
  if (start_.is_date())
    start = TimeLabel::date(start_.as_date() +
                            std::chrono::days{static_cast<std::int64_t>(first) * step_days(step_)});
  else
    start = TimeLabel::index(start_.as_index() + static_cast<std::int64_t>(first));
  return ObservedSeries(start, step_,
                       {cases_.begin() + first, cases_.begin() + first + count},
                       {tests_.begin() + first, tests_.begin() + first + count});
}

AggregationResult aggregate_weekly(const ObservedSeries& daily) {
  if (daily.step() != TimeStep::daily)
    throw std::invalid_argument("aggregate_weekly expects a daily series");
  const std::size_t weeks = daily.size() / 7;
  if (weeks == 0) throw std::invalid_argument("at least 7 days are needed to form a week");
  std::vector<std::int64_t> cases(weeks, 0);
  std::vector<std::int64_t> tests(weeks, 0);
  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t d = 0; d < 7; ++d) {
      cases[w] += daily.cases()[7 * w + d];
      tests[w] += daily.tests()[7 * w + d];
    }
  }
  return {ObservedSeries(daily.start(), TimeStep::weekly, std::move(cases), std::move(tests)),
          daily.size() - 7 * weeks};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::int64_t parse_count(const std::string& cell, std::size_t row, const char* column) {
  std::int64_t value = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc{} || ptr != end)
    throw std::runtime_error("row " + std::to_string(row) + ": invalid " + column + " '" + cell +
                             "'");
  if (value < 0)
    throw std::runtime_error("row " + std::to_string(row) + ": negative " + column);
  return value;
}

}  // namespace

ObservedSeries read_series_csv(std::istream& in, TimeStep index_step) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV input");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"date", "cases", "tests"})
    throw std::runtime_error("CSV header must be 'date,cases,tests'");

  std::vector<std::string> labels;
  std::vector<std::int64_t> cases;
  std::vector<std::int64_t> tests;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3 || cells[0].empty())
      throw std::runtime_error("row " + std::to_string(row) + ": expected 3 non-empty cells");
    labels.push_back(cells[0]);
    cases.push_back(parse_count(cells[1], row, "cases"));
    tests.push_back(parse_count(cells[2], row, "tests"));
  }
  if (labels.empty()) throw std::runtime_error("CSV contains no data rows");

  if (auto first = parse_iso_date(labels.front())) {
    std::vector<std::chrono::sys_days> days;
    for (const auto& l : labels) {
      auto d = parse_iso_date(l);
      if (!d) throw std::runtime_error("mixed or invalid date label '" + l + "'");
      days.push_back(*d);
    }
    TimeStep step = index_step;
    if (days.size() >= 2) {
      const auto gap = (days[1] - days[0]).count();
      if (gap == 1)
        step = TimeStep::daily;
      else if (gap == 7)
        step = TimeStep::weekly;
      else
        throw std::runtime_error("dates must be spaced 1 or 7 days apart");
    }
    for (std::size_t i = 1; i < days.size(); ++i)
      if ((days[i] - days[i - 1]).count() != step_days(step))
        throw std::runtime_error("non-consecutive date at row " + std::to_string(i + 2));
    return ObservedSeries(TimeLabel::date(*first), step, std::move(cases), std::move(tests));
  }

  std::vector<std::int64_t> indices;
  for (const auto& l : labels) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(l.data(), l.data() + l.size(), v);
    if (ec != std::errc{} || ptr != l.data() + l.size())
      throw std::runtime_error("label '" + l + "' is neither an ISO date nor an integer");
    indices.push_back(v);
  }
  for (std::size_t i = 1; i < indices.size(); ++i)
    if (indices[i] != indices[i - 1] + 1)
      throw std::runtime_error("non-consecutive index at row " + std::to_string(i + 2));
  return ObservedSeries(TimeLabel::index(indices.front()), index_step, std::move(cases),
                        std::move(tests));
}

ObservedSeries read_series_csv_file(const std::string& path, TimeStep index_step) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_series_csv(in, index_step);
}

void write_series_csv(std::ostream& out, const ObservedSeries& series) {
  out << "date,cases,tests\n";
  for (std::size_t t = 0; t < series.size(); ++t)
    out << series.label(t) << ',' << series.cases()[t] << ',' << series.tests()[t] << '\n';
}

}  // namespace rtestim::core
