#include "rtestim/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rtestim/sampler/diagnostics.hpp"

namespace rtestim::metrics {

namespace {

void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("estimate and truth lengths differ");
  if (a == 0) throw std::invalid_argument("no time points to evaluate");
}

}  // namespace

bool EstimateSeries::available(std::size_t t) const {
  return std::isfinite(median[t]) && std::isfinite(lower95[t]) && std::isfinite(upper95[t]);
}

void EstimateSeries::validate() const {
  if (lower95.size() != median.size() || upper95.size() != median.size())
    throw std::invalid_argument("estimate columns differ in length");
  for (std::size_t t = 0; t < size(); ++t)
    if (available(t) && !(lower95[t] <= median[t] && median[t] <= upper95[t]))
      throw std::invalid_argument("estimate interval does not contain its median at index " +
                                  std::to_string(t));
}

EstimateSeries EstimateSeries::subset(std::span<const std::size_t> indices) const {
  EstimateSeries out;
  for (auto i : indices) {
    out.median.push_back(median.at(i));
    out.lower95.push_back(lower95.at(i));
    out.upper95.push_back(upper95.at(i));
  }
  return out;
}

double envelope(const EstimateSeries& est, std::span<const double> truth) {
  require_aligned(est.size(), truth.size());
  std::size_t covered = 0;
  for (std::size_t t = 0; t < truth.size(); ++t)
    if (est.lower95[t] <= truth[t] && truth[t] <= est.upper95[t]) ++covered;
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

double mciw(const EstimateSeries& est) {
  if (est.size() == 0) throw std::invalid_argument("no time points to evaluate");
  double total = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) total += est.upper95[t] - est.lower95[t];
  return total / static_cast<double>(est.size());
}

double absolute_deviation(const EstimateSeries& est, std::span<const double> truth) {
  require_aligned(est.size(), truth.size());
  double total = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) total += std::abs(est.median[t] - truth[t]);
  return total / static_cast<double>(truth.size());
}

double masv(std::span<const double> medians) {
  if (medians.size() < 2) throw std::invalid_argument("MASV needs at least two time points");
  double total = 0.0;
  for (std::size_t t = 1; t < medians.size(); ++t) total += std::abs(medians[t] - medians[t - 1]);
  return total / static_cast<double>(medians.size() - 1);
}

std::vector<std::size_t> common_time_points(std::span<const EstimateSeries> series) {
  if (series.empty()) return {};
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw std::invalid_argument("estimate series differ in length");
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < n; ++t)
    if (std::all_of(series.begin(), series.end(), [t](const auto& s) { return s.available(t); }))
      out.push_back(t);
  return out;
}

BoxplotSummary summarize_replicates(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("no values to summarize");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxplotSummary s{};
  s.count = v.size();
  s.median = sampler::quantile_sorted(v, 0.5);
  s.lower_hinge = sampler::quantile_sorted(v, 0.25);
  s.upper_hinge = sampler::quantile_sorted(v, 0.75);
  s.minimum = v.front();
  s.maximum = v.back();
  const double reach = 1.5 * (s.upper_hinge - s.lower_hinge);
  // Whiskers reach at most 1.5 IQR from the median (not from the hinges).
  s.lower_whisker = *std::find_if(v.begin(), v.end(),
                                  [&](double x) { return x >= s.median - reach; });
  s.upper_whisker = *std::find_if(v.rbegin(), v.rend(),
                                  [&](double x) { return x <= s.median + reach; });
  return s;
}

nlohmann::json to_json(const BoxplotSummary& s) {
  return {{"median", s.median},
          {"lower_hinge", s.lower_hinge},
          {"upper_hinge", s.upper_hinge},
          {"lower_whisker", s.lower_whisker},
          {"upper_whisker", s.upper_whisker},
          {"min", s.minimum},
          {"max", s.maximum},
          {"n", s.count}};
}

std::vector<MetricRow> evaluate_replicate(const std::vector<std::string>& methods,
                                          const std::vector<EstimateSeries>& estimates,
                                          std::span<const double> truth,
                                          const std::string& scenario,
                                          const std::string& replicate) {
  if (methods.size() != estimates.size())
    throw std::invalid_argument("one estimate series per method is required");
  for (const auto& e : estimates) {
    e.validate();
    require_aligned(e.size(), truth.size());
  }
  const auto keep = common_time_points(estimates);
  if (keep.size() < 2) throw std::invalid_argument("fewer than two common time points");
  std::vector<double> kept_truth;
  for (auto t : keep) kept_truth.push_back(truth[t]);
  const double truth_masv = masv(kept_truth);
  std::vector<MetricRow> rows;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto est = estimates[m].subset(keep);
    rows.push_back({methods[m], scenario, replicate, envelope(est, kept_truth), mciw(est),
                    absolute_deviation(est, kept_truth), masv(est.median), truth_masv});
  }
  return rows;
}

EstimateSeries read_estimate_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty estimate CSV");
  std::vector<std::string> header;
  {
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("estimate CSV lacks a '" + name + "' column");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cm = column("median"), cl = column("lower95"), cu = column("upper95");
  EstimateSeries out;
  auto parse = [](const std::string& text) {
    if (text == "NA" || text.empty()) return std::nan("");
    return std::stod(text);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) cells.resize(header.size());
    out.median.push_back(parse(cells[cm]));
    out.lower95.push_back(parse(cells[cl]));
    out.upper95.push_back(parse(cells[cu]));
  }
  out.validate();
  return out;
}

}  // namespace rtestim::metrics
