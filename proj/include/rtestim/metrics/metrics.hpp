#ifndef RTESTIM_METRICS_METRICS_HPP
#define RTESTIM_METRICS_METRICS_HPP

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rtestim::metrics {

/// Per-time-point posterior summaries; NaN entries mark missing estimates.
struct EstimateSeries {
  std::vector<double> median;
  std::vector<double> lower95;
  std::vector<double> upper95;

  std::size_t size() const { return median.size(); }
  bool available(std::size_t t) const;
  void validate() const;
  EstimateSeries subset(std::span<const std::size_t> indices) const;
};

/// Share of time points whose closed 95% interval contains the truth.
double envelope(const EstimateSeries& est, std::span<const double> truth);
double mciw(const EstimateSeries& est);
double absolute_deviation(const EstimateSeries& est, std::span<const double> truth);
/// Mean absolute difference between consecutive medians.
double masv(std::span<const double> medians);

/// Indices where every series has an estimate.
std::vector<std::size_t> common_time_points(std::span<const EstimateSeries> series);

struct BoxplotSummary {
  double median;
  double lower_hinge;
  double upper_hinge;
  double lower_whisker;  // most extreme data point within 1.5 IQR of the median
  double upper_whisker;
  double minimum;
  double maximum;
  std::size_t count;
};

BoxplotSummary summarize_replicates(std::span<const double> values);
nlohmann::json to_json(const BoxplotSummary& summary);

struct MetricRow {
  std::string method;
  std::string scenario;
  std::string replicate;
  double envelope;
  double mciw;
  double abs_dev;
  double masv;
  double truth_masv;
};

/// Metric rows for several methods on one replicate, restricted to common time points.
std::vector<MetricRow> evaluate_replicate(const std::vector<std::string>& methods,
                                          const std::vector<EstimateSeries>& estimates,
                                          std::span<const double> truth,
                                          const std::string& scenario,
                                          const std::string& replicate);

/// Reads a CSV with median,lower95,upper95 columns (other columns ignored, NA allowed).
EstimateSeries read_estimate_csv(std::istream& in);

}  // namespace rtestim::metrics

#endif  // RTESTIM_METRICS_METRICS_HPP
