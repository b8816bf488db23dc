#ifndef RTESTIM_SAMPLER_DIAGNOSTICS_HPP
#define RTESTIM_SAMPLER_DIAGNOSTICS_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtestim/sampler/nuts.hpp"

namespace rtestim::sampler {

/// Returned instead of infinity when within-chain variance vanishes but chains disagree.
inline constexpr double kRhatSentinel = 1e10;

inline constexpr double kRhatThreshold = 1.05;
inline constexpr double kEssThreshold = 100.0;

struct Diagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  std::vector<double> ess_bulk;
  std::vector<double> ess_tail;
  bool single_chain = false;

  double max_rhat() const;
  double min_ess_bulk() const;
  double min_ess_tail() const;
  /// max Rhat < 1.05 and min bulk/tail ESS > 100 on at least two chains.
  bool converged() const;
  std::string verdict() const;
};

/// Rank-normalized split Rhat (max of bulk and folded), bulk and tail ESS.
double split_rhat(const std::vector<std::vector<double>>& chains);
double ess_bulk(const std::vector<std::vector<double>>& chains);
double ess_tail(const std::vector<std::vector<double>>& chains);
/// Effective sample size of the chains as given (no splitting or ranking).
double ess_basic(const std::vector<std::vector<double>>& chains);

/**
 * Diagnostics for every parameter. Needs at least four retained draws per
 * chain; a single chain is analysed by splitting it in half and is never
 * reported as converged.
 */
Diagnostics diagnose(const PosteriorDraws& draws);

/// Sample quantile with linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double probability);
double quantile_sorted(std::span<const double> sorted, double probability);

struct ParameterSummary {
  std::string name;
  double mean;
  double median;
  double lower95;
  double upper95;
};

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws);

/// Long-format CSV: chain,iteration,parameter,value.
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);
/// Per-parameter median and 95% interval plus diagnostics and chain status.
nlohmann::json summary_json(const PosteriorDraws& draws, const Diagnostics& diagnostics);

}  // namespace rtestim::sampler

#endif  // RTESTIM_SAMPLER_DIAGNOSTICS_HPP
