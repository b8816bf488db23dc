#include "rtestim/sampler/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "rtestim/core/format.hpp"

namespace rtestim::sampler {

using Chains = std::vector<std::vector<double>>;

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (static_cast<double>(x.size()) - 1.0);
}

Chains split(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // The middle draw of an odd-length chain is dropped.
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of pooled fractional ranks, ties averaged.
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < chains[c].size(); ++i) all.emplace_back(chains[c][i], all.size());
  const std::size_t S = all.size();
  std::vector<double> ranks(S);
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return all[a].first < all[b].first; });
  for (std::size_t i = 0; i < S;) {
    std::size_t j = i;
    while (j + 1 < S && all[order[j + 1]].first == all[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  const boost::math::normal standard;
  Chains out = chains;
  std::size_t k = 0;
  for (auto& c : out)
    for (double& v : c)
      v = boost::math::quantile(standard, (ranks[k++] - 0.375) / (static_cast<double>(S) + 0.25));
  return out;
}

Chains fold(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double med = quantile(all, 0.5);
  Chains out = chains;
  for (auto& c : out)
    for (double& v : c) v = std::abs(v - med);
  return out;
}

bool constant_within_all(const Chains& chains) {
  for (const auto& c : chains)
    for (double v : c)
      if (v != c.front()) return false;
  return true;
}

double rhat_basic(const Chains& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(variance_of(c));
  }
  const double W = mean_of(vars);
  const double B = n * variance_of(means);
  if (!(W > 0.0)) return B > 0.0 ? kRhatSentinel : 1.0;
  const double var_hat = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_hat / W);
}

// Mean over chains of the biased autocovariance at each lag, computed on demand.
class AutocovarianceMeans {
public:
  explicit AutocovarianceMeans(const Chains& chains) : chains_(chains) {
    for (const auto& c : chains_) means_.push_back(mean_of(c));
  }
  double operator()(std::size_t lag) {
    while (cache_.size() <= lag) {
      const std::size_t t = cache_.size();
      double total = 0.0;
      for (std::size_t c = 0; c < chains_.size(); ++c) {
        const auto& x = chains_[c];
        const double m = means_[c];
        double s = 0.0;
        for (std::size_t i = 0; i + t < x.size(); ++i) s += (x[i] - m) * (x[i + t] - m);
        total += s / static_cast<double>(x.size());
      }
      cache_.push_back(total / static_cast<double>(chains_.size()));
    }
    return cache_[lag];
  }

private:
  const Chains& chains_;
  std::vector<double> means_;
  std::vector<double> cache_;
};

}  // namespace

double quantile_sorted(std::span<const double> sorted, double probability) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * probability;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double probability) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, probability);
}

double ess_basic(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double total = static_cast<double>(m * n);
  if (n < 4) throw std::invalid_argument("need at least four draws per chain");
  if (constant_within_all(chains)) {
    bool identical = true;
    for (const auto& c : chains) identical = identical && c.front() == chains.front().front();
    // Nothing to learn from the autocorrelations; report the nominal size.
    if (identical) return total;
  }

  AutocovarianceMeans acov(chains);
  const double dn = static_cast<double>(n);
  const double mean_var = acov(0) * dn / (dn - 1.0);
  double var_plus = mean_var * (dn - 1.0) / dn;
  if (m > 1) {
    std::vector<double> means;
    for (const auto& c : chains) means.push_back(mean_of(c));
    var_plus += variance_of(means);
  }

  std::vector<double> rho(n, 0.0);
  std::size_t t = 0;
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - acov(1)) / var_plus;
  rho[1] = rho_odd;
  while (t + 5 < n && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = 1.0 - (mean_var - acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Geyer's initial monotone sequence.
  t = 0;
  while (t + 4 <= max_t) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }
  double tau = -1.0 + rho[max_t];
  for (std::size_t i = 0; i < max_t; ++i) tau += 2.0 * rho[i];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double split_rhat(const Chains& chains) {
  const Chains halves = split(chains);
  const double bulk = rhat_basic(rank_normalize(halves));
  const double tail = rhat_basic(rank_normalize(fold(halves)));
  if (constant_within_all(halves)) return rhat_basic(halves);
  return std::max(bulk, tail);
}

double ess_bulk(const Chains& chains) { return ess_basic(rank_normalize(split(chains))); }

double ess_tail(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  std::sort(all.begin(), all.end());
  double result = std::numeric_limits<double>::infinity();
  for (double p : {0.05, 0.95}) {
    const double q = quantile_sorted(all, p);
    Chains indicator = chains;
    for (auto& c : indicator)
      for (double& v : c) v = v <= q ? 1.0 : 0.0;
    result = std::min(result, ess_basic(split(indicator)));
  }
  return result;
}

Diagnostics diagnose(const PosteriorDraws& draws) {
  if (draws.chain_count() < 1) throw std::invalid_argument("no chains to diagnose");
  if (draws.iterations() < 4) throw std::invalid_argument("need at least four retained draws per chain");
  Diagnostics d;
  d.names = draws.names;
  d.single_chain = draws.chain_count() < 2;
  for (std::size_t p = 0; p < draws.parameter_count(); ++p) {
    const auto chains = draws.by_chain(p);
    d.rhat.push_back(split_rhat(chains));
    d.ess_bulk.push_back(ess_bulk(chains));
    d.ess_tail.push_back(ess_tail(chains));
  }
  return d;
}

double Diagnostics::max_rhat() const {
  double m = 0.0;
  for (double r : rhat) m = std::max(m, std::isnan(r) ? kRhatSentinel : r);
  return m;
}

double Diagnostics::min_ess_bulk() const {
  return ess_bulk.empty() ? 0.0 : *std::min_element(ess_bulk.begin(), ess_bulk.end());
}

double Diagnostics::min_ess_tail() const {
  return ess_tail.empty() ? 0.0 : *std::min_element(ess_tail.begin(), ess_tail.end());
}

bool Diagnostics::converged() const {
  return !single_chain && max_rhat() < kRhatThreshold && min_ess_bulk() > kEssThreshold &&
         min_ess_tail() > kEssThreshold;
}

std::string Diagnostics::verdict() const {
  std::string text = converged() ? "converged" : "not converged";
  text += ": max Rhat " + core::format_number(max_rhat()) + ", min bulk ESS " +
          core::format_number(min_ess_bulk()) + ", min tail ESS " +
          core::format_number(min_ess_tail());
  if (single_chain) text += " (single chain)";
  return text;
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParameterSummary> out;
  for (std::size_t p = 0; p < draws.parameter_count(); ++p) {
    auto values = draws.pooled(p);
    std::sort(values.begin(), values.end());
    out.push_back({draws.names[p], mean_of(values), quantile_sorted(values, 0.5),
                   quantile_sorted(values, 0.025), quantile_sorted(values, 0.975)});
  }
  return out;
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  out << "chain,iteration,parameter,value\n";
  for (std::size_t c = 0; c < draws.chain_count(); ++c)
    for (Eigen::Index i = 0; i < draws.chains[c].rows(); ++i)
      for (std::size_t p = 0; p < draws.parameter_count(); ++p)
        out << c + 1 << ',' << i + 1 << ',' << draws.names[p] << ','
            << core::format_number(draws.chains[c](i, static_cast<Eigen::Index>(p))) << '\n';
}

nlohmann::json summary_json(const PosteriorDraws& draws, const Diagnostics& diagnostics) {
  nlohmann::json parameters = nlohmann::json::array();
  const auto summaries = summarize(draws);
  for (std::size_t p = 0; p < summaries.size(); ++p) {
    const auto& s = summaries[p];
    parameters.push_back({{"name", s.name},
                          {"median", s.median},
                          {"lower95", s.lower95},
                          {"upper95", s.upper95},
                          {"rhat", diagnostics.rhat[p]},
                          {"ess_bulk", diagnostics.ess_bulk[p]},
                          {"ess_tail", diagnostics.ess_tail[p]}});
  }
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& s : draws.status)
    chains.push_back({{"init_attempts", s.init_attempts},
                      {"step_size", s.step_size},
                      {"mean_accept_stat", s.mean_accept_stat},
                      {"divergences", s.divergences},
                      {"max_depth_hits", s.max_depth_hits}});
  return {{"converged", diagnostics.converged()},
          {"max_rhat", diagnostics.max_rhat()},
          {"min_ess_bulk", diagnostics.min_ess_bulk()},
          {"min_ess_tail", diagnostics.min_ess_tail()},
          {"chains", chains},
          {"parameters", parameters}};
}

}  // namespace rtestim::sampler
