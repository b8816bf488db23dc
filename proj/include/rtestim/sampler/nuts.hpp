#ifndef RTESTIM_SAMPLER_NUTS_HPP
#define RTESTIM_SAMPLER_NUTS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rtestim/core/random.hpp"

namespace rtestim::sampler {

/// Log density and its gradient. Must be safe to call concurrently.
using LogDensity = std::function<double(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient)>;

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 2000;  // including warmup
  std::size_t warmup = 1000;
  std::uint64_t seed = 1;
  double target_acceptance = 0.8;
  int max_tree_depth = 10;
  std::size_t jobs = 1;  // chains run concurrently on up to this many threads
  int init_retries = 10;
  double init_jitter = 0.1;

  void validate() const;
  std::size_t retained() const { return iterations - warmup; }
};

struct ChainStatus {
  int init_attempts = 0;
  double step_size = 0.0;
  double mean_accept_stat = 0.0;  // post-warmup
  std::size_t divergences = 0;    // post-warmup
  std::size_t max_depth_hits = 0;
  std::size_t gradient_evaluations = 0;
};

/**
 * Retained draws, one matrix per chain (rows: iterations, columns:
 * parameters). Values are whatever the output map produced, usually the
 * natural-scale parameters.
 */
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;
  std::vector<ChainStatus> status;

  std::size_t chain_count() const { return chains.size(); }
  std::size_t iterations() const { return chains.empty() ? 0 : chains.front().rows(); }
  std::size_t parameter_count() const { return names.size(); }
  std::size_t index_of(const std::string& name) const;

  /// Draws of one parameter, chain-major.
  std::vector<double> pooled(std::size_t parameter) const;
  /// Draws of one parameter split by chain.
  std::vector<std::vector<double>> by_chain(std::size_t parameter) const;
  std::size_t total_divergences() const;
};

/// Maps an unconstrained position to the stored output row.
using OutputMap = std::function<Eigen::VectorXd(const Eigen::VectorXd& theta)>;

/**
 * Runs `config.chains` independent NUTS chains (multinomial trajectory
 * sampling, generalized no-U-turn criterion, dual-averaging step size and
 * windowed diagonal-metric adaptation). Chain c uses the engine derived from
 * (seed, c), so results do not depend on `jobs`.
 *
 * An init where the target is not finite is jittered uniformly by
 * +-init_jitter up to init_retries times; a chain that still fails raises
 * std::runtime_error naming the chain.
 */
PosteriorDraws sample(const LogDensity& target, const std::vector<Eigen::VectorXd>& inits,
                      const SamplerConfig& config, std::vector<std::string> names = {},
                      const OutputMap& output = {});

/// Hamiltonian of a position/momentum pair under a diagonal inverse metric.
double hamiltonian(double log_density, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inverse_metric);

/// One leapfrog step in place. Returns the new log density.
double leapfrog(const LogDensity& target, Eigen::VectorXd& position, Eigen::VectorXd& momentum,
                Eigen::VectorXd& gradient, const Eigen::VectorXd& inverse_metric, double epsilon);

}  // namespace rtestim::sampler

#endif  // RTESTIM_SAMPLER_NUTS_HPP
