#ifndef RTESTIM_MODELS_CONFIG_IO_HPP
#define RTESTIM_MODELS_CONFIG_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rtestim/core/delay.hpp"
#include "rtestim/models/priors.hpp"

namespace rtestim::models {

/// A continuous delay plus the number of discretized weights to keep.
struct DelaySpec {
  core::ContinuousDelay delay;
  std::optional<std::size_t> length;  // defaults to the series horizon
};

/**
 * Everything except the data needed to build either renewal model.
 *
 * JSON layout (all fields optional, unknown fields rejected):
 *   {
 *     "seeding_length": 6,
 *     "generation": {"family": "hypoexponential", "parameters": [0.25, 0.1333], "length": 20},
 *     "latent":     {"family": "exponential", "parameters": [0.25]},
 *     "priors": {
 *       "log_nu": {"mu": -2, "sigma": 0.7}, "log_sigma": {...}, "lambda_rate": 0.3,
 *       "log_r1": {...}, "log_rho": {...}, "kappa": {...}
 *     },
 *     "normal_priors": {
 *       "sigma": {...}, "lambda_rate": 0.3, "log_r1": {...}, "psi": {...},
 *       "alpha": {...}, "inv_phi": {...}
 *     }
 *   }
 * Delay parameters are in days; "seeding_length" applies to both models.
 */
struct ModelSpec {
  PriorSet priors;
  NormalModelPriors normal_priors;
  DelaySpec generation{core::ContinuousDelay::hypoexponential(1.0 / 4.0, 1.0 / 7.5), std::nullopt};
  DelaySpec latent{core::ContinuousDelay::exponential(1.0 / 4.0), std::nullopt};
  std::optional<std::size_t> seeding_length;  // default: 0.99-mass generation support
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& document);

/// Reads and merges (RFC 7386 merge patch, in order) several JSON documents.
nlohmann::json merge_documents(const std::vector<nlohmann::json>& documents);
nlohmann::json read_json_file(const std::string& path);

nlohmann::json to_json(const NormalPrior& prior);

/// Seeding length: explicit value, or the 0.99-mass support of the discretized generation time.
std::size_t resolve_seeding_length(const ModelSpec& spec, core::TimeStep step);

GammaModelConfig build_gamma_config(const ModelSpec& spec, const core::ObservedSeries& series);
NormalModelConfig build_normal_config(const ModelSpec& spec, const core::ObservedSeries& series);

/// Generation-time weights at the series step, as used by every estimator.
core::DiscretizedDelay generation_weights(const ModelSpec& spec, const core::ObservedSeries& series);

}  // namespace rtestim::models

#endif  // RTESTIM_MODELS_CONFIG_IO_HPP
