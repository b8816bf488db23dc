#ifndef RTESTIM_CLI_PIPELINE_HPP
#define RTESTIM_CLI_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtestim/baselines/baselines.hpp"
#include "rtestim/core/series.hpp"
#include "rtestim/models/config_io.hpp"
#include "rtestim/models/model.hpp"
#include "rtestim/priors/elicitation.hpp"
#include "rtestim/sampler/diagnostics.hpp"
#include "rtestim/sampler/nuts.hpp"
#include "rtestim/sim/seir.hpp"

namespace rtestim::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Record of one command invocation; written as manifest.json next to the outputs.
struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;  // relative to the manifest directory
  std::string verdict = "ok";
  std::vector<std::string> errors;
  nlohmann::json details = nlohmann::json::object();

  void add_input(const fs::path& path);
  nlohmann::json to_json() const;
  void write(const fs::path& path) const;
};

/// Writes text to a file, creating parent directories.
void write_text(const fs::path& path, const std::string& text);

enum class Method { gamma, normal, epiestim, glm_pois, glm_quasi };
Method parse_method(const std::string& text);
std::string to_string(Method method);
bool is_renewal_model(Method method);

// ---------------------------------------------------------------- model fits

struct ModelFit {
  std::unique_ptr<models::RenewalModel> model;
  sampler::PosteriorDraws draws;  // natural-scale parameters
  sampler::Diagnostics diagnostics;
};

/// Detection median implied by the rho prior at the median test count.
double detection_prior_median(const models::PriorSet& priors, const core::ObservedSeries& series);

/// Builds the model, derives starting values from EpiEstim and the priors, and samples.
ModelFit fit_renewal_model(const core::ObservedSeries& series, const models::ModelSpec& spec,
                           Method method, const sampler::SamplerConfig& config);

struct QuantileRow {
  std::string label;
  double median;
  double lower95;
  double upper95;
};

/// Posterior quantiles of R[t] (t = 1..T) and I[t] (observed period only).
std::vector<QuantileRow> rt_summary(const ModelFit& fit);
std::vector<QuantileRow> incidence_summary(const ModelFit& fit);

struct PredictiveRow {
  std::string label;
  std::int64_t observed;
  double median;
  double lower95;
  double upper95;
  bool covered;
};

/// One negative-binomial case draw per posterior draw and time point.
std::vector<PredictiveRow> posterior_predictive(const models::RenewalModel& model,
                                                const sampler::PosteriorDraws& draws,
                                                std::uint64_t seed);
double predictive_coverage(const std::vector<PredictiveRow>& rows);

std::string quantile_csv(const std::vector<QuantileRow>& rows);
std::string predictive_csv(const std::vector<PredictiveRow>& rows);

/// Long-format draws CSV back into PosteriorDraws (status left empty).
sampler::PosteriorDraws read_draws_csv(std::istream& in);

// ---------------------------------------------------------------- commands

struct BaselineOptions {
  std::size_t window = 1;
  double prior_shape = 1.0;
  double prior_scale = 5.0;
  std::size_t gen_draws = 100;  // 0 keeps the generation time fixed
  double gen_cv = 0.2;
};

std::vector<baselines::WindowEstimate> run_baseline(const core::ObservedSeries& series,
                                                    const models::ModelSpec& spec, Method method,
                                                    const BaselineOptions& options,
                                                    std::uint64_t seed);

struct EstimateRequest {
  fs::path data;
  std::vector<fs::path> priors;
  Method method = Method::gamma;
  core::TimeStep index_step = core::TimeStep::weekly;
  sampler::SamplerConfig sampler;
  BaselineOptions baseline;
  bool write_draws = true;
  fs::path out;
};

/// Returns the process exit code: 0 on success, 2 when the fit failed the convergence gate.
int run_estimate(const EstimateRequest& request);

struct SimulateRequest {
  std::string scenario = "s1";
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  sim::SeirConfig seir;
  sim::Emission emission;
  fs::path out;
};
int run_simulate(const SimulateRequest& request);

struct ElicitRequest {
  fs::path data;
  std::optional<fs::path> kappa_data;  // held-out series; absent means same-data mode
  core::TimeStep index_step = core::TimeStep::weekly;
  priors::DetectionPriorSpec detection;
  priors::SplineFitConfig spline;
  fs::path out;  // JSON file
};
int run_elicit(const ElicitRequest& request);

struct EvaluateRequest {
  fs::path estimates;  // <estimates>/<method>/<replicate>/rt.csv
  fs::path truth;      // <truth>/<replicate>_weekly_truth.csv
  std::vector<std::string> methods;
  std::string scenario = "custom";
  fs::path out;
};
int run_evaluate(const EvaluateRequest& request);

struct PredictRequest {
  fs::path fit;  // an estimate output directory of a renewal model
  fs::path data;
  core::TimeStep index_step = core::TimeStep::weekly;
  std::uint64_t seed = 1;
  fs::path out;
};
int run_predict(const PredictRequest& request);

/// Jobs from the flag, else RT_ESTIM_THREADS, else 1.
std::size_t resolve_jobs(std::optional<std::size_t> flag);

}  // namespace rtestim::cli

#endif  // RTESTIM_CLI_PIPELINE_HPP
