#include "rtestim/cli/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rtestim/core/format.hpp"
#include "rtestim/core/random.hpp"
#include "rtestim/metrics/metrics.hpp"
#include "rtestim/models/gamma_model.hpp"
#include "rtestim/models/normal_model.hpp"

namespace rtestim::cli {

using nlohmann::json;
using core::format_number;

// ---------------------------------------------------------------- hashing and manifests

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

void RunManifest::add_input(const fs::path& path) {
  inputs.emplace_back(path.string(), sha256_file(path));
}

json RunManifest::to_json() const {
  json in = json::array();
  for (const auto& [path, digest] : inputs) in.push_back({{"path", path}, {"sha256", digest}});
  return {{"command", command}, {"config_digest", config_digest}, {"seed", seed},
          {"inputs", in},       {"outputs", outputs},             {"verdict", verdict},
          {"errors", errors},   {"details", details}};
}

void RunManifest::write(const fs::path& path) const { write_text(path, to_json().dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Method parse_method(const std::string& text) {
  for (auto m : {Method::gamma, Method::normal, Method::epiestim, Method::glm_pois, Method::glm_quasi})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown method '" + text +
                              "' (expected gamma, normal, epiestim, glm-pois or glm-quasi)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::gamma: return "gamma";
    case Method::normal: return "normal";
    case Method::epiestim: return "epiestim";
    case Method::glm_pois: return "glm-pois";
    case Method::glm_quasi: return "glm-quasi";
  }
  return "unknown";
}

bool is_renewal_model(Method method) { return method == Method::gamma || method == Method::normal; }

std::size_t resolve_jobs(std::optional<std::size_t> flag) {
  if (flag) return std::max<std::size_t>(1, *flag);
  if (const char* env = std::getenv("RT_ESTIM_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid RT_ESTIM_THREADS='" << env << "'\n";
  }
  return 1;
}

// ---------------------------------------------------------------- fits

double detection_prior_median(const models::PriorSet& priors, const core::ObservedSeries& series) {
  std::vector<double> tests;
  for (auto m : series.tests()) tests.push_back(static_cast<double>(m));
  return std::exp(priors.log_rho.mu) * sampler::quantile(tests, 0.5);
}

namespace {

std::vector<double> epiestim_medians(const core::ObservedSeries& series,
                                     const core::DiscretizedDelay& generation) {
  baselines::EpiEstimConfig config{1, 1.0, 5.0, generation};
  std::vector<double> medians;
  for (const auto& e : baselines::epiestim(baselines::cases_as_incidence(series), config))
    medians.push_back(e.defined ? e.median : std::nan(""));
  return medians;
}

Eigen::VectorXd natural_scale(const Eigen::VectorXd& theta) { return theta.array().exp(); }

Eigen::VectorXd unconstrained_row(const sampler::PosteriorDraws& draws, std::size_t chain,
                                  Eigen::Index row) {
  return draws.chains[chain].row(row).transpose().array().log();
}

std::vector<QuantileRow> block_summary(const ModelFit& fit, std::size_t first, std::size_t count) {
  std::vector<QuantileRow> rows;
  for (std::size_t t = 0; t < count; ++t) {
    auto values = fit.draws.pooled(first + t);
    std::sort(values.begin(), values.end());
    rows.push_back({fit.model->series().label(t), sampler::quantile_sorted(values, 0.5),
                    sampler::quantile_sorted(values, 0.025),
                    sampler::quantile_sorted(values, 0.975)});
  }
  return rows;
}

}  // namespace

ModelFit fit_renewal_model(const core::ObservedSeries& series, const models::ModelSpec& spec,
                           Method method, const sampler::SamplerConfig& config) {
  if (!is_renewal_model(method)) throw std::invalid_argument("not a renewal model method");
  ModelFit fit;
  Eigen::VectorXd init;
  if (method == Method::gamma) {
    auto cfg = models::build_gamma_config(spec, series);
    const auto medians = epiestim_medians(series, cfg.generation);
    const double detection = detection_prior_median(cfg.priors, series);
    auto model = std::make_unique<models::GammaModel>(std::move(cfg));
    init = model->pack(models::initialize_real_data(model->config(), medians, detection));
    fit.model = std::move(model);
  } else {
    auto cfg = models::build_normal_config(spec, series);
    const auto medians = epiestim_medians(series, cfg.generation);
    const double detection = detection_prior_median(spec.priors, series);
    auto model = std::make_unique<models::NormalModel>(std::move(cfg));
    init = model->pack(models::initialize_normal_model(model->config(), medians, detection));
    fit.model = std::move(model);
  }
  const models::RenewalModel& model = *fit.model;
  const auto target = [&model](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return model.log_density_gradient(theta, grad);
  };
  const std::vector<Eigen::VectorXd> inits(config.chains, init);
  fit.draws = sampler::sample(target, inits, config, model.parameter_names(), natural_scale);
  fit.diagnostics = sampler::diagnose(fit.draws);
  return fit;
}

std::vector<QuantileRow> rt_summary(const ModelFit& fit) {
  return block_summary(fit, fit.model->rt_offset(), fit.model->horizon());
}

std::vector<QuantileRow> incidence_summary(const ModelFit& fit) {
  return block_summary(fit, fit.model->seeding_length(), fit.model->horizon());
}

std::vector<PredictiveRow> posterior_predictive(const models::RenewalModel& model,
                                                const sampler::PosteriorDraws& draws,
                                                std::uint64_t seed) {
  auto engine = core::make_engine(seed, 7001);
  const std::size_t T = model.horizon();
  std::vector<std::vector<double>> samples(T);
  for (std::size_t c = 0; c < draws.chain_count(); ++c) {
    for (Eigen::Index i = 0; i < draws.chains[c].rows(); ++i) {
      const Eigen::VectorXd theta = unconstrained_row(draws, c, i);
      const auto mean = model.expected_cases(theta);
      const double dispersion = model.case_dispersion(theta);
      for (std::size_t t = 0; t < T; ++t)
        samples[t].push_back(static_cast<double>(sim::draw_neg_binomial(mean[t], dispersion, engine)));
    }
  }
  std::vector<PredictiveRow> rows;
  const auto cases = model.series().cases();
  for (std::size_t t = 0; t < T; ++t) {
    std::sort(samples[t].begin(), samples[t].end());
    PredictiveRow r{model.series().label(t), cases[t], sampler::quantile_sorted(samples[t], 0.5),
                    sampler::quantile_sorted(samples[t], 0.025),
                    sampler::quantile_sorted(samples[t], 0.975), false};
    const double obs = static_cast<double>(r.observed);
    r.covered = r.lower95 <= obs && obs <= r.upper95;
    rows.push_back(r);
  }
  return rows;
}

double predictive_coverage(const std::vector<PredictiveRow>& rows) {
  if (rows.empty()) return 0.0;
  const auto covered = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.covered; });
  return static_cast<double>(covered) / static_cast<double>(rows.size());
}

std::string quantile_csv(const std::vector<QuantileRow>& rows) {
  std::ostringstream out;
  out << "t,median,lower95,upper95\n";
  for (const auto& r : rows)
    out << r.label << ',' << format_number(r.median) << ',' << format_number(r.lower95) << ','
        << format_number(r.upper95) << '\n';
  return out.str();
}

std::string predictive_csv(const std::vector<PredictiveRow>& rows) {
  std::ostringstream out;
  out << "t,observed,median,lower95,upper95,covered\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.observed << ',' << format_number(r.median) << ','
        << format_number(r.lower95) << ',' << format_number(r.upper95) << ','
        << (r.covered ? 1 : 0) << '\n';
  return out.str();
}

sampler::PosteriorDraws read_draws_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "chain,iteration,parameter,value")
    throw std::runtime_error("draws CSV must start with 'chain,iteration,parameter,value'");
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  struct Entry {
    std::size_t chain, iteration, parameter;
    double value;
  };
  std::vector<Entry> entries;
  std::size_t chains = 0, iterations = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string c, i, p, v;
    if (!std::getline(row, c, ',') || !std::getline(row, i, ',') || !std::getline(row, p, ',') ||
        !std::getline(row, v))
      throw std::runtime_error("malformed draws row: " + line);
    auto [it, inserted] = index.emplace(p, names.size());
    if (inserted) names.push_back(p);
    const std::size_t chain = std::stoul(c), iteration = std::stoul(i);
    if (chain < 1 || iteration < 1) throw std::runtime_error("draws rows are 1-based: " + line);
    entries.push_back({chain - 1, iteration - 1, it->second, std::stod(v)});
    chains = std::max(chains, chain);
    iterations = std::max(iterations, iteration);
  }
  sampler::PosteriorDraws draws;
  draws.names = names;
  draws.chains.assign(chains, Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(iterations),
                                                        static_cast<Eigen::Index>(names.size()),
                                                        std::nan("")));
  for (const auto& e : entries)
    draws.chains[e.chain](static_cast<Eigen::Index>(e.iteration), static_cast<Eigen::Index>(e.parameter)) = e.value;
  for (const auto& m : draws.chains)
    if (!m.allFinite()) throw std::runtime_error("draws CSV is incomplete or contains non-finite values");
  return draws;
}

// ---------------------------------------------------------------- estimate

std::vector<baselines::WindowEstimate> run_baseline(const core::ObservedSeries& series,
                                                    const models::ModelSpec& spec, Method method,
                                                    const BaselineOptions& options,
                                                    std::uint64_t seed) {
  const auto incidence = baselines::cases_as_incidence(series);
  const auto generation = models::generation_weights(spec, series);
  switch (method) {
    case Method::epiestim: {
      baselines::EpiEstimConfig config{options.window, options.prior_shape, options.prior_scale,
                                       generation};
      if (options.gen_draws == 0) return baselines::epiestim(incidence, config);
      auto engine = core::make_engine(seed, 4242);
      const auto draws = baselines::sample_generation_draws(
          spec.generation.delay, options.gen_draws, options.gen_cv, generation.weights().size(),
          series.step(), engine);
      return baselines::epiestim_uncertain(incidence, config, draws);
    }
    case Method::glm_pois: return baselines::glm_poisson(incidence, options.window, generation);
    case Method::glm_quasi: return baselines::glm_quasipoisson(incidence, options.window, generation);
    default: throw std::invalid_argument("not a baseline method");
  }
}

namespace {

models::ModelSpec load_spec(const std::vector<fs::path>& files, RunManifest& manifest, json& merged) {
  std::vector<json> documents;
  for (const auto& f : files) {
    documents.push_back(models::read_json_file(f.string()));
    manifest.add_input(f);
  }
  merged = models::merge_documents(documents);
  return models::model_spec_from_json(merged);
}

json sampler_json(const sampler::SamplerConfig& s) {
  return {{"chains", s.chains},
          {"iterations", s.iterations},
          {"warmup", s.warmup},
          {"seed", s.seed},
          {"target_acceptance", s.target_acceptance},
          {"max_tree_depth", s.max_tree_depth}};
}

}  // namespace

int run_estimate(const EstimateRequest& request) {
  RunManifest manifest;
  manifest.command = "estimate";
  manifest.seed = request.sampler.seed;
  const auto series = core::read_series_csv_file(request.data.string(), request.index_step);
  manifest.add_input(request.data);
  json merged;
  const auto spec = load_spec(request.priors, manifest, merged);
  const json resolved = models::to_json(spec);
  json config = {{"method", to_string(request.method)}, {"spec", resolved}};
  if (is_renewal_model(request.method)) {
    config["sampler"] = sampler_json(request.sampler);
  } else {
    config["baseline"] = {{"window", request.baseline.window},
                          {"prior_shape", request.baseline.prior_shape},
                          {"prior_scale", request.baseline.prior_scale},
                          {"gen_draws", request.baseline.gen_draws},
                          {"gen_cv", request.baseline.gen_cv}};
    if (request.method == Method::epiestim && request.baseline.gen_draws > 0)
      config["baseline"]["seed"] = request.sampler.seed;
  }
  manifest.config_digest = sha256_hex(config.dump());
  fs::create_directories(request.out);
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(request.out / name, text);
    manifest.outputs.push_back(name);
  };

  int exit_code = 0;
  if (is_renewal_model(request.method)) {
    const auto fit = fit_renewal_model(series, spec, request.method, request.sampler);
    emit("rt.csv", quantile_csv(rt_summary(fit)));
    emit("incidence.csv", quantile_csv(incidence_summary(fit)));
    const auto predictive = posterior_predictive(*fit.model, fit.draws, request.sampler.seed);
    emit("predictive.csv", predictive_csv(predictive));
    json summary = sampler::summary_json(fit.draws, fit.diagnostics);
    summary["predictive_coverage"] = predictive_coverage(predictive);
    emit("summary.json", summary.dump(2) + "\n");
    emit("fit.json", config.dump(2) + "\n");
    if (request.write_draws) {
      std::ostringstream draws;
      sampler::write_draws_csv(draws, fit.draws);
      emit("draws.csv", draws.str());
    }
    manifest.details = {{"max_rhat", fit.diagnostics.max_rhat()},
                        {"min_ess_bulk", fit.diagnostics.min_ess_bulk()},
                        {"min_ess_tail", fit.diagnostics.min_ess_tail()},
                        {"divergences", fit.draws.total_divergences()},
                        {"predictive_coverage", predictive_coverage(predictive)}};
    if (!fit.diagnostics.converged()) {
      manifest.verdict = "not converged";
      manifest.errors.push_back(fit.diagnostics.verdict());
      std::cerr << "error: " << fit.diagnostics.verdict() << '\n';
      exit_code = 2;
    }
  } else {
    const auto estimates =
        run_baseline(series, spec, request.method, request.baseline, request.sampler.seed);
    std::ostringstream csv;
    baselines::write_estimates_csv(csv, series, estimates);
    emit("rt.csv", csv.str());
    const auto defined = std::count_if(estimates.begin(), estimates.end(),
                                       [](const auto& e) { return e.defined; });
    manifest.details = {{"estimates", defined}};
  }
  manifest.write(request.out / "manifest.json");
  return exit_code;
}

// ---------------------------------------------------------------- simulate

namespace {

core::ObservedSeries with_dates(const core::ObservedSeries& series, std::chrono::sys_days start) {
  return core::ObservedSeries(core::TimeLabel::date(start), series.step(),
                              {series.cases().begin(), series.cases().end()},
                              {series.tests().begin(), series.tests().end()});
}

std::string series_csv(const core::ObservedSeries& series) {
  std::ostringstream out;
  core::write_series_csv(out, series);
  return out.str();
}

std::string replicate_id(std::size_t r) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "rep%03zu", r + 1);
  return buffer;
}

}  // namespace

int run_simulate(const SimulateRequest& request) {
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.seed = request.seed;
  const auto scenario = sim::scenario_preset(request.scenario);
  json knots = json::array();
  for (const auto& [day, value] : request.seir.r0.knots()) knots.push_back({day, value});
  const json config = {{"scenario", scenario.to_json()},
                       {"replicates", request.replicates},
                       {"population", request.seir.population},
                       {"initial_infectious", request.seir.initial_infectious},
                       {"latent_mean_days", request.seir.latent_mean_days},
                       {"infectious_mean_days", request.seir.infectious_mean_days},
                       {"r0_knots_days", knots},
                       {"horizon_weeks", request.seir.horizon_weeks},
                       {"discard_weeks", request.seir.discard_weeks},
                       {"rho", request.emission.rho},
                       {"kappa", request.emission.kappa}};
  manifest.config_digest = sha256_hex(config.dump());
  manifest.details = config;
  fs::create_directories(request.out);

  const std::chrono::sys_days day_one{std::chrono::year{2020} / 1 / 1};
  std::vector<json> replicate_info(request.replicates);
  std::vector<std::vector<std::string>> outputs(request.replicates);
  std::vector<std::exception_ptr> errors(request.replicates);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < request.replicates; r = next++) {
      try {
        sim::SeirConfig seir = request.seir;
        seir.seed = core::derive_seed(request.seed, r);
        const auto truth = sim::simulate(seir, scenario, request.emission);
        const std::string id = replicate_id(r);
        const auto analysed_start = day_one + std::chrono::days{7 * seir.discard_weeks};
        std::ostringstream daily_truth, weekly_truth;
        sim::write_truth_csv(daily_truth, truth);
        sim::write_weekly_truth_csv(weekly_truth, truth);
        const std::vector<std::pair<std::string, std::string>> files = {
            {id + "_observed.csv", series_csv(with_dates(truth.weekly, analysed_start))},
            {id + "_full_weekly.csv",
             series_csv(with_dates(core::aggregate_weekly(truth.daily).series, day_one))},
            {id + "_daily.csv", series_csv(with_dates(truth.daily, day_one))},
            {id + "_truth.csv", daily_truth.str()},
            {id + "_weekly_truth.csv", weekly_truth.str()}};
        for (const auto& [name, text] : files) {
          write_text(request.out / name, text);
          outputs[r].push_back(name);
        }
        replicate_info[r] = {{"id", id},
                             {"seed", seir.seed},
                             {"extinct_before_analysis", truth.extinct_before_analysis}};
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(request.jobs, request.replicates);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& o : outputs) manifest.outputs.insert(manifest.outputs.end(), o.begin(), o.end());
  manifest.details["replicate_runs"] = replicate_info;
  for (const auto& info : replicate_info)
    if (info["extinct_before_analysis"].get<bool>())
      manifest.errors.push_back(info["id"].get<std::string>() + ": epidemic went extinct before the analysed weeks");
  manifest.write(request.out / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------- elicit

int run_elicit(const ElicitRequest& request) {
  RunManifest manifest;
  manifest.command = "elicit";
  manifest.seed = request.spline.sampler.seed;
  const auto series = core::read_series_csv_file(request.data.string(), request.index_step);
  manifest.add_input(request.data);
  const bool held_out = request.kappa_data.has_value();
  std::optional<core::ObservedSeries> kappa_series;
  if (held_out) {
    kappa_series = core::read_series_csv_file(request.kappa_data->string(), request.index_step);
    manifest.add_input(*request.kappa_data);
  }
  const json config = {{"mode", held_out ? "held-out" : "same-data"},
                       {"overall_low", request.detection.overall_low},
                       {"overall_high", request.detection.overall_high},
                       {"test_quantile", request.detection.test_quantile},
                       {"knots", request.spline.knot_count},
                       {"difference_penalty", request.spline.difference_penalty},
                       {"ridge_penalty", request.spline.ridge_penalty},
                       {"kappa_cap", request.spline.kappa_cap},
                       {"sampler", sampler_json(request.spline.sampler)}};
  manifest.config_digest = sha256_hex(config.dump());

  const auto rho = priors::elicit_rho(series.tests(), request.detection);
  const auto& counts_series = held_out ? *kappa_series : series;
  int exit_code = 0;
  json fragment;
  try {
    const auto kappa = priors::elicit_kappa(counts_series.cases(), request.spline);
    fragment = priors::prior_fragment(&rho, &kappa.prior);
    manifest.details = {{"mode", config["mode"]},
                        {"kappa_capped", kappa.capped},
                        {"kappa_posterior_quantiles", kappa.posterior_quantiles},
                        {"spline_max_rhat", kappa.fit.diagnostics.max_rhat()},
                        {"spline_min_ess_bulk", kappa.fit.diagnostics.min_ess_bulk()}};
  } catch (const priors::NonConvergenceError& e) {
    manifest.verdict = "not converged";
    manifest.errors.push_back(e.what());
    std::cerr << "error: " << e.what() << '\n';
    fragment = priors::prior_fragment(&rho, nullptr);
    exit_code = 2;
  }
  write_text(request.out, fragment.dump(2) + "\n");
  manifest.outputs.push_back(request.out.filename().string());
  fs::path manifest_path = request.out;
  manifest_path.replace_extension(".manifest.json");
  manifest.write(manifest_path);
  return exit_code;
}

// ---------------------------------------------------------------- evaluate

int run_evaluate(const EvaluateRequest& request) {
  RunManifest manifest;
  manifest.command = "evaluate";
  if (request.methods.empty()) throw std::invalid_argument("no methods to evaluate");
  std::vector<std::string> replicates;
  const std::string suffix = "_weekly_truth.csv";
  for (const auto& entry : fs::directory_iterator(request.truth)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix))
      replicates.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(replicates.begin(), replicates.end());
  manifest.config_digest =
      sha256_hex(json{{"methods", request.methods}, {"scenario", request.scenario}}.dump());

  std::vector<metrics::MetricRow> rows;
  for (const auto& rep : replicates) {
    const fs::path truth_path = request.truth / (rep + suffix);
    std::ifstream truth_in(truth_path);
    const auto truth = sim::read_weekly_truth_csv(truth_in);
    manifest.add_input(truth_path);
    std::vector<metrics::EstimateSeries> estimates;
    bool complete = true;
    for (const auto& method : request.methods) {
      const fs::path path = request.estimates / method / rep / "rt.csv";
      if (!fs::exists(path)) {
        manifest.errors.push_back("missing estimate for replicate " + rep + ", method " + method);
        complete = false;
        continue;
      }
      std::ifstream in(path);
      estimates.push_back(metrics::read_estimate_csv(in));
      manifest.add_input(path);
    }
    if (!complete) continue;
    try {
      const auto r = metrics::evaluate_replicate(request.methods, estimates, truth.rt,
                                                 request.scenario, rep);
      rows.insert(rows.end(), r.begin(), r.end());
    } catch (const std::exception& e) {
      manifest.errors.push_back("replicate " + rep + ": " + e.what());
    }
  }

  std::ostringstream csv;
  csv << "method,scenario,replicate,envelope,mciw,abs_dev,masv,truth_masv\n";
  for (const auto& r : rows)
    csv << r.method << ',' << r.scenario << ',' << r.replicate << ',' << format_number(r.envelope)
        << ',' << format_number(r.mciw) << ',' << format_number(r.abs_dev) << ','
        << format_number(r.masv) << ',' << format_number(r.truth_masv) << '\n';
  fs::create_directories(request.out);
  write_text(request.out / "metrics.csv", csv.str());

  json boxplots = json::object();
  for (const auto& method : request.methods) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      values["envelope"].push_back(r.envelope);
      values["mciw"].push_back(r.mciw);
      values["abs_dev"].push_back(r.abs_dev);
      values["masv"].push_back(r.masv);
      values["truth_masv"].push_back(r.truth_masv);
    }
    json entry = json::object();
    for (const auto& [metric, v] : values) entry[metric] = metrics::to_json(metrics::summarize_replicates(v));
    boxplots[method] = entry;
  }
  write_text(request.out / "boxplot-data.json",
             json{{"scenario", request.scenario}, {"methods", boxplots}}.dump(2) + "\n");
  manifest.outputs = {"metrics.csv", "boxplot-data.json"};
  if (!manifest.errors.empty()) manifest.verdict = "incomplete";
  manifest.write(request.out / "manifest.json");
  return manifest.errors.empty() ? 0 : 3;
}

// ---------------------------------------------------------------- predict

int run_predict(const PredictRequest& request) {
  RunManifest manifest;
  manifest.command = "predict";
  manifest.seed = request.seed;
  const fs::path fit_path = request.fit / "fit.json";
  const fs::path draws_path = request.fit / "draws.csv";
  const json fit = models::read_json_file(fit_path.string());
  manifest.add_input(fit_path);
  manifest.add_input(draws_path);
  manifest.add_input(request.data);
  manifest.config_digest = sha256_hex(fit.dump());
  const auto series = core::read_series_csv_file(request.data.string(), request.index_step);
  const auto spec = models::model_spec_from_json(fit.at("spec"));
  const Method method = parse_method(fit.at("method").get<std::string>());
  std::ifstream in(draws_path);
  const auto draws = read_draws_csv(in);

  std::unique_ptr<models::RenewalModel> model;
  if (method == Method::gamma)
    model = std::make_unique<models::GammaModel>(models::build_gamma_config(spec, series));
  else if (method == Method::normal)
    model = std::make_unique<models::NormalModel>(models::build_normal_config(spec, series));
  else
    throw std::invalid_argument("posterior prediction needs a gamma or normal fit");
  if (draws.names != model->parameter_names())
    throw std::runtime_error("draws do not match the model implied by the data and fit");

  const auto rows = posterior_predictive(*model, draws, request.seed);
  write_text(request.out, predictive_csv(rows));
  manifest.outputs.push_back(request.out.filename().string());
  manifest.details = {{"coverage", predictive_coverage(rows)}};
  fs::path manifest_path = request.out;
  manifest_path.replace_extension(".manifest.json");
  manifest.write(manifest_path);
  return 0;
}

}  // namespace rtestim::cli
