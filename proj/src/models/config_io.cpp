#include "rtestim/models/config_io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace rtestim::models {

using nlohmann::json;

namespace {

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!object.is_object()) throw std::runtime_error(where + " must be a JSON object");
  for (const auto& item : object.items())
    if (!allowed.contains(item.key()))
      throw std::runtime_error("unknown field '" + item.key() + "' in " + where);
}

double number(const json& value, const std::string& where) {
  if (!value.is_number()) throw std::runtime_error(where + " must be a number");
  return value.get<double>();
}

NormalPrior read_prior(const json& object, NormalPrior current, const std::string& where) {
  reject_unknown(object, {"mu", "sigma"}, where);
  if (object.contains("mu")) current.mu = number(object["mu"], where + ".mu");
  if (object.contains("sigma")) current.sigma = number(object["sigma"], where + ".sigma");
  return current;
}

std::size_t count(const json& value, const std::string& where) {
  if (!value.is_number_integer() || value.get<long long>() < 1)
    throw std::runtime_error(where + " must be a positive integer");
  return value.get<std::size_t>();
}

json delay_json(const DelaySpec& spec) {
  json out;
  out["family"] = core::to_string(spec.delay.family());
  out["parameters"] = std::vector<double>(spec.delay.parameters().begin(),
                                          spec.delay.parameters().end());
  if (spec.length) out["length"] = *spec.length;
  return out;
}

DelaySpec read_delay(const json& object, const DelaySpec& current, const std::string& where) {
  reject_unknown(object, {"family", "parameters", "length"}, where);
  DelaySpec out = current;
  core::DelayFamily family = current.delay.family();
  std::vector<double> parameters(current.delay.parameters().begin(),
                                 current.delay.parameters().end());
  if (object.contains("family")) {
    if (!object["family"].is_string()) throw std::runtime_error(where + ".family must be a string");
    family = core::parse_delay_family(object["family"].get<std::string>());
    if (!object.contains("parameters"))
      throw std::runtime_error(where + ": changing the family requires parameters");
  }
  if (object.contains("parameters")) {
    if (!object["parameters"].is_array())
      throw std::runtime_error(where + ".parameters must be an array");
    parameters.clear();
    for (const auto& p : object["parameters"]) parameters.push_back(number(p, where + ".parameters"));
  }
  out.delay = core::ContinuousDelay(family, parameters);
  if (object.contains("length")) out.length = count(object["length"], where + ".length");
  return out;
}

}  // namespace

json to_json(const NormalPrior& prior) { return json{{"mu", prior.mu}, {"sigma", prior.sigma}}; }

json to_json(const ModelSpec& spec) {
  json out;
  if (spec.seeding_length) out["seeding_length"] = *spec.seeding_length;
  out["generation"] = delay_json(spec.generation);
  out["latent"] = delay_json(spec.latent);
  const auto& p = spec.priors;
  out["priors"] = {{"log_nu", to_json(p.log_nu)},   {"log_sigma", to_json(p.log_sigma)},
                   {"lambda_rate", p.lambda_rate},  {"log_r1", to_json(p.log_r1)},
                   {"log_rho", to_json(p.log_rho)}, {"kappa", to_json(p.kappa)}};
  const auto& q = spec.normal_priors;
  out["normal_priors"] = {{"sigma", to_json(q.sigma)},   {"lambda_rate", q.lambda_rate},
                          {"log_r1", to_json(q.log_r1)}, {"psi", to_json(q.psi)},
                          {"alpha", to_json(q.alpha)},   {"inv_phi", to_json(q.inv_phi)}};
  return out;
}

ModelSpec model_spec_from_json(const json& document) {
  ModelSpec spec;
  reject_unknown(document, {"seeding_length", "generation", "latent", "priors", "normal_priors"},
                 "model spec");
  if (document.contains("seeding_length"))
    spec.seeding_length = count(document["seeding_length"], "seeding_length");
  if (document.contains("generation"))
    spec.generation = read_delay(document["generation"], spec.generation, "generation");
  if (document.contains("latent"))
    spec.latent = read_delay(document["latent"], spec.latent, "latent");
  if (document.contains("priors")) {
    const json& p = document["priors"];
    reject_unknown(p, {"log_nu", "log_sigma", "lambda_rate", "log_r1", "log_rho", "kappa"},
                   "priors");
    auto& s = spec.priors;
    if (p.contains("log_nu")) s.log_nu = read_prior(p["log_nu"], s.log_nu, "priors.log_nu");
    if (p.contains("log_sigma"))
      s.log_sigma = read_prior(p["log_sigma"], s.log_sigma, "priors.log_sigma");
    if (p.contains("lambda_rate")) s.lambda_rate = number(p["lambda_rate"], "priors.lambda_rate");
    if (p.contains("log_r1")) s.log_r1 = read_prior(p["log_r1"], s.log_r1, "priors.log_r1");
    if (p.contains("log_rho")) s.log_rho = read_prior(p["log_rho"], s.log_rho, "priors.log_rho");
    if (p.contains("kappa")) s.kappa = read_prior(p["kappa"], s.kappa, "priors.kappa");
  }
  if (document.contains("normal_priors")) {
    const json& p = document["normal_priors"];
    reject_unknown(p, {"sigma", "lambda_rate", "log_r1", "psi", "alpha", "inv_phi"},
                   "normal_priors");
    auto& s = spec.normal_priors;
    if (p.contains("sigma")) s.sigma = read_prior(p["sigma"], s.sigma, "normal_priors.sigma");
    if (p.contains("lambda_rate"))
      s.lambda_rate = number(p["lambda_rate"], "normal_priors.lambda_rate");
    if (p.contains("log_r1")) s.log_r1 = read_prior(p["log_r1"], s.log_r1, "normal_priors.log_r1");
    if (p.contains("psi")) s.psi = read_prior(p["psi"], s.psi, "normal_priors.psi");
    if (p.contains("alpha")) s.alpha = read_prior(p["alpha"], s.alpha, "normal_priors.alpha");
    if (p.contains("inv_phi"))
      s.inv_phi = read_prior(p["inv_phi"], s.inv_phi, "normal_priors.inv_phi");
  }
  if (spec.seeding_length) {
    spec.priors.seeding_length = *spec.seeding_length;
    spec.normal_priors.seeding_length = *spec.seeding_length;
  }
  spec.priors.validate();
  spec.normal_priors.validate();
  return spec;
}

json merge_documents(const std::vector<json>& documents) {
  json merged = json::object();
  for (const auto& doc : documents) {
    if (!doc.is_object()) throw std::runtime_error("prior documents must be JSON objects");
    merged.merge_patch(doc);
  }
  return merged;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::size_t resolve_seeding_length(const ModelSpec& spec, core::TimeStep step) {
  if (spec.seeding_length) return *spec.seeding_length;
  const std::size_t horizon = step == core::TimeStep::daily ? 365 : 60;
  const auto g = core::discretize_at_step(spec.generation.delay, horizon, 1, step);
  return support_length(g, 0.99);
}

namespace {

std::size_t delay_length(const DelaySpec& spec, std::size_t seeding, std::size_t horizon) {
  // Lags up to n + T - 1 are needed by the renewal and emission sums.
  return spec.length.value_or(seeding + horizon);
}

}  // namespace

core::DiscretizedDelay generation_weights(const ModelSpec& spec,
                                          const core::ObservedSeries& series) {
  const std::size_t n = resolve_seeding_length(spec, series.step());
  return core::discretize_at_step(spec.generation.delay,
                                  delay_length(spec.generation, n, series.size()), 1,
                                  series.step());
}

GammaModelConfig build_gamma_config(const ModelSpec& spec, const core::ObservedSeries& series) {
  PriorSet priors = spec.priors;
  priors.seeding_length = resolve_seeding_length(spec, series.step());
  const std::size_t n = priors.seeding_length;
  auto latent = core::discretize_at_step(spec.latent.delay,
                                         delay_length(spec.latent, n, series.size()), 0,
                                         series.step());
  return GammaModelConfig{priors, generation_weights(spec, series), std::move(latent), series};
}

NormalModelConfig build_normal_config(const ModelSpec& spec, const core::ObservedSeries& series) {
  NormalModelPriors priors = spec.normal_priors;
  priors.seeding_length = resolve_seeding_length(spec, series.step());
  const std::size_t n = priors.seeding_length;
  auto latent = core::discretize_at_step(spec.latent.delay,
                                         delay_length(spec.latent, n, series.size()), 0,
                                         series.step());
  return NormalModelConfig{priors, generation_weights(spec, series), std::move(latent), series};
}

}  // namespace rtestim::models
