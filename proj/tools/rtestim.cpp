// Command-line front end: simulate, estimate, elicit, evaluate and predict.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtestim/cli/pipeline.hpp"

namespace {

using namespace rtestim;

core::TimeStep parse_step(const std::string& text) {
  if (text == "weekly") return core::TimeStep::weekly;
  if (text == "daily") return core::TimeStep::daily;
  throw CLI::ValidationError("--step", "expected 'daily' or 'weekly'");
}

void add_sampler_options(CLI::App& cmd, sampler::SamplerConfig& s, std::optional<std::size_t>& jobs) {
  cmd.add_option("--chains", s.chains, "Number of chains")->capture_default_str();
  cmd.add_option("--iterations", s.iterations, "Iterations per chain including warmup")
      ->capture_default_str();
  cmd.add_option("--warmup", s.warmup, "Warmup iterations per chain")->capture_default_str();
  cmd.add_option("--seed", s.seed, "Random seed")->capture_default_str();
  cmd.add_option("--adapt-delta", s.target_acceptance, "Target acceptance statistic")
      ->capture_default_str();
  cmd.add_option("--max-depth", s.max_tree_depth, "Maximum NUTS tree depth")->capture_default_str();
  cmd.add_option("--jobs", jobs, "Worker threads (default: RT_ESTIM_THREADS or 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rt estimation from test-adjusted case counts"};
  app.require_subcommand(1);

  // estimate
  cli::EstimateRequest est;
  std::string est_method = "gamma", est_step = "weekly";
  std::optional<std::size_t> est_jobs;
  bool no_draws = false;
  auto* estimate = app.add_subcommand("estimate", "Estimate Rt from a case/test series");
  estimate->add_option("--data", est.data, "Input CSV (date or index, cases, tests)")->required();
  estimate->add_option("--priors", est.priors, "Prior/config JSON files, merged left to right");
  estimate->add_option("--method", est_method, "gamma, normal, epiestim, glm-pois or glm-quasi")
      ->capture_default_str();
  estimate->add_option("--step", est_step, "Time step for integer-indexed input")->capture_default_str();
  estimate->add_option("--window", est.baseline.window, "Baseline smoothing window")->capture_default_str();
  estimate->add_option("--prior-shape", est.baseline.prior_shape, "EpiEstim gamma prior shape")
      ->capture_default_str();
  estimate->add_option("--prior-scale", est.baseline.prior_scale, "EpiEstim gamma prior scale")
      ->capture_default_str();
  estimate->add_option("--gen-draws", est.baseline.gen_draws,
                       "EpiEstim generation-time draws (0 keeps it fixed)")
      ->capture_default_str();
  estimate->add_option("--gen-cv", est.baseline.gen_cv, "CV of the generation-time parameter draws")
      ->capture_default_str();
  estimate->add_flag("--no-draws", no_draws, "Do not write draws.csv");
  add_sampler_options(*estimate, est.sampler, est_jobs);
  estimate->add_option("--out", est.out, "Output directory")->required();

  // simulate
  cli::SimulateRequest simr;
  std::optional<std::size_t> sim_jobs;
  auto* simulate = app.add_subcommand("simulate", "Simulate SEIR epidemics with testing scenarios");
  simulate->add_option("--scenario", simr.scenario, "s1, s2 or s3")->capture_default_str();
  simulate->add_option("--replicates", simr.replicates, "Number of replicates")->capture_default_str();
  simulate->add_option("--seed", simr.seed, "Random seed")->capture_default_str();
  simulate->add_option("--population", simr.seir.population)->capture_default_str();
  simulate->add_option("--rho", simr.emission.rho, "Per-test detection scale")->capture_default_str();
  simulate->add_option("--kappa", simr.emission.kappa, "Daily case overdispersion")->capture_default_str();
  simulate->add_option("--jobs", sim_jobs, "Worker threads (default: RT_ESTIM_THREADS or 1)");
  simulate->add_option("--out", simr.out, "Output directory")->required();

  // elicit
  cli::ElicitRequest eli;
  std::string eli_step = "weekly";
  std::string kappa_data;
  std::optional<std::size_t> eli_jobs;
  auto* elicit = app.add_subcommand("elicit", "Elicit rho and kappa priors from data");
  elicit->add_option("--data", eli.data, "Series used for the rho prior")->required();
  elicit->add_option("--kappa-data", kappa_data,
                     "Held-out series for the kappa prior (default: --data)");
  elicit->add_option("--step", eli_step)->capture_default_str();
  elicit->add_option("--detection-low", eli.detection.overall_low)->capture_default_str();
  elicit->add_option("--detection-high", eli.detection.overall_high)->capture_default_str();
  elicit->add_option("--test-quantile", eli.detection.test_quantile)->capture_default_str();
  elicit->add_option("--knots", eli.spline.knot_count)->capture_default_str();
  elicit->add_option("--kappa-cap", eli.spline.kappa_cap)->capture_default_str();
  add_sampler_options(*elicit, eli.spline.sampler, eli_jobs);
  elicit->add_option("--out", eli.out, "Output JSON file")->required();

  // evaluate
  cli::EvaluateRequest eva;
  auto* evaluate = app.add_subcommand("evaluate", "Score estimates against simulation truth");
  evaluate->add_option("--estimates", eva.estimates, "Directory <method>/<replicate>/rt.csv")->required();
  evaluate->add_option("--truth", eva.truth, "Directory of <replicate>_weekly_truth.csv")->required();
  evaluate->add_option("--methods", eva.methods, "Method names to compare")->required();
  evaluate->add_option("--scenario", eva.scenario)->capture_default_str();
  evaluate->add_option("--out", eva.out, "Output directory")->required();

  // predict
  cli::PredictRequest pre;
  std::string pre_step = "weekly";
  auto* predict = app.add_subcommand("predict", "Posterior predictive check from a saved fit");
  predict->add_option("--fit", pre.fit, "Estimate output directory")->required();
  predict->add_option("--data", pre.data, "The series the fit was made on")->required();
  predict->add_option("--step", pre_step)->capture_default_str();
  predict->add_option("--seed", pre.seed)->capture_default_str();
  predict->add_option("--out", pre.out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (estimate->parsed()) {
      est.method = cli::parse_method(est_method);
      est.index_step = parse_step(est_step);
      est.write_draws = !no_draws;
      est.sampler.jobs = cli::resolve_jobs(est_jobs);
      est.sampler.validate();
      return cli::run_estimate(est);
    }
    if (simulate->parsed()) {
      simr.jobs = cli::resolve_jobs(sim_jobs);
      return cli::run_simulate(simr);
    }
    if (elicit->parsed()) {
      eli.index_step = parse_step(eli_step);
      if (!kappa_data.empty()) eli.kappa_data = kappa_data;
      eli.spline.sampler.jobs = cli::resolve_jobs(eli_jobs);
      eli.spline.sampler.validate();
      return cli::run_elicit(eli);
    }
    if (evaluate->parsed()) return cli::run_evaluate(eva);
    if (predict->parsed()) {
      pre.index_step = parse_step(pre_step);
      return cli::run_predict(pre);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
