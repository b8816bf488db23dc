#include "rtestim/sampler/nuts.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace rtestim::sampler {

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("need at least one chain");
  if (iterations < 1) throw std::invalid_argument("need at least one iteration");
  if (warmup < 1 || warmup >= iterations)
    throw std::invalid_argument("warmup must be positive and smaller than iterations");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("max tree depth must be positive");
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
}

std::size_t PosteriorDraws::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no parameter named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> PosteriorDraws::pooled(std::size_t parameter) const {
  std::vector<double> out;
  out.reserve(chain_count() * iterations());
  for (const auto& c : chains)
    for (Eigen::Index i = 0; i < c.rows(); ++i) out.push_back(c(i, static_cast<Eigen::Index>(parameter)));
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(std::size_t parameter) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    std::vector<double> v(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index i = 0; i < c.rows(); ++i) v[static_cast<std::size_t>(i)] = c(i, static_cast<Eigen::Index>(parameter));
    out.push_back(std::move(v));
  }
  return out;
}

std::size_t PosteriorDraws::total_divergences() const {
  std::size_t total = 0;
  for (const auto& s : status) total += s.divergences;
  return total;
}

double hamiltonian(double log_density, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inverse_metric) {
  return -log_density + 0.5 * momentum.dot(inverse_metric.cwiseProduct(momentum));
}

double leapfrog(const LogDensity& target, Eigen::VectorXd& position, Eigen::VectorXd& momentum,
                Eigen::VectorXd& gradient, const Eigen::VectorXd& inverse_metric, double epsilon) {
  momentum += 0.5 * epsilon * gradient;
  position += epsilon * inverse_metric.cwiseProduct(momentum);
  const double lp = target(position, gradient);
  momentum += 0.5 * epsilon * gradient;
  return lp;
}

namespace {

constexpr double kMaxDeltaH = 1000.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd g;
  double lp = 0.0;
};

class DualAveraging {
public:
  DualAveraging(double delta) : delta_(delta) {}
  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  void learn(double& epsilon, double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    epsilon = std::exp(x);
  }
  double final_stepsize() const { return std::exp(x_bar_); }

private:
  double delta_;
  double mu_ = std::log(10.0);
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  static constexpr double gamma_ = 0.05;
  static constexpr double t0_ = 10.0;
  static constexpr double kappa_ = 0.75;
};

// Welford accumulator for the diagonal of the covariance.
class VarianceEstimator {
public:
  explicit VarianceEstimator(Eigen::Index dim) : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}
  void restart() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }
  void add(const Eigen::VectorXd& q) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(q - mean_);
  }
  std::size_t count() const { return n_; }
  Eigen::VectorXd variance() const { return m2_ / (static_cast<double>(n_) - 1.0); }

private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

// Windowed adaptation schedule: a fast initial buffer, doubling slow windows
// for the metric, and a final fast buffer for the step size only.
class WindowedAdaptation {
public:
  WindowedAdaptation(std::size_t warmup, Eigen::Index dim) : warmup_(warmup), estimator_(dim) {
    if (warmup < 20) {
      active_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
      term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup));
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when the metric was updated.
  bool learn(Eigen::VectorXd& inverse_metric, const Eigen::VectorXd& q) {
    if (!active_) return false;
    if (in_window()) estimator_.add(q);
    if (at_window_end()) {
      compute_next_window();
      const double n = static_cast<double>(estimator_.count());
      inverse_metric = (n / (n + 5.0)) * estimator_.variance().array() + 1e-3 * (5.0 / (n + 5.0));
      estimator_.restart();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool at_window_end() const { return counter_ == next_window_ && counter_ != warmup_; }
  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  std::size_t warmup_;
  bool active_ = true;
  std::size_t init_buffer_ = 75;
  std::size_t term_buffer_ = 50;
  std::size_t base_window_ = 25;
  std::size_t window_size_ = 0;
  std::size_t next_window_ = 0;
  std::size_t counter_ = 0;
  VarianceEstimator estimator_;
};

class Chain {
public:
  Chain(const LogDensity& target, const SamplerConfig& config, std::size_t index)
      : target_(target), config_(config), engine_(core::make_engine(config.seed, index)) {}

  void initialize(const Eigen::VectorXd& init, std::size_t index) {
    std::uniform_real_distribution<double> jitter(-config_.init_jitter, config_.init_jitter);
    z_.q = init;
    z_.g.resize(init.size());
    for (int attempt = 0; attempt <= config_.init_retries; ++attempt) {
      if (attempt > 0) {
        z_.q = init;
        for (Eigen::Index i = 0; i < z_.q.size(); ++i) z_.q[i] += jitter(engine_);
      }
      status_.init_attempts = attempt + 1;
      z_.lp = evaluate(z_.q, z_.g);
      if (std::isfinite(z_.lp) && z_.g.allFinite()) return;
    }
    throw std::runtime_error("chain " + std::to_string(index + 1) +
                             ": log density is not finite at the initial values after " +
                             std::to_string(config_.init_retries) + " jittered retries");
  }

  Eigen::MatrixXd run(const OutputMap& output, std::size_t output_dim) {
    const Eigen::Index dim = z_.q.size();
    inverse_metric_ = Eigen::VectorXd::Ones(dim);
    z_.p = Eigen::VectorXd::Zero(dim);
    WindowedAdaptation metric(config_.warmup, dim);
    DualAveraging stepsize(config_.target_acceptance);
    epsilon_ = 1.0;
    init_stepsize();
    stepsize.set_mu(std::log(10.0 * epsilon_));
    stepsize.restart();

    Eigen::MatrixXd draws(static_cast<Eigen::Index>(config_.retained()),
                          static_cast<Eigen::Index>(output_dim));
    double accept_total = 0.0;
    for (std::size_t it = 0; it < config_.iterations; ++it) {
      const bool warming = it < config_.warmup;
      const double accept = transition(!warming);
      if (warming) {
        stepsize.learn(epsilon_, accept);
        if (metric.learn(inverse_metric_, z_.q)) {
          init_stepsize();
          stepsize.set_mu(std::log(10.0 * epsilon_));
          stepsize.restart();
        }
        if (it + 1 == config_.warmup) epsilon_ = stepsize.final_stepsize();
      } else {
        accept_total += accept;
        const auto row = static_cast<Eigen::Index>(it - config_.warmup);
        if (output)
          draws.row(row) = output(z_.q).transpose();
        else
          draws.row(row) = z_.q.transpose();
      }
    }
    status_.step_size = epsilon_;
    status_.mean_accept_stat = accept_total / static_cast<double>(config_.retained());
    return draws;
  }

  const ChainStatus& status() const { return status_; }

private:
  double evaluate(const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    ++status_.gradient_evaluations;
    // A math-library domain or overflow error rejects the point, as a zero
    // density would; anything else is a bug and propagates.
    double lp;
    try {
      lp = target_(q, g);
    } catch (const std::domain_error&) {
      lp = kNegInf;
    } catch (const std::overflow_error&) {
      lp = kNegInf;
    }
    return std::isnan(lp) ? kNegInf : lp;
  }

  void sample_momentum(Eigen::VectorXd& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal_(engine_) / std::sqrt(inverse_metric_[i]);
  }

  double hamiltonian_of(const PhasePoint& z) const {
    return hamiltonian(z.lp, z.p, inverse_metric_);
  }

  void step(PhasePoint& z, double eps) {
    z.p += 0.5 * eps * z.g;
    z.q += eps * inverse_metric_.cwiseProduct(z.p);
    z.lp = evaluate(z.q, z.g);
    if (z.g.allFinite()) {
      z.p += 0.5 * eps * z.g;
    } else {
      z.lp = kNegInf;
    }
  }

  // Heuristic step-size search: double or halve until the acceptance of a
  // single leapfrog step crosses 0.8.
  void init_stepsize() {
    if (!(epsilon_ > 0.0) || epsilon_ > 1e7) return;
    const PhasePoint start = z_;
    auto delta_h = [&]() {
      z_ = start;
      sample_momentum(z_.p);
      const double h0 = hamiltonian_of(z_);
      step(z_, epsilon_);
      double h = hamiltonian_of(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return h0 - h;
    };
    const double threshold = std::log(0.8);
    const int direction = delta_h() > threshold ? 1 : -1;
    for (int guard = 0; guard < 200; ++guard) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > threshold)) break;
      if (direction == -1 && !(dh < threshold)) break;
      epsilon_ = direction == 1 ? 2.0 * epsilon_ : 0.5 * epsilon_;
      if (epsilon_ > 1e7) throw std::runtime_error("step size search diverged; posterior may be improper");
      if (epsilon_ == 0.0) throw std::runtime_error("step size collapsed to zero; check the target");
    }
    z_ = start;
  }

  static bool no_u_turn(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  Eigen::VectorXd p_sharp(const Eigen::VectorXd& p) const { return inverse_metric_.cwiseProduct(p); }

  bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                  Eigen::VectorXd& p_end, double h0, double sign, std::size_t& n_leapfrog,
                  double& log_sum_weight, double& sum_metro_prob) {
    if (depth == 0) {
      step(z_, sign * epsilon_);
      ++n_leapfrog;
      double h = hamiltonian_of(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = p_sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    const Eigen::Index dim = z_.q.size();
    Eigen::VectorXd p_init_end(dim), p_sharp_init_end(dim);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(dim);
    double log_sum_weight_init = kNegInf;
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, h0, sign, n_leapfrog, log_sum_weight_init, sum_metro_prob))
      return false;

    PhasePoint z_propose_final = z_;
    Eigen::VectorXd p_final_beg(dim), p_sharp_final_beg(dim);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(dim);
    double log_sum_weight_final = kNegInf;
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, h0, sign, n_leapfrog, log_sum_weight_final,
                    sum_metro_prob))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(engine_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  double transition(bool record) {
    sample_momentum(z_.p);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    Eigen::VectorXd p_sharp_fwd_fwd = p_sharp(z_.p), p_sharp_fwd_bck = p_sharp_fwd_fwd,
                    p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
    Eigen::VectorXd rho = z_.p;
    double log_sum_weight = 0.0;
    const double h0 = hamiltonian_of(z_);
    std::size_t n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    int depth = 0;
    divergent_ = false;
    const Eigen::Index dim = z_.q.size();

    while (depth < config_.max_tree_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(dim), rho_bck = Eigen::VectorXd::Zero(dim);
      bool valid = false;
      double log_sum_weight_subtree = kNegInf;
      if (uniform_(engine_) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(engine_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    z_ = z_sample;
    if (record) {
      if (divergent_) ++status_.divergences;
      if (depth >= config_.max_tree_depth) ++status_.max_depth_hits;
    }
    return n_leapfrog > 0 ? sum_metro_prob / static_cast<double>(n_leapfrog) : 0.0;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  core::Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  PhasePoint z_;
  Eigen::VectorXd inverse_metric_;
  double epsilon_ = 1.0;
  bool divergent_ = false;
  ChainStatus status_;
};

}  // namespace

PosteriorDraws sample(const LogDensity& target, const std::vector<Eigen::VectorXd>& inits,
                      const SamplerConfig& config, std::vector<std::string> names,
                      const OutputMap& output) {
  config.validate();
  if (inits.size() != config.chains)
    throw std::invalid_argument("need one initial point per chain");
  const Eigen::Index dim = inits.front().size();
  for (const auto& init : inits)
    if (init.size() != dim) throw std::invalid_argument("initial points differ in dimension");

  std::size_t output_dim = static_cast<std::size_t>(dim);
  if (output) output_dim = static_cast<std::size_t>(output(inits.front()).size());
  if (names.empty())
    for (std::size_t i = 0; i < output_dim; ++i) names.push_back("theta[" + std::to_string(i + 1) + "]");
  if (names.size() != output_dim) throw std::invalid_argument("parameter names do not match the output");

  PosteriorDraws result;
  result.names = std::move(names);
  result.chains.resize(config.chains);
  result.status.resize(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < config.chains; c = next++) {
      try {
        Chain chain(target, config, c);
        chain.initialize(inits[c], c);
        result.chains[c] = chain.run(output, output_dim);
        result.status[c] = chain.status();
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(config.jobs, config.chains);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

}  // namespace rtestim::sampler
