#include "gmrt/nuts.hpp"

#include <time.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "gmrt/error.hpp"
#include "gmrt/simd.hpp"

namespace gmrt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  std::vector<double> q, p, grad;
  double logp = -kInf;
};

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}

  void restart(double eps) {
    mu_ = std::log(10.0 * eps);
    s_bar_ = 0.0;
    x_bar_ = 0.0;
    counter_ = 0;
  }

  double learn(double accept) {
    ++counter_;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / kGamma;
    const double w = std::pow(static_cast<double>(counter_), -kKappa);
    x_bar_ = w * x + (1.0 - w) * x_bar_;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
  long counter_ = 0;
};

// Windowed variance estimation: a fast initial buffer, doubling slow
// windows, and a fast terminal buffer.
class MetricAdapter {
 public:
  MetricAdapter(int warmup, std::size_t dim) : warmup_(warmup), mean_(dim, 0.0), m2_(dim, 0.0) {
    if (warmup_ < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup_) {
      init_buffer_ = static_cast<int>(0.15 * warmup_);
      term_buffer_ = static_cast<int>(0.1 * warmup_);
      base_window_ = warmup_ - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when a window closed and `inv_metric` was replaced.
  bool learn(std::vector<double>& inv_metric, const std::vector<double>& q) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(count_);
      for (std::size_t i = 0; i < inv_metric.size(); ++i) {
        const double var = count_ > 1 ? m2_[i] / (n - 1.0) : 1.0;
        inv_metric[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      }
      std::fill(mean_.begin(), mean_.end(), 0.0);
      std::fill(m2_.begin(), m2_.end(), 0.0);
      count_ = 0;
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
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }

  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  void add(const std::vector<double>& q) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = q[i] - mean_[i];
      mean_[i] += d / n;
      m2_[i] += d * (q[i] - mean_[i]);
    }
  }

  int warmup_;
  bool enabled_ = true;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
  long count_ = 0;
  std::vector<double> mean_, m2_;
};

class NutsChain {
 public:
  NutsChain(const LogDensityModel& model, const SamplerConfig& cfg, Rng& rng)
      : model_(model),
        cfg_(cfg),
        rng_(rng),
        k_(simd::kernels()),
        dim_(model.dim()),
        inv_metric_(dim_, 1.0) {}

  void initialize() {
    z_.q.resize(dim_);
    z_.p.assign(dim_, 0.0);
    z_.grad.assign(dim_, 0.0);
    for (int attempt = 0; attempt < cfg_.init_attempts; ++attempt) {
      z_.q = model_.initial_point(rng_);
      if (z_.q.size() != dim_) throw Error(ErrorCode::invalid_parameter, "initial point has wrong size");
      if (update_potential(z_)) return;
    }
    std::ostringstream msg;
    msg << "no finite log density after " << cfg_.init_attempts << " initial points; last point:";
    for (std::size_t i = 0; i < std::min<std::size_t>(dim_, 12); ++i) msg << ' ' << z_.q[i];
    if (dim_ > 12) msg << " ...";
    throw Error(ErrorCode::initialization_failure, msg.str());
  }

  // Stan-style heuristic: double or halve until the one-step acceptance crosses 0.8.
  void init_step_size() {
    const PhasePoint start = z_;
    sample_momentum(z_);
    double h0 = hamiltonian(z_);
    leapfrog(z_, eps_);
    double delta = h0 - hamiltonian(z_);
    const int direction = delta > std::log(0.8) ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
      z_ = start;
      sample_momentum(z_);
      h0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      delta = h0 - hamiltonian(z_);
      if (std::isnan(delta)) delta = -kInf;
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw Error(ErrorCode::runtime_failure, "step size diverged during initialization");
      if (eps_ == 0.0) throw Error(ErrorCode::runtime_failure, "step size collapsed to zero");
    }
    z_ = start;
  }

  ChainResult run() {
    const double cpu0 = thread_cpu_seconds();
    ChainResult out;
    initialize();
    init_step_size();
    StepSizeAdapter step_adapt(cfg_.target_accept);
    step_adapt.restart(eps_);
    MetricAdapter metric_adapt(cfg_.warmup, dim_);

    const auto names = model_.output_names();
    const std::size_t n_out = names.size();
    const std::size_t kept = static_cast<std::size_t>(cfg_.iters - cfg_.warmup);
    out.draws.resize(kept * n_out);
    out.log_density.reserve(kept);
    out.treedepth.reserve(kept);
    out.accept_stat.reserve(kept);
    out.energy_error.reserve(kept);
    out.divergent.reserve(kept);

    for (int it = 0; it < cfg_.iters; ++it) {
      const bool warm = it < cfg_.warmup;
      const Transition tr = transition();
      if (warm) {
        eps_ = step_adapt.learn(tr.accept);
        if (metric_adapt.learn(inv_metric_, z_.q)) {
          init_step_size();
          step_adapt.restart(eps_);
        }
        if (it + 1 == cfg_.warmup) eps_ = step_adapt.final_step();
        continue;
      }
      const std::size_t row = static_cast<std::size_t>(it - cfg_.warmup);
      model_.write_output(z_.q, std::span<double>(out.draws).subspan(row * n_out, n_out));
      out.log_density.push_back(z_.logp);
      out.treedepth.push_back(tr.depth);
      out.accept_stat.push_back(tr.accept);
      out.energy_error.push_back(tr.energy_error);
      out.divergent.push_back(tr.divergent ? 1 : 0);
      if (tr.divergent) ++out.divergences;
      if (tr.depth >= cfg_.max_treedepth) ++out.treedepth_hits;
    }
    out.step_size = eps_;
    out.inverse_metric = inv_metric_;
    out.gradient_evaluations = grad_evals_;
    out.cpu_seconds = thread_cpu_seconds() - cpu0;
    return out;
  }

 private:
  struct Transition {
    int depth = 0;
    double accept = 0.0;
    double energy_error = 0.0;
    bool divergent = false;
  };

  bool update_potential(PhasePoint& z) {
    ++grad_evals_;
    z.logp = model_.log_density_gradient(z.q, z.grad);
    if (!std::isfinite(z.logp)) return false;
    for (double g : z.grad) {
      if (!std::isfinite(g)) {
        z.logp = -kInf;
        return false;
      }
    }
    return true;
  }

  void sample_momentum(PhasePoint& z) {
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
  }

  double kinetic(const std::vector<double>& p) const {
    return 0.5 * k_.weighted_sumsq(inv_metric_.data(), p.data(), dim_);
  }

  double hamiltonian(const PhasePoint& z) const {
    if (!std::isfinite(z.logp)) return kInf;
    return -z.logp + kinetic(z.p);
  }

  void leapfrog(PhasePoint& z, double eps) {
    k_.axpy(0.5 * eps, z.grad.data(), z.p.data(), dim_);
    k_.axpy_scaled(eps, inv_metric_.data(), z.p.data(), z.q.data(), dim_);
    if (!update_potential(z)) return;
    k_.axpy(0.5 * eps, z.grad.data(), z.p.data(), dim_);
  }

  void p_sharp(const std::vector<double>& p, std::vector<double>& out) const {
    for (std::size_t i = 0; i < dim_; ++i) out[i] = inv_metric_[i] * p[i];
  }

  bool criterion(const std::vector<double>& sharp_minus, const std::vector<double>& sharp_plus,
                 const std::vector<double>& rho) const {
    return k_.dot(sharp_plus.data(), rho.data(), dim_) > 0.0 &&
           k_.dot(sharp_minus.data(), rho.data(), dim_) > 0.0;
  }

  static void add_into(std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  static std::vector<double> sum(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
  }

  struct TreeStats {
    long n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
  };

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, std::vector<double>& sharp_beg,
                  std::vector<double>& sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double h0, double sign, double& log_sum_weight,
                  TreeStats& stats) {
    if (depth == 0) {
      leapfrog(z, sign * eps_);
      ++stats.n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      if (h - h0 > cfg_.divergence_threshold) stats.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      stats.sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp(z.p, sharp_beg);
      sharp_end = sharp_beg;
      add_into(rho, z.p);
      p_beg = z.p;
      p_end = p_beg;
      return !stats.divergent;
    }

    double lsw_init = -kInf;
    std::vector<double> p_init_end(dim_), sharp_init_end(dim_), rho_init(dim_, 0.0);
    if (!build_tree(depth - 1, z, z_propose, sharp_beg, sharp_init_end, rho_init, p_beg, p_init_end,
                    h0, sign, lsw_init, stats)) {
      return false;
    }

    PhasePoint z_propose_final = z;
    double lsw_final = -kInf;
    std::vector<double> p_final_beg(dim_), sharp_final_beg(dim_), rho_final(dim_, 0.0);
    if (!build_tree(depth - 1, z, z_propose_final, sharp_final_beg, sharp_end, rho_final, p_final_beg,
                    p_end, h0, sign, lsw_final, stats)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = std::move(z_propose_final);
    } else if (uniform_(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = std::move(z_propose_final);
    }

    const auto rho_subtree = sum(rho_init, rho_final);
    bool persist = criterion(sharp_beg, sharp_end, rho_subtree);
    persist = persist && criterion(sharp_beg, sharp_final_beg, sum(rho_init, p_final_beg));
    persist = persist && criterion(sharp_init_end, sharp_end, sum(rho_final, p_init_end));
    add_into(rho, rho_subtree);
    return persist;
  }

  Transition transition() {
    sample_momentum(z_);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    std::vector<double> p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    std::vector<double> sharp(dim_);
    p_sharp(z_.p, sharp);
    std::vector<double> sharp_fwd_fwd = sharp, sharp_fwd_bck = sharp, sharp_bck_fwd = sharp,
                        sharp_bck_bck = sharp;
    std::vector<double> rho = z_.p;
    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z_);
    TreeStats stats;
    int depth = 0;

    while (depth < cfg_.max_treedepth) {
      std::vector<double> rho_fwd(dim_, 0.0), rho_bck(dim_, 0.0);
      double lsw_subtree = -kInf;
      bool valid;
      if (uniform_(rng_) > 0.5) {
        PhasePoint z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        sharp_bck_fwd = sharp_fwd_bck;
        valid = build_tree(depth, z, z_propose, sharp_fwd_bck, sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, lsw_subtree, stats);
        z_fwd = std::move(z);
      } else {
        PhasePoint z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        sharp_fwd_bck = sharp_bck_fwd;
        valid = build_tree(depth, z, z_propose, sharp_bck_fwd, sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, lsw_subtree, stats);
        z_bck = std::move(z);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = sum(rho_bck, rho_fwd);
      bool persist = criterion(sharp_bck_bck, sharp_fwd_fwd, rho);
      persist = persist && criterion(sharp_bck_bck, sharp_fwd_bck, sum(rho_bck, p_fwd_bck));
      persist = persist && criterion(sharp_bck_fwd, sharp_fwd_fwd, sum(rho_fwd, p_bck_fwd));
      if (!persist) break;
    }

    Transition tr;
    tr.depth = depth;
    tr.divergent = stats.divergent;
    tr.accept = stats.n_leapfrog > 0 ? stats.sum_metro_prob / static_cast<double>(stats.n_leapfrog) : 0.0;
    tr.energy_error = hamiltonian(z_sample) - h0;
    z_ = std::move(z_sample);
    return tr;
  }

  const LogDensityModel& model_;
  const SamplerConfig& cfg_;
  Rng& rng_;
  const simd::KernelTable& k_;
  std::size_t dim_;
  std::vector<double> inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  long grad_evals_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace

void validate(const SamplerConfig& c) {
  if (c.chains < 1) throw Error(ErrorCode::invalid_parameter, "chains must be >= 1");
  if (c.warmup < 0) throw Error(ErrorCode::invalid_parameter, "warmup must be >= 0");
  if (c.iters <= c.warmup) throw Error(ErrorCode::invalid_parameter, "iters must exceed warmup");
  if (c.max_treedepth < 1) throw Error(ErrorCode::invalid_parameter, "max_treedepth must be >= 1");
  if (!(c.target_accept > 0.0 && c.target_accept < 1.0)) {
    throw Error(ErrorCode::invalid_parameter, "target_accept must lie in (0, 1)");
  }
  if (!(c.divergence_threshold > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "divergence threshold must be positive");
  }
  if (c.jobs < 1) throw Error(ErrorCode::invalid_parameter, "jobs must be >= 1");
  if (c.init_attempts < 1) throw Error(ErrorCode::invalid_parameter, "init_attempts must be >= 1");
}

std::vector<double> PosteriorDraws::pooled(std::size_t p) const {
  std::vector<double> v;
  v.reserve(iterations * chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t it = 0; it < iterations; ++it) v.push_back(at(c, it, p));
  }
  return v;
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(std::size_t p) const {
  std::vector<std::vector<double>> v(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    v[c].reserve(iterations);
    for (std::size_t it = 0; it < iterations; ++it) v[c].push_back(at(c, it, p));
  }
  return v;
}

std::size_t PosteriorDraws::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::index_error, "no output named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

double PosteriorDraws::cpu_seconds() const {
  double s = 0.0;
  for (const auto& c : chains) s += c.cpu_seconds;
  return s;
}

ChainResult nuts_chain(const LogDensityModel& model, const SamplerConfig& config, int chain_index) {
  validate(config);
  Rng rng = make_rng(config.seed, "chain", static_cast<std::uint64_t>(chain_index));
  NutsChain chain(model, config, rng);
  return chain.run();
}

PosteriorDraws nuts_sample(const LogDensityModel& model, const SamplerConfig& config) {
  validate(config);
  PosteriorDraws out;
  out.names = model.output_names();
  out.iterations = static_cast<std::size_t>(config.iters - config.warmup);
  out.chains.resize(static_cast<std::size_t>(config.chains));

  std::vector<std::exception_ptr> errors(out.chains.size());
  const int workers = std::min(config.jobs, config.chains);
  if (workers <= 1) {
    for (int c = 0; c < config.chains; ++c) out.chains[c] = nuts_chain(model, config, c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int c = next++; c < config.chains; c = next++) {
          try {
            out.chains[c] = nuts_chain(model, config, c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

}  // namespace gmrt
