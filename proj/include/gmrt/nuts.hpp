#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmrt/rng.hpp"

namespace gmrt {

/// A differentiable log-density over an unconstrained space.
class LogDensityModel {
 public:
  virtual ~LogDensityModel() = default;

  virtual std::size_t dim() const = 0;

  /// Returns the log-density (up to a constant) and writes its gradient.
  /// Non-finite values signal an inadmissible point.
  virtual double log_density_gradient(std::span<const double> x, std::span<double> grad) const = 0;

  /// Quantities recorded per retained draw, on the constrained scale.
  virtual std::vector<std::string> output_names() const = 0;
  virtual void write_output(std::span<const double> x, std::span<double> out) const = 0;

  virtual std::vector<double> initial_point(Rng& rng) const = 0;
};

struct SamplerConfig {
  int chains = 4;
  int warmup = 2000;
  int iters = 6000;  // total per chain, warmup included
  std::uint64_t seed = 1;
  int max_treedepth = 10;
  double target_accept = 0.8;
  double divergence_threshold = 1000.0;
  int jobs = 1;
  int init_attempts = 100;
};

void validate(const SamplerConfig& c);

struct ChainResult {
  std::vector<double> draws;  // iterations x outputs, row-major
  std::vector<double> log_density;
  std::vector<int> treedepth;
  std::vector<double> accept_stat;
  std::vector<double> energy_error;  // H(end) - H(start) of the selected state's trajectory
  std::vector<std::uint8_t> divergent;
  int divergences = 0;
  int treedepth_hits = 0;
  double step_size = 0.0;
  std::vector<double> inverse_metric;
  long gradient_evaluations = 0;
  double cpu_seconds = 0.0;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  std::size_t iterations = 0;  // retained per chain
  std::vector<ChainResult> chains;

  std::size_t outputs() const noexcept { return names.size(); }
  /// Draw `it` of output `p` in chain `c`.
  double at(std::size_t c, std::size_t it, std::size_t p) const {
    return chains[c].draws[it * names.size() + p];
  }
  /// All retained draws of output `p`, chains concatenated.
  std::vector<double> pooled(std::size_t p) const;
  /// Per-chain draws of output `p`.
  std::vector<std::vector<double>> by_chain(std::size_t p) const;
  std::size_t index_of(const std::string& name) const;
  double cpu_seconds() const;
};

/// Multinomial NUTS with dual-averaging step size and windowed diagonal
/// metric adaptation. Chains are seeded from `config.seed` via named
/// sub-streams and may run concurrently (`config.jobs`).
PosteriorDraws nuts_sample(const LogDensityModel& model, const SamplerConfig& config);

/// Runs a single chain; exposed for tests.
ChainResult nuts_chain(const LogDensityModel& model, const SamplerConfig& config, int chain_index);

}  // namespace gmrt
