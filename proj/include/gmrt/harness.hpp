#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmrt/core.hpp"
#include "gmrt/diagnostics.hpp"
#include "gmrt/metrics.hpp"
#include "gmrt/model.hpp"
#include "gmrt/nuts.hpp"
#include "gmrt/seirs.hpp"

namespace gmrt {

struct ParamSummary {
  std::string name;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

struct FitResult {
  PriorKind prior = PriorKind::rw1;
  PosteriorDraws draws;
  DiagnosticReport diagnostics;
  RtPosteriorSummary rt;
  std::vector<ParamSummary> params;
};

/// Samples the posterior and summarizes R_t, nuisance and prior parameters.
FitResult fit_model(const ModelSpec& spec, const CaseSeries& cases, const SamplerConfig& sampler,
                    const Thresholds& thresholds = {});

/// Median and 95% interval of the scalar (non-path) outputs.
std::vector<ParamSummary> summarize_params(const PosteriorDraws& draws);

// --- SEIRS datasets -----------------------------------------------------------

struct Scenario {
  SeirsParams seirs = default_seirs_params();
  double dt = 1.0 / 7.0;
  double rho = 0.05;
  double kappa = 5.0;
};

struct Dataset {
  OutbreakTruth truth;
  CaseSeries cases;
  std::uint64_t seed = 0;
};

/// Replicate `index` of a scenario; seeds derive from the master seed.
Dataset make_dataset(const Scenario& scenario, std::uint64_t master_seed, std::size_t index);

// --- real-time protocol ---------------------------------------------------------

struct RealtimeIteration {
  std::size_t t_prime = 0;
  std::array<double, 7> quantiles{};  // R_{T'} at RtPosteriorSummary::kLevels
  double true_rt = 0.0;
  bool diagnostics_ok = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  int divergences = 0;
  double cpu_seconds = 0.0;
  std::string failure;  // non-empty when the fit threw
};

struct RealtimeResult {
  PriorKind prior = PriorKind::rw1;
  std::vector<RealtimeIteration> iterations;
  std::optional<MetricReport> metrics;  // over successful iterations
  std::size_t flagged() const;
};

/// Fits cases[1..T'] for T' = start_weeks..T and keeps the summary of R_{T'}.
RealtimeResult realtime_protocol(const CaseSeries& cases, std::span<const double> truth,
                                 const ModelSpec& spec, std::size_t start_weeks,
                                 const SamplerConfig& sampler, const Thresholds& thresholds = {},
                                 int jobs = 1);

/// Coverage, MAD, MCIW and decision scores of a sequence of last-week summaries.
MetricReport realtime_metrics(const std::vector<RealtimeIteration>& iterations);

// --- retrospective batch --------------------------------------------------------

struct ReplicateRecord {
  std::size_t replicate = 0;
  PriorKind prior = PriorKind::rw1;
  std::uint64_t data_seed = 0;
  std::uint64_t sampler_seed = 0;
  std::optional<MetricReport> metrics;
  bool diagnostics_ok = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  int divergences = 0;
  double cpu_seconds = 0.0;
  std::string failure;
};

struct PriorSummary {
  PriorKind prior = PriorKind::rw1;
  std::optional<MetricAggregate> aggregate;
  std::size_t failed = 0;
  std::size_t flagged = 0;
  double cpu_min = 0.0, cpu_mean = 0.0, cpu_max = 0.0;  // minutes
};

struct BenchmarkResult {
  std::vector<ReplicateRecord> records;  // replicate-major, priors in input order
  std::vector<PriorSummary> summary;
};

/// Sampler seed for one fit of the batch.
std::uint64_t fit_seed(std::uint64_t master, PriorKind prior, std::size_t replicate);

BenchmarkResult batch_benchmark(std::size_t n_replicates, const Scenario& scenario,
                                const std::vector<ModelSpec>& specs, const SamplerConfig& sampler,
                                std::uint64_t seed, const Thresholds& thresholds = {}, int jobs = 1);

/// Mean and SD per prior of replicate records, failures excluded.
std::vector<PriorSummary> summarize_records(const std::vector<ReplicateRecord>& records,
                                            const std::vector<PriorKind>& priors);

// --- writers --------------------------------------------------------------------

void write_rt_summary(std::ostream& out, const CaseSeries& cases, const RtPosteriorSummary& rt);
void write_params_summary(std::ostream& out, const std::vector<ParamSummary>& params);
void write_draws(std::ostream& out, const PosteriorDraws& draws);
void write_diagnostics_json(std::ostream& out, const FitResult& fit);
void write_metrics(std::ostream& out, const std::vector<ReplicateRecord>& records);
void write_metrics_summary(std::ostream& out, const std::vector<PriorSummary>& summary);
void write_realtime(std::ostream& out, const RealtimeResult& result);
void write_realtime_diagnostics(std::ostream& out, const RealtimeResult& result);
void write_realtime_metrics(std::ostream& out, const std::vector<RealtimeResult>& results);
void write_simulation(std::ostream& out, const OutbreakTruth& truth, const CaseSeries& cases);

}  // namespace gmrt
