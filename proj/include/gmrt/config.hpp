#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmrt/diagnostics.hpp"
#include "gmrt/harness.hpp"
#include "gmrt/model.hpp"
#include "gmrt/nuts.hpp"

namespace gmrt {

/// Gamma duration distribution in days, discretized onto `step_days` bins.
struct GammaPmfConfig {
  double mean_days = 0.0;
  double sd_days = 0.0;
  std::optional<int> max_lags;
};

enum class BenchmarkMode { retrospective, realtime, both };

struct BenchmarkConfig {
  std::size_t replicates = 10;
  std::vector<PriorKind> priors{std::begin(kAllPriors), std::end(kAllPriors)};
  BenchmarkMode mode = BenchmarkMode::retrospective;
  std::size_t start_weeks = 10;
  std::size_t realtime_replicate = 0;
};

/// Everything a run needs. Paths are stored as written and resolved against
/// `base_dir` (the directory holding the config file).
struct RunConfig {
  std::filesystem::path base_dir;

  std::optional<std::string> cases_csv;

  PriorKind prior = PriorKind::rw1;
  std::optional<GammaPmfConfig> generation;
  std::optional<GammaPmfConfig> delay;
  double step_days = 7.0;
  HyperPriorSpec hyper;
  std::optional<double> hsgp_ell_ref;

  SamplerConfig sampler;  // seed and jobs are taken from the top level
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  Scenario scenario;
  BenchmarkConfig benchmark;
  Thresholds thresholds;

  std::string output_dir = "out";
  bool save_draws = false;

  /// Discretized PMFs and hyperpriors for one prior. Throws config_error
  /// naming the first missing key.
  ModelSpec model_spec(PriorKind kind) const;
  std::filesystem::path resolve(const std::string& path) const;
  /// Sampler settings with the run seed and job bound filled in.
  SamplerConfig sampler_for_run() const;
};

std::string_view to_string(BenchmarkMode mode) noexcept;

/// Parses a config document. Unknown keys, wrong types and out-of-range
/// values raise Error(config_error). A top-level "manifest" block is ignored
/// so run manifests can be replayed.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Full config with every default written out; parse_config accepts it back.
nlohmann::json to_json(const RunConfig& config);

}  // namespace gmrt
