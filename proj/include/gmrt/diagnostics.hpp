#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gmrt/nuts.hpp"

namespace gmrt {

/// Rank-normalized split R-hat: the larger of the bulk and folded values.
/// NaN when every draw is identical (no variance to compare).
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size from rank-normalized split chains, using
/// Geyer's initial monotone sequence. NaN for constant input.
double ess_bulk(const std::vector<std::vector<double>>& chains);

/// Plain split R-hat without rank normalization.
double split_rhat_raw(const std::vector<std::vector<double>>& chains);
/// ESS of the raw (not rank-normalized) split chains.
double ess_raw(const std::vector<std::vector<double>>& chains);

struct Thresholds {
  double max_rhat = 1.05;
  double min_ess = 250.0;
};

struct ParameterDiagnostic {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
  bool degenerate = false;
  bool ok = true;
};

struct DiagnosticReport {
  std::vector<ParameterDiagnostic> parameters;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::vector<int> divergences;  // per chain
  std::vector<int> treedepth_hits;
  std::vector<double> step_sizes;
  double cpu_seconds = 0.0;
  Thresholds thresholds;

  int total_divergences() const;
  /// Names of parameters breaking a threshold or with degenerate draws.
  std::vector<std::string> violations() const;
  bool passed() const { return violations().empty(); }
};

DiagnosticReport diagnose(const PosteriorDraws& draws, const Thresholds& thresholds = {});

}  // namespace gmrt
