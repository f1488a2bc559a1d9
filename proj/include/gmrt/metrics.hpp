#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmrt/nuts.hpp"

namespace gmrt {

/// Posterior quantiles of R_t per week.
class RtPosteriorSummary {
 public:
  static constexpr std::array<double, 7> kLevels{0.005, 0.025, 0.1, 0.5, 0.9, 0.975, 0.995};

  RtPosteriorSummary() = default;
  /// Rows of quantiles at kLevels, one row per week.
  explicit RtPosteriorSummary(std::vector<std::array<double, 7>> rows);

  /// Summaries of R[1]..R[T] from sampler output.
  static RtPosteriorSummary from_draws(const PosteriorDraws& draws, std::size_t periods);
  /// Summary of one set of draws per week.
  static RtPosteriorSummary from_samples(const std::vector<std::vector<double>>& per_week);

  std::size_t weeks() const noexcept { return rows_.size(); }
  const std::array<double, 7>& row(std::size_t t) const { return rows_.at(t); }
  double median(std::size_t t) const { return rows_.at(t)[3]; }
  /// Quantile at one of kLevels (compared exactly).
  double at(std::size_t t, double level) const;

 private:
  std::vector<std::array<double, 7>> rows_;
};

struct Interval {
  double lower;
  double upper;
};

struct MetricReport {
  double mad = 0.0;
  double envelope_95 = 0.0;
  double envelope_80 = 0.0;
  double mciw_95 = 0.0;
  double mciw_80 = 0.0;
  std::optional<double> decision_score_95;
  std::optional<double> decision_score_80;
  double cpu_minutes = 0.0;
};

/// MAD, envelopes (open intervals) and mean interval widths at 95% and 80%.
MetricReport compute_metrics(const RtPosteriorSummary& summary, std::span<const double> truth);

/// Fraction of iterations whose interval lies strictly above 1 while the
/// truth exceeds 1, or strictly below 1 while the truth is below 1.
double decision_score(std::span<const Interval> intervals, std::span<const double> truth);

/// Mean and sample SD across replicates.
struct MetricAggregate {
  MetricReport mean;
  MetricReport sd;
  std::size_t count = 0;
};

MetricAggregate aggregate(std::span<const MetricReport> reports);

}  // namespace gmrt
