#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gmrt {

using Date = std::chrono::sys_days;

/// Weekly observed case counts O_1..O_T.
class CaseSeries {
 public:
  static constexpr int kStepDays = 7;

  CaseSeries(Date start, std::vector<std::int64_t> counts);

  /// Builds a series with an arbitrary placeholder start date (simulations).
  static CaseSeries from_counts(std::vector<std::int64_t> counts);

  Date start_date() const noexcept { return start_; }
  Date date_at(std::size_t i) const noexcept {
    return start_ + std::chrono::days{kStepDays * static_cast<long>(i)};
  }
  std::size_t size() const noexcept { return counts_.size(); }
  std::span<const std::int64_t> counts() const noexcept { return counts_; }
  std::int64_t operator[](std::size_t i) const noexcept { return counts_[i]; }

  /// First `weeks` observations.
  CaseSeries truncated(std::size_t weeks) const;

 private:
  Date start_;
  std::vector<std::int64_t> counts_;
};

std::string format_date(Date d);
Date parse_date(const std::string& iso);

/// Reads `date,cases` CSV with consecutive 7-day steps.
CaseSeries read_case_csv(const std::filesystem::path& path);
CaseSeries parse_case_csv(std::istream& in);
void write_case_csv(std::ostream& out, const CaseSeries& cases);

enum class PmfKind { generation, delay };

/// Probability mass over integer lags 0..L.
class DiscretizedPMF {
 public:
  DiscretizedPMF(std::vector<double> probs, PmfKind kind);

  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t k) const noexcept { return k < probs_.size() ? probs_[k] : 0.0; }
  std::size_t max_lag() const noexcept { return probs_.size() - 1; }
  PmfKind kind() const noexcept { return kind_; }

 private:
  std::vector<double> probs_;
  PmfKind kind_;
};

/// Discretizes a Gamma(mean, sd) distribution (durations in days) onto bins
/// [k*step, (k+1)*step). Generation-time PMFs have their lag-0 mass removed
/// before renormalization. Without `max_lags`, the smallest k whose upper bin
/// edge carries cumulative mass >= 0.999 is used.
DiscretizedPMF discretize_gamma(double mean_days, double sd_days, double step_days,
                                std::optional<int> max_lags, PmfKind kind);

/// Type-7 (linear interpolation) empirical quantile.
double weighted_quantile(std::span<const double> draws, double q);

/// Type-7 quantiles at several levels with a single sort.
std::vector<double> quantiles(std::span<const double> draws, std::span<const double> levels);

}  // namespace gmrt
