#include "gmrt/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gmrt/core.hpp"
#include "gmrt/error.hpp"

namespace gmrt {

RtPosteriorSummary::RtPosteriorSummary(std::vector<std::array<double, 7>> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    for (std::size_t k = 1; k < r.size(); ++k) {
      if (!(r[k] >= r[k - 1])) throw Error(ErrorCode::invalid_state, "quantiles must be non-decreasing");
    }
  }
}

RtPosteriorSummary RtPosteriorSummary::from_samples(const std::vector<std::vector<double>>& per_week) {
  std::vector<std::array<double, 7>> rows;
  rows.reserve(per_week.size());
  for (const auto& draws : per_week) {
    const auto q = quantiles(draws, kLevels);
    std::array<double, 7> r{};
    std::copy(q.begin(), q.end(), r.begin());
    rows.push_back(r);
  }
  return RtPosteriorSummary(std::move(rows));
}

RtPosteriorSummary RtPosteriorSummary::from_draws(const PosteriorDraws& draws, std::size_t periods) {
  std::vector<std::vector<double>> per_week;
  per_week.reserve(periods);
  for (std::size_t t = 1; t <= periods; ++t) {
    per_week.push_back(draws.pooled(draws.index_of("R[" + std::to_string(t) + "]")));
  }
  return from_samples(per_week);
}

double RtPosteriorSummary::at(std::size_t t, double level) const {
  for (std::size_t k = 0; k < kLevels.size(); ++k) {
    if (kLevels[k] == level) return rows_.at(t)[k];
  }
  throw Error(ErrorCode::invalid_parameter, "unsupported quantile level");
}

MetricReport compute_metrics(const RtPosteriorSummary& summary, std::span<const double> truth) {
  if (summary.weeks() != truth.size()) {
    throw Error(ErrorCode::alignment_error, "summary and truth differ in length");
  }
  if (truth.empty()) throw Error(ErrorCode::empty_sample, "no weeks to score");
  MetricReport m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = summary.row(i);
    const double x = truth[i];
    m.mad += std::abs(r[3] - x);
    m.envelope_95 += (x > r[1] && x < r[5]) ? 1.0 : 0.0;
    m.envelope_80 += (x > r[2] && x < r[4]) ? 1.0 : 0.0;
    m.mciw_95 += r[5] - r[1];
    m.mciw_80 += r[4] - r[2];
  }
  const double n = static_cast<double>(truth.size());
  m.mad /= n;
  m.envelope_95 /= n;
  m.envelope_80 /= n;
  m.mciw_95 /= n;
  m.mciw_80 /= n;
  return m;
}

double decision_score(std::span<const Interval> intervals, std::span<const double> truth) {
  if (intervals.size() != truth.size()) {
    throw Error(ErrorCode::alignment_error, "intervals and truth differ in length");
  }
  if (truth.empty()) throw Error(ErrorCode::empty_sample, "no iterations to score");
  double hits = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool up = intervals[i].lower > 1.0 && truth[i] > 1.0;
    const bool down = intervals[i].upper < 1.0 && truth[i] < 1.0;
    hits += (up ? 1.0 : 0.0) + (down ? 1.0 : 0.0);
  }
  return hits / static_cast<double>(truth.size());
}

MetricAggregate aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::empty_sample, "no metric reports to aggregate");
  MetricAggregate a;
  a.count = reports.size();
  const double n = static_cast<double>(reports.size());

  auto stat = [&](auto field, double& mean_out, double& sd_out) {
    double s = 0.0;
    for (const auto& r : reports) s += field(r);
    const double mean = s / n;
    double ss = 0.0;
    for (const auto& r : reports) ss += (field(r) - mean) * (field(r) - mean);
    mean_out = mean;
    sd_out = reports.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  };
  stat([](const MetricReport& r) { return r.mad; }, a.mean.mad, a.sd.mad);
  stat([](const MetricReport& r) { return r.envelope_95; }, a.mean.envelope_95, a.sd.envelope_95);
  stat([](const MetricReport& r) { return r.envelope_80; }, a.mean.envelope_80, a.sd.envelope_80);
  stat([](const MetricReport& r) { return r.mciw_95; }, a.mean.mciw_95, a.sd.mciw_95);
  stat([](const MetricReport& r) { return r.mciw_80; }, a.mean.mciw_80, a.sd.mciw_80);
  stat([](const MetricReport& r) { return r.cpu_minutes; }, a.mean.cpu_minutes, a.sd.cpu_minutes);

  bool all95 = true, all80 = true;
  for (const auto& r : reports) {
    all95 = all95 && r.decision_score_95.has_value();
    all80 = all80 && r.decision_score_80.has_value();
  }
  if (all95) {
    double m = 0, s = 0;
    stat([](const MetricReport& r) { return *r.decision_score_95; }, m, s);
    a.mean.decision_score_95 = m;
    a.sd.decision_score_95 = s;
  }
  if (all80) {
    double m = 0, s = 0;
    stat([](const MetricReport& r) { return *r.decision_score_80; }, m, s);
    a.mean.decision_score_80 = m;
    a.sd.decision_score_80 = s;
  }
  return a;
}

}  // namespace gmrt
