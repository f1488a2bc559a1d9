#include "gmrt/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>

#include "gmrt/error.hpp"

namespace gmrt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::degenerate_distribution: return "degenerate-distribution";
    case ErrorCode::degenerate_approximation: return "degenerate-approximation";
    case ErrorCode::empty_sample: return "empty-sample";
    case ErrorCode::index_error: return "index-error";
    case ErrorCode::invalid_state: return "invalid-state";
    case ErrorCode::alignment_error: return "alignment-error";
    case ErrorCode::validation_error: return "validation-error";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::initialization_failure: return "initialization-failure";
    case ErrorCode::runtime_failure: return "runtime-failure";
  }
  return "unknown";
}

CaseSeries::CaseSeries(Date start, std::vector<std::int64_t> counts)
    : start_(start), counts_(std::move(counts)) {
  if (counts_.size() < 2) {
    throw Error(ErrorCode::validation_error, "case series needs at least 2 observations");
  }
  for (auto c : counts_) {
    if (c < 0) throw Error(ErrorCode::validation_error, "negative case count");
  }
}

CaseSeries CaseSeries::from_counts(std::vector<std::int64_t> counts) {
  using namespace std::chrono;
  return CaseSeries(sys_days{year{2020} / January / 6}, std::move(counts));
}

CaseSeries CaseSeries::truncated(std::size_t weeks) const {
  if (weeks > counts_.size()) {
    throw Error(ErrorCode::index_error, "truncation longer than the series");
  }
  return CaseSeries(start_, std::vector<std::int64_t>(counts_.begin(), counts_.begin() + weeks));
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (iso.size() != 10 || std::sscanf(iso.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::validation_error, "bad ISO-8601 date '" + iso + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::validation_error, "invalid calendar date '" + iso + "'");
  return Date{ymd};
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

CaseSeries parse_case_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "date,cases") {
    throw Error(ErrorCode::validation_error, "expected header 'date,cases'");
  }
  std::vector<Date> dates;
  std::vector<std::int64_t> counts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::validation_error, "line " + std::to_string(lineno) + ": missing comma");
    }
    const Date d = parse_date(trim(line.substr(0, comma)));
    const std::string value = trim(line.substr(comma + 1));
    std::size_t used = 0;
    long long c = 0;
    try {
      c = std::stoll(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw Error(ErrorCode::validation_error,
                  "line " + std::to_string(lineno) + ": bad count '" + value + "'");
    }
    if (!dates.empty() && d - dates.back() != std::chrono::days{CaseSeries::kStepDays}) {
      throw Error(ErrorCode::validation_error,
                  "line " + std::to_string(lineno) + ": dates must advance by exactly 7 days");
    }
    dates.push_back(d);
    counts.push_back(c);
  }
  if (dates.empty()) throw Error(ErrorCode::validation_error, "no data rows");
  return CaseSeries(dates.front(), std::move(counts));
}

CaseSeries read_case_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::validation_error, "cannot open " + path.string());
  return parse_case_csv(in);
}

void write_case_csv(std::ostream& out, const CaseSeries& cases) {
  out << "date,cases\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out << format_date(cases.date_at(i)) << ',' << cases[i] << '\n';
  }
}

DiscretizedPMF::DiscretizedPMF(std::vector<double> probs, PmfKind kind)
    : probs_(std::move(probs)), kind_(kind) {
  if (probs_.empty()) throw Error(ErrorCode::invalid_parameter, "empty PMF");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::invalid_parameter, "PMF entries must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_parameter, "PMF does not sum to 1");
  }
  if (kind_ == PmfKind::generation && probs_[0] != 0.0) {
    throw Error(ErrorCode::invalid_parameter, "generation PMF must have zero lag-0 mass");
  }
}

DiscretizedPMF discretize_gamma(double mean_days, double sd_days, double step_days,
                                std::optional<int> max_lags, PmfKind kind) {
  if (!(mean_days > 0.0) || !(sd_days > 0.0) || !(step_days > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "gamma mean, sd and step must be positive");
  }
  if (max_lags && *max_lags < 1) {
    throw Error(ErrorCode::invalid_parameter, "max_lags must be >= 1");
  }
  const double shape = mean_days * mean_days / (sd_days * sd_days);
  const double scale = sd_days * sd_days / mean_days;
  const boost::math::gamma_distribution<double> dist(shape, scale);

  int lags = 0;
  if (max_lags) {
    lags = *max_lags;
  } else {
    while (boost::math::cdf(dist, (lags + 1) * step_days) < 0.999) ++lags;
    // a generation PMF needs at least one admissible lag
    if (kind == PmfKind::generation) lags = std::max(lags, 1);
  }

  std::vector<double> p(static_cast<std::size_t>(lags) + 1);
  double prev = 0.0;
  for (int k = 0; k <= lags; ++k) {
    const double cur = boost::math::cdf(dist, (k + 1) * step_days);
    p[static_cast<std::size_t>(k)] = cur - prev;
    prev = cur;
  }
  if (kind == PmfKind::generation) p[0] = 0.0;

  double total = 0.0;
  for (double v : p) total += v;
  if (total < 1e-10) {
    throw Error(ErrorCode::degenerate_distribution, "all mass truncated away");
  }
  for (double& v : p) v /= total;
  return DiscretizedPMF(std::move(p), kind);
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> sorted_copy(std::span<const double> draws) {
  if (draws.empty()) throw Error(ErrorCode::empty_sample, "quantile of empty sample");
  std::vector<double> s(draws.begin(), draws.end());
  for (double v : s) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_parameter, "non-finite draw");
  }
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double weighted_quantile(std::span<const double> draws, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::invalid_parameter, "q outside [0,1]");
  return sorted_quantile(sorted_copy(draws), q);
}

std::vector<double> quantiles(std::span<const double> draws, std::span<const double> levels) {
  const auto s = sorted_copy(draws);
  std::vector<double> out;
  out.reserve(levels.size());
  for (double q : levels) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::invalid_parameter, "q outside [0,1]");
    out.push_back(sorted_quantile(s, q));
  }
  return out;
}

}  // namespace gmrt
