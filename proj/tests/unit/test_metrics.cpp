#include <cmath>
#include <random>

#include "doctest.h"
#include "gmrt/error.hpp"
#include "gmrt/metrics.hpp"

using namespace gmrt;

namespace {

// quantile rows at (0.005, 0.025, 0.1, 0.5, 0.9, 0.975, 0.995)
std::array<double, 7> row(double lo95, double lo80, double med, double hi80, double hi95) {
  return {lo95 - 0.1, lo95, lo80, med, hi80, hi95, hi95 + 0.1};
}

}  // namespace

TEST_CASE("metric examples") {
  const RtPosteriorSummary s({row(0.8, 0.9, 1.0, 1.1, 1.2), row(1.0, 1.2, 1.5, 1.8, 2.0), row(0.5, 0.6, 0.7, 0.8, 0.9),
                              row(0.9, 1.0, 1.1, 1.2, 1.3)});
  const std::vector<double> truth{1.0, 1.9, 0.9, 1.3};
  const auto m = compute_metrics(s, truth);
  // week 1 inside both, week 2 inside 95 only, week 3 on the 95 upper bound, week 4 on the 95 upper bound
  CHECK(m.envelope_95 == doctest::Approx(0.5));
  CHECK(m.envelope_80 == doctest::Approx(0.25));
  CHECK(m.mad == doctest::Approx((0.0 + 0.4 + 0.2 + 0.2) / 4.0));
  CHECK(m.mciw_95 == doctest::Approx((0.4 + 1.0 + 0.4 + 0.4) / 4.0));
  CHECK(m.mciw_80 == doctest::Approx((0.2 + 0.6 + 0.2 + 0.2) / 4.0));
}

TEST_CASE("decision score examples") {
  const std::vector<Interval> iv{{1.1, 1.5}, {0.9, 1.2}, {0.6, 0.95}, {0.6, 0.95}, {1.2, 1.4}};
  const std::vector<double> truth{1.3, 1.1, 0.8, 1.05, 0.9};
  // hits: first (above, truth above) and third (below, truth below)
  CHECK(decision_score(iv, truth) == doctest::Approx(0.4));
  CHECK_THROWS_AS(decision_score(iv, std::vector<double>{1.0}), Error);
}

TEST_CASE("metric properties on random summaries") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.2, 3.0), w(0.01, 0.5);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rep % 30;
    std::vector<std::array<double, 7>> rows, wider;
    std::vector<double> truth;
    for (std::size_t i = 0; i < n; ++i) {
      const double med = u(rng), a = w(rng), b = w(rng);
      rows.push_back(row(med - a - b, med - a, med, med + a, med + a + b));
      const double extra = w(rng);
      wider.push_back(row(med - a - b - extra, med - a - extra, med, med + a + extra, med + a + b + extra));
      truth.push_back(u(rng));
    }
    const auto m = compute_metrics(RtPosteriorSummary(rows), truth);
    const auto mw = compute_metrics(RtPosteriorSummary(wider), truth);
    CHECK(m.envelope_80 <= m.envelope_95);
    CHECK(m.mciw_80 <= m.mciw_95);
    CHECK(mw.envelope_95 >= m.envelope_95);
    CHECK(mw.envelope_80 >= m.envelope_80);
    CHECK(mw.mciw_95 > m.mciw_95);
    CHECK(mw.mad == doctest::Approx(m.mad));

    // a truth sitting on an interval bound is outside (open intervals)
    std::vector<double> on_edge(n);
    for (std::size_t i = 0; i < n; ++i) on_edge[i] = rows[i][1];
    CHECK(compute_metrics(RtPosteriorSummary(rows), on_edge).envelope_95 == 0.0);
  }
}

TEST_CASE("aggregation") {
  MetricReport r;
  r.mad = 0.1;
  r.envelope_95 = 0.9;
  r.envelope_80 = 0.7;
  r.mciw_95 = 0.5;
  r.mciw_80 = 0.3;
  r.cpu_minutes = 2.0;
  const std::vector<MetricReport> same(5, r);
  const auto a = aggregate(same);
  CHECK(a.count == 5);
  CHECK(a.mean.envelope_95 == doctest::Approx(0.9));
  CHECK(a.sd.envelope_95 == 0.0);
  CHECK(a.sd.mad == 0.0);
  CHECK_FALSE(a.mean.decision_score_95.has_value());

  MetricReport x = r, y = r;
  x.mad = 0.1;
  y.mad = 0.3;
  x.decision_score_95 = 0.5;
  y.decision_score_95 = 1.0;
  const std::vector<MetricReport> two{x, y};
  const auto b = aggregate(two);
  CHECK(b.mean.mad == doctest::Approx(0.2));
  CHECK(b.sd.mad == doctest::Approx(std::sqrt(0.02)));
  REQUIRE(b.mean.decision_score_95.has_value());
  CHECK(*b.mean.decision_score_95 == doctest::Approx(0.75));
  CHECK_FALSE(b.mean.decision_score_80.has_value());
  CHECK_THROWS_AS(aggregate(std::vector<MetricReport>{}), Error);
}

TEST_CASE("summary construction") {
  CHECK_THROWS_AS(RtPosteriorSummary({{1, 2, 3, 2, 5, 6, 7}}), Error);
  std::vector<std::vector<double>> per_week{{1, 2, 3, 4, 5}, {2, 2, 2, 2, 2}};
  const auto s = RtPosteriorSummary::from_samples(per_week);
  CHECK(s.weeks() == 2);
  CHECK(s.median(0) == 3.0);
  CHECK(s.at(0, 0.025) == doctest::Approx(1.1));
  CHECK(s.at(1, 0.995) == 2.0);
  CHECK_THROWS_AS(s.at(0, 0.3), Error);
  CHECK_THROWS_AS(compute_metrics(s, std::vector<double>{1.0}), Error);
}
