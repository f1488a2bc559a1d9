#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gmrt/core.hpp"
#include "gmrt/error.hpp"
#include "oracles.hpp"

using namespace gmrt;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::runtime_failure;
}

}  // namespace

TEST_CASE("case series validation") {
  CHECK(code_of([] { CaseSeries::from_counts({5}); }) == ErrorCode::validation_error);
  CHECK(code_of([] { CaseSeries::from_counts({5, -1, 3}); }) == ErrorCode::validation_error);
  const auto s = CaseSeries(parse_date("2020-06-14"), {1, 2, 3});
  CHECK(s.size() == 3);
  CHECK(format_date(s.date_at(2)) == "2020-06-28");
  for (std::size_t i = 1; i < s.size(); ++i) CHECK((s.date_at(i) - s.date_at(i - 1)).count() == 7);
  CHECK(s.truncated(2).size() == 2);
  CHECK(code_of([&] { s.truncated(4); }) == ErrorCode::index_error);
}

TEST_CASE("case CSV parsing") {
  std::istringstream good("date,cases\n2020-06-14,10\n2020-06-21,12\n2020-06-28,0\n");
  const auto s = parse_case_csv(good);
  CHECK(s.size() == 3);
  CHECK(s[1] == 12);
  std::ostringstream back;
  write_case_csv(back, s);
  CHECK(back.str() == "date,cases\n2020-06-14,10\n2020-06-21,12\n2020-06-28,0\n");

  std::istringstream gap("date,cases\n2020-06-14,10\n2020-06-22,12\n");
  CHECK(code_of([&] { parse_case_csv(gap); }) == ErrorCode::validation_error);
  std::istringstream header("day,count\n2020-06-14,10\n2020-06-21,12\n");
  CHECK(code_of([&] { parse_case_csv(header); }) == ErrorCode::validation_error);
  std::istringstream negative("date,cases\n2020-06-14,10\n2020-06-21,-2\n");
  CHECK(code_of([&] { parse_case_csv(negative); }) == ErrorCode::validation_error);
}

TEST_CASE("discretize_gamma: short generation time on a weekly grid") {
  const auto g = discretize_gamma(4.6, 1.2, 7.0, 3, PmfKind::generation);
  REQUIRE(g.max_lag() == 3);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-3));
  double sum = 0.0;
  for (double p : g.probs()) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-12);

  // oracle: CDF differences from numerical integration, lag 0 removed
  std::vector<double> o(4, 0.0);
  for (int k = 1; k <= 3; ++k) {
    o[k] = oracle::gamma_cdf_numeric(7.0 * (k + 1), 4.6, 1.2) - oracle::gamma_cdf_numeric(7.0 * k, 4.6, 1.2);
  }
  const double z = o[1] + o[2] + o[3];
  for (int k = 1; k <= 3; ++k) CHECK(g[k] == doctest::Approx(o[k] / z).epsilon(1e-8));
}

TEST_CASE("discretize_gamma: exponential case has geometric bins") {
  const auto d = discretize_gamma(10.0, 10.0, 7.0, 6, PmfKind::delay);
  for (std::size_t k = 1; k <= 6; ++k) CHECK(d[k] / d[k - 1] == doctest::Approx(std::exp(-0.7)).epsilon(1e-10));
}

TEST_CASE("discretize_gamma: delay keeps lag-0 mass") {
  const auto d = discretize_gamma(4.6, 1.2, 7.0, 3, PmfKind::delay);
  CHECK(d[0] > 0.0);
  const auto g = discretize_gamma(4.6, 1.2, 7.0, 3, PmfKind::generation);
  CHECK(g[0] == 0.0);
}

TEST_CASE("discretize_gamma: default truncation reaches 0.999 mass") {
  for (auto [mean, sd] : {std::pair{11.5, 8.5}, {5.5, 2.5}, {4.0, 4.0}, {30.0, 20.0}}) {
    const auto d = discretize_gamma(mean, sd, 7.0, std::nullopt, PmfKind::delay);
    const std::size_t l = d.max_lag();
    CHECK(oracle::gamma_cdf_numeric(7.0 * (l + 1), mean, sd) >= 0.999 - 1e-9);
    if (l > 1) CHECK(oracle::gamma_cdf_numeric(7.0 * l, mean, sd) < 0.999 + 1e-9);
  }
}

TEST_CASE("discretize_gamma properties on random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mean_d(0.5, 40.0), cv(0.1, 2.0), step_d(0.5, 14.0);
  std::uniform_int_distribution<int> lags(1, 12);
  for (int rep = 0; rep < 200; ++rep) {
    const double mean = mean_d(rng), sd = mean * cv(rng), step = step_d(rng);
    const int l = lags(rng);
    const auto kind = rep % 2 ? PmfKind::generation : PmfKind::delay;
    DiscretizedPMF p{{1.0}, PmfKind::delay};
    try {
      p = discretize_gamma(mean, sd, step, l, kind);
    } catch (const Error& e) {
      // generation PMFs whose lags >= 1 carry no mass are rejected
      CHECK(e.code() == ErrorCode::degenerate_distribution);
      continue;
    }
    double sum = 0.0;
    for (double v : p.probs()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    // appending lags keeps the ratios of the existing bins
    const auto wider = discretize_gamma(mean, sd, step, l + 3, kind);
    for (int j = 1; j <= l; ++j) {
      if (p[j - 1] > 1e-300 && p[j] > 1e-300) {
        CHECK(wider[j] / wider[j - 1] == doctest::Approx(p[j] / p[j - 1]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> odd{1, 2, 3, 4, 5};
  CHECK(weighted_quantile(odd, 0.5) == 3.0);
  const std::vector<double> two{0, 10};
  CHECK(weighted_quantile(two, 0.975) == doctest::Approx(9.75).epsilon(1e-15));
  const std::vector<double> flat(17, 2.5);
  for (double q : {0.0, 0.1, 0.5, 0.975, 1.0}) CHECK(weighted_quantile(flat, q) == 2.5);
  CHECK_THROWS_AS(weighted_quantile(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("quantile properties: oracle, monotone in q, affine equivariant") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> size(1, 60);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(size(rng));
    for (auto& v : x) v = n01(rng);
    const double a = 0.1 + std::abs(n01(rng)), b = n01(rng);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    double prev = -INFINITY;
    for (double q = 0.0; q <= 1.0; q += 0.05) {
      const double v = weighted_quantile(x, q);
      CHECK(v == doctest::Approx(oracle::type7(x, q)).epsilon(1e-12));
      CHECK(v >= prev);
      prev = v;
      CHECK(weighted_quantile(y, q) == doctest::Approx(a * v + b).epsilon(1e-10));
    }
    const std::vector<double> levels{0.025, 0.5, 0.975};
    const auto many = quantiles(x, levels);
    for (std::size_t k = 0; k < levels.size(); ++k) CHECK(many[k] == weighted_quantile(x, levels[k]));
  }
}
