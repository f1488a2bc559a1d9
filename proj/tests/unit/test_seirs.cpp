#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gmrt/error.hpp"
#include "gmrt/rng.hpp"
#include "gmrt/seirs.hpp"

using namespace gmrt;

namespace {

SeirsParams no_transmission(std::int64_t exposed) {
  SeirsParams p;
  p.population = 1000;
  p.initial_exposed = exposed;
  p.initial_infectious = 1;
  p.beta = {{0.0, 0.0}};
  p.horizon = 3;
  return p;
}

OutbreakTruth flat_truth(std::size_t weeks, std::int64_t e2i) {
  OutbreakTruth t;
  t.e2i.assign(weeks, e2i);
  t.week_start.assign(weeks, SeirsState{});
  t.true_rt.assign(weeks, 1.0);
  return t;
}

void moments(const CaseSeries& c, double& mean, double& var) {
  const auto& v = c.counts();
  mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  var = 0.0;
  for (auto x : v) var += (x - mean) * (x - mean);
  var /= v.size() - 1.0;
}

}  // namespace

TEST_CASE("beta interpolation and the default scenario") {
  const auto p = default_seirs_params();
  CHECK(p.population == 600000);
  CHECK(p.initial_infectious == 50);
  CHECK(p.horizon == 53);
  CHECK(p.r0_at(0.0) == doctest::Approx(1.1));
  CHECK(p.r0_at(6.0) == doctest::Approx(1.9));
  CHECK(p.r0_at(3.0) == doctest::Approx(1.5));
  CHECK(p.r0_at(53.0) == doctest::Approx(0.8));
  CHECK(p.r0_at(80.0) == doctest::Approx(0.8));
  CHECK(p.r0_at(-4.0) == doctest::Approx(1.1));
}

TEST_CASE("no transmission means no new exposures") {
  auto p = no_transmission(100);
  p.horizon = 30;
  const auto truth = simulate_seirs(p, 3);
  // susceptibles only gain (waning immunity) and latent exits come from the initial E
  CHECK(truth.week_start[0].s == 1000 - 101);
  for (std::size_t w = 1; w < truth.weeks(); ++w) CHECK(truth.week_start[w].s >= truth.week_start[w - 1].s);
  CHECK(std::accumulate(truth.e2i.begin(), truth.e2i.end(), std::int64_t{0}) <= 100);
  for (double r : truth.true_rt) CHECK(r == 0.0);
}

TEST_CASE("population is conserved at every step") {
  auto p = default_seirs_params();
  p.horizon = 20;
  std::int64_t bad = 0;
  long steps = 0;
  const auto truth = simulate_seirs(p, 5, 1.0 / 7.0, [&](double, const SeirsState& s) {
    ++steps;
    if (s.total() != p.population || s.s < 0 || s.e < 0 || s.i < 0 || s.r < 0) ++bad;
  });
  CHECK(steps == 20 * 7);
  CHECK(bad == 0);
  CHECK(truth.weeks() == 20);
}

TEST_CASE("latent exits over one week match 1 - exp(-sigma)") {
  const auto p = no_transmission(500);
  const double target = 1.0 - std::exp(-p.sigma_latent);
  for (double dt : {1.0 / 7.0, 1.0 / 70.0}) {
    double exits = 0.0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) exits += simulate_seirs(p, 1000 + r, dt).e2i[0];
    const double frac = exits / (500.0 * reps);
    const double se = std::sqrt(target * (1.0 - target) / (500.0 * reps));
    INFO("dt = " << dt);
    CHECK(std::abs(frac - target) < 3.0 * se);
  }
}

TEST_CASE("true R is R0 times the susceptible fraction") {
  auto p = default_seirs_params();
  OutbreakTruth t;
  t.week_start = {{600000, 0, 0, 0}, {300000, 0, 0, 300000}, {0, 0, 0, 600000}};
  t.e2i = {0, 0, 0};
  const auto rt = true_rt(t, p);
  CHECK(rt[0] == doctest::Approx(1.1));
  CHECK(rt[1] == doctest::Approx(0.5 * p.r0_at(1.0)));
  CHECK(rt[2] == 0.0);
}

TEST_CASE("observed cases") {
  SUBCASE("no infections, no cases") {
    const auto c = observe_cases(flat_truth(30, 0), 0.1, 5.0, 1);
    for (auto v : c.counts()) CHECK(v == 0);
  }
  SUBCASE("negative binomial dispersion") {
    // mean 100, kappa 5: variance 100 + 100^2 / 5, ratio 21
    const auto c = observe_cases(flat_truth(20000, 1000), 0.1, 5.0, 2);
    double mean = 0.0, var = 0.0;
    moments(c, mean, var);
    CHECK(mean == doctest::Approx(100.0).epsilon(0.01));
    CHECK(var / mean == doctest::Approx(21.0).epsilon(0.05));
  }
  SUBCASE("large kappa approaches Poisson") {
    const auto c = observe_cases(flat_truth(20000, 500), 0.1, 1e8, 3);
    double mean = 0.0, var = 0.0;
    moments(c, mean, var);
    CHECK(var / mean == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(observe_cases(flat_truth(3, 1), 1.0, 5.0, 1), Error);
  CHECK_THROWS_AS(observe_cases(flat_truth(3, 1), 0.1, 0.0, 1), Error);
}

TEST_CASE("default scenario produces a bounded outbreak") {
  const auto p = default_seirs_params();
  for (int rep = 0; rep < 100; ++rep) {
    const auto truth = simulate_seirs(p, derive_seed(77, "replicate", rep));
    const auto peak = std::max_element(truth.e2i.begin(), truth.e2i.end());
    INFO("replicate " << rep);
    CHECK(*peak > 0);
    CHECK(peak - truth.e2i.begin() < 52);
    CHECK(truth.e2i.back() < 0.1 * *peak);
    CHECK(truth.true_rt.size() == 53);
  }
}

TEST_CASE("simulation is a function of the seed") {
  const auto p = default_seirs_params();
  const auto a = simulate_seirs(p, 9), b = simulate_seirs(p, 9), c = simulate_seirs(p, 10);
  CHECK(a.e2i == b.e2i);
  CHECK(a.true_rt == b.true_rt);
  CHECK(a.e2i != c.e2i);
  const auto ca = observe_cases(a, 0.05, 5.0, 4), cb = observe_cases(b, 0.05, 5.0, 4);
  CHECK(std::ranges::equal(ca.counts(), cb.counts()));
}

TEST_CASE("parameter validation") {
  auto p = default_seirs_params();
  CHECK_NOTHROW(validate(p));
  auto bad = p;
  bad.initial_infectious = 0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = p;
  bad.beta = {{5.0, 1.0}, {3.0, 1.0}};
  CHECK_THROWS_AS(validate(bad), Error);
  bad = p;
  bad.beta = {{0.0, -0.1}};
  CHECK_THROWS_AS(validate(bad), Error);
  bad = p;
  bad.omega = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_THROWS_AS(simulate_seirs(p, 1, 0.3), Error);
  CHECK_THROWS_AS(simulate_seirs(p, 1, 1.0 / 7.5), Error);
}
