#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gmrt/core.hpp"

namespace gmrt {

/// Knot of the piecewise-linear transmission rate (per week).
struct BetaKnot {
  double week;
  double beta;
};

struct SeirsParams {
  std::int64_t population = 600000;
  std::int64_t initial_infectious = 50;
  std::int64_t initial_exposed = 0;
  std::vector<BetaKnot> beta;         // sorted by week; flat beyond the ends
  double sigma_latent = 7.0 / 4.0;    // 1 / mean latent period (per week)
  double gamma_infectious = 7.0 / 7.5;  // 1 / mean infectious period (per week)
  double omega = 1.0 / 12.0;          // 1 / mean immunity duration (per week)
  int horizon = 53;                   // weeks

  double beta_at(double week) const;
  double r0_at(double week) const { return beta_at(week) / gamma_infectious; }
};

void validate(const SeirsParams& p);

/// Default scenario: an early wave, a trough, a late-year resurgence and a
/// final decline. R0 knots are scaled by the recovery rate.
SeirsParams default_seirs_params();

struct SeirsState {
  std::int64_t s = 0, e = 0, i = 0, r = 0;
  std::int64_t total() const noexcept { return s + e + i + r; }
};

struct OutbreakTruth {
  std::vector<SeirsState> week_start;  // state at the start of each week
  std::vector<std::int64_t> e2i;       // E -> I transitions during each week
  std::vector<double> true_rt;
  std::size_t weeks() const noexcept { return e2i.size(); }
};

/// Called after every tau-leap step with the elapsed time (weeks).
using StepObserver = std::function<void(double, const SeirsState&)>;

/// Chain-binomial tau-leap. Within a step, individuals exposed (or made
/// infectious) during the step may move on with the probability of an
/// exit before the step ends given a uniform arrival time, and the force
/// of infection uses the mid-step infectious count. 1/dt must be an integer.
OutbreakTruth simulate_seirs(const SeirsParams& p, std::uint64_t seed, double dt = 1.0 / 7.0,
                             const StepObserver& observer = {});

/// R0 at each week start times the week-start susceptible fraction.
std::vector<double> true_rt(const OutbreakTruth& truth, const SeirsParams& p);

/// Weekly negative binomial counts with mean rho * E2I.
CaseSeries observe_cases(const OutbreakTruth& truth, double rho, double kappa, std::uint64_t seed);

}  // namespace gmrt
