#include "gmrt/seirs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gmrt/error.hpp"
#include "gmrt/renewal.hpp"
#include "gmrt/rng.hpp"

namespace gmrt {

namespace {

std::int64_t binomial(std::int64_t n, double p, Rng& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(rng);
}

// Probability that an arrival at a uniform time within a step of length dt
// leaves a compartment with exit rate k before the step ends.
double pass_through(double k, double dt) {
  const double x = k * dt;
  return 1.0 + std::expm1(-x) / x;
}

}  // namespace

double SeirsParams::beta_at(double week) const {
  if (beta.empty()) return 0.0;
  if (week <= beta.front().week) return beta.front().beta;
  if (week >= beta.back().week) return beta.back().beta;
  const auto hi = std::upper_bound(beta.begin(), beta.end(), week,
                                   [](double w, const BetaKnot& k) { return w < k.week; });
  const auto lo = hi - 1;
  const double f = (week - lo->week) / (hi->week - lo->week);
  return lo->beta + f * (hi->beta - lo->beta);
}

void validate(const SeirsParams& p) {
  if (p.population <= 0) throw Error(ErrorCode::invalid_parameter, "population must be positive");
  if (p.initial_infectious <= 0 || p.initial_infectious > p.population) {
    throw Error(ErrorCode::invalid_parameter, "initial infectious must lie in (0, N]");
  }
  if (p.initial_exposed < 0 || p.initial_exposed + p.initial_infectious > p.population) {
    throw Error(ErrorCode::invalid_parameter, "initial exposed out of range");
  }
  if (!(p.sigma_latent > 0.0) || !(p.gamma_infectious > 0.0) || !(p.omega > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "SEIRS rates must be positive");
  }
  if (p.horizon < 1) throw Error(ErrorCode::invalid_parameter, "horizon must be >= 1 week");
  if (p.beta.empty()) throw Error(ErrorCode::invalid_parameter, "beta needs at least one knot");
  for (std::size_t i = 0; i < p.beta.size(); ++i) {
    if (!(p.beta[i].beta >= 0.0) || !std::isfinite(p.beta[i].beta)) {
      throw Error(ErrorCode::invalid_parameter, "beta knots must be finite and non-negative");
    }
    if (i > 0 && !(p.beta[i].week > p.beta[i - 1].week)) {
      throw Error(ErrorCode::invalid_parameter, "beta knot weeks must be strictly increasing");
    }
  }
}

SeirsParams default_seirs_params() {
  SeirsParams p;
  const std::pair<double, double> r0_knots[] = {{0, 1.1},  {6, 1.9},  {12, 1.9},
                                                {20, 1.1}, {28, 1.1}, {36, 1.8},
                                                {42, 1.8}, {50, 0.8}, {53, 0.8}};
  for (const auto& [week, r0] : r0_knots) p.beta.push_back({week, r0 * p.gamma_infectious});
  return p;
}

OutbreakTruth simulate_seirs(const SeirsParams& p, std::uint64_t seed, double dt,
                             const StepObserver& observer) {
  validate(p);
  if (!(dt > 0.0) || dt > 1.0 / 7.0 + 1e-12) {
    throw Error(ErrorCode::invalid_parameter, "dt must lie in (0, 1/7] weeks");
  }
  const double steps_real = 1.0 / dt;
  const long steps = std::lround(steps_real);
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9) {
    throw Error(ErrorCode::invalid_parameter, "1/dt must be an integer");
  }

  Rng rng = make_rng(seed, "seirs");
  const double n = static_cast<double>(p.population);
  const double p_ei = -std::expm1(-p.sigma_latent * dt);
  const double p_ir = -std::expm1(-p.gamma_infectious * dt);
  const double p_rs = -std::expm1(-p.omega * dt);
  const double q_ei = pass_through(p.sigma_latent, dt);
  const double q_ir = pass_through(p.gamma_infectious, dt);

  SeirsState x;
  x.e = p.initial_exposed;
  x.i = p.initial_infectious;
  x.s = p.population - x.e - x.i;

  OutbreakTruth out;
  out.week_start.reserve(static_cast<std::size_t>(p.horizon));
  out.e2i.assign(static_cast<std::size_t>(p.horizon), 0);
  for (int w = 0; w < p.horizon; ++w) {
    out.week_start.push_back(x);
    for (long k = 0; k < steps; ++k) {
      const double t = w + static_cast<double>(k) * dt;
      std::int64_t ei = binomial(x.e, p_ei, rng);
      std::int64_t ir = binomial(x.i, p_ir, rng);
      const std::int64_t rs = binomial(x.r, p_rs, rng);
      const double i_mid = static_cast<double>(x.i) + 0.5 * static_cast<double>(ei - ir);
      const double hazard = p.beta_at(t + 0.5 * dt) * std::max(i_mid, 0.0) * dt / n;
      const std::int64_t se = binomial(x.s, -std::expm1(-hazard), rng);
      ei += binomial(se, q_ei, rng);
      ir += binomial(ei, q_ir, rng);

      x.s += rs - se;
      x.e += se - ei;
      x.i += ei - ir;
      x.r += ir - rs;
      out.e2i[static_cast<std::size_t>(w)] += ei;
      if (observer) observer(t + dt, x);
    }
  }
  out.true_rt = true_rt(out, p);
  return out;
}

std::vector<double> true_rt(const OutbreakTruth& truth, const SeirsParams& p) {
  std::vector<double> rt(truth.week_start.size());
  const double n = static_cast<double>(p.population);
  for (std::size_t w = 0; w < rt.size(); ++w) {
    rt[w] = p.r0_at(static_cast<double>(w)) * static_cast<double>(truth.week_start[w].s) / n;
  }
  return rt;
}

CaseSeries observe_cases(const OutbreakTruth& truth, double rho, double kappa, std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::invalid_parameter, "rho must lie in (0, 1)");
  if (!(kappa > 0.0)) throw Error(ErrorCode::invalid_parameter, "kappa must be positive");
  Rng rng = make_rng(seed, "observe");
  std::vector<std::int64_t> counts;
  counts.reserve(truth.weeks());
  for (std::int64_t e : truth.e2i) {
    const double mean = rho * static_cast<double>(e);
    counts.push_back(mean > 0.0 ? sample_negbinom(mean, kappa, rng) : 0);
  }
  return CaseSeries::from_counts(std::move(counts));
}

}  // namespace gmrt
