#include "gmrt/renewal.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "gmrt/error.hpp"
#include "gmrt/simd.hpp"

namespace gmrt {

namespace {

// Errors come back as special values; the callers map non-finite terms to -inf.
using FastPolicy = boost::math::policies::policy<
    boost::math::policies::promote_double<false>,
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::pole_error<boost::math::policies::ignore_error>,
    boost::math::policies::domain_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

double lgam(double x) { return boost::math::lgamma(x, FastPolicy{}); }
double digam(double x) { return boost::math::digamma(x, FastPolicy{}); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

}  // namespace

LatentIncidence::LatentIncidence(std::vector<double> seeded, std::vector<double> observed_period)
    : seeded_count_(seeded.size()), values_(std::move(seeded)) {
  if (seeded_count_ == 0) throw Error(ErrorCode::invalid_parameter, "seeded incidence is empty");
  values_.insert(values_.end(), observed_period.begin(), observed_period.end());
  for (double v : values_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::invalid_parameter, "incidence must be strictly positive");
    }
  }
}

double LatentIncidence::at(long j) const {
  const long idx = j + static_cast<long>(seeding());
  if (idx < 0 || idx >= static_cast<long>(values_.size())) {
    throw Error(ErrorCode::index_error, "incidence index out of range");
  }
  return values_[static_cast<std::size_t>(idx)];
}

void validate(const NuisanceParams& p) {
  if (!(p.rho > 0.0 && p.rho < 1.0)) throw Error(ErrorCode::invalid_parameter, "rho must lie in (0,1)");
  if (!(p.kappa > 0.0)) throw Error(ErrorCode::invalid_parameter, "kappa must be positive");
  if (!(p.nu > 0.0)) throw Error(ErrorCode::invalid_parameter, "nu must be positive");
  if (!(p.lambda > 0.0)) throw Error(ErrorCode::invalid_parameter, "lambda must be positive");
}

DensityTerm log_density(const LogNormalPrior& p, double x) {
  if (!(x > 0.0)) return {kNegInf, 0.0};
  const double lx = std::log(x);
  const double r = (lx - p.meanlog) / p.sdlog;
  return {-kLogSqrt2Pi - std::log(p.sdlog) - lx - 0.5 * r * r, (-1.0 - r / p.sdlog) / x};
}

DensityTerm log_density(const TruncatedNormalPrior& p, double x) {
  if (!(x > p.lower)) return {kNegInf, 0.0};
  const double r = (x - p.loc) / p.scale;
  // P(X > lower) for the untruncated normal
  const double tail = 0.5 * boost::math::erfc((p.lower - p.loc) / (p.scale * std::sqrt(2.0)));
  return {-kLogSqrt2Pi - std::log(p.scale) - 0.5 * r * r - std::log(tail), -r / p.scale};
}

DensityTerm log_density(const ExponentialPrior& p, double x) {
  if (!(x >= 0.0)) return {kNegInf, 0.0};
  return {std::log(p.rate) - p.rate * x, -p.rate};
}

DensityTerm log_density(const GammaPrior& p, double x) {
  if (!(x > 0.0)) return {kNegInf, 0.0};
  return {p.shape * std::log(p.rate) - lgam(p.shape) + (p.shape - 1.0) * std::log(x) - p.rate * x,
          (p.shape - 1.0) / x - p.rate};
}

void validate(const HyperPriorSpec& h) {
  auto pos = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::config_error, std::string(what) + " must be positive");
    }
  };
  pos(h.rho.sdlog, "rho sdlog");
  pos(h.kappa.scale, "kappa scale");
  pos(h.nu.sdlog, "nu sdlog");
  pos(h.lambda.rate, "lambda rate");
  pos(h.log_r1.sd, "log R1 sd");
  pos(h.sigma_rw1.sdlog, "rw1 sigma sdlog");
  pos(h.sigma_ou.sdlog, "ou sigma sdlog");
  pos(h.theta_ou.rate, "ou theta rate");
  pos(h.sigma_rw2.sdlog, "rw2 sigma sdlog");
  pos(h.sigma_ibm.sdlog, "ibm sigma sdlog");
  pos(h.alpha_hsgp.sdlog, "hsgp alpha sdlog");
  pos(h.ell_hsgp.shape, "hsgp ell shape");
  pos(h.ell_hsgp.rate, "hsgp ell rate");
  if (!(h.kappa.lower < h.kappa.loc + 40.0 * h.kappa.scale)) {
    throw Error(ErrorCode::config_error, "kappa truncation leaves no mass");
  }
}

// --- renewal terms ------------------------------------------------------------

namespace {

void check_period(const LatentIncidence& inc, std::size_t t) {
  if (t < 1 || t > inc.periods()) throw Error(ErrorCode::index_error, "period index out of range");
}

// sum_{k=kmin}^{L} w_k I_{t-k}, dropping terms before the seeding window
double convolve_at(const LatentIncidence& inc, const DiscretizedPMF& w, std::size_t t,
                   std::size_t kmin) {
  const long n = static_cast<long>(inc.seeding());
  double s = 0.0;
  for (std::size_t k = kmin; k <= w.max_lag(); ++k) {
    const long j = static_cast<long>(t) - static_cast<long>(k);
    if (j < -n) break;
    s += w[k] * inc.at(j);
  }
  return s;
}

}  // namespace

double renewal_load(const LatentIncidence& incidence, const DiscretizedPMF& g, std::size_t t) {
  check_period(incidence, t);
  if (g.kind() != PmfKind::generation) {
    throw Error(ErrorCode::invalid_parameter, "renewal load needs a generation PMF");
  }
  return convolve_at(incidence, g, t, 1);
}

double delay_load(const LatentIncidence& incidence, const DiscretizedPMF& d, std::size_t t) {
  check_period(incidence, t);
  return convolve_at(incidence, d, t, 0);
}

double negbinom_logpmf(std::int64_t y, double mean, double kappa) {
  if (!(mean > 0.0)) throw Error(ErrorCode::invalid_state, "negative binomial mean must be positive");
  if (!(kappa > 0.0)) throw Error(ErrorCode::invalid_parameter, "kappa must be positive");
  const double yd = static_cast<double>(y);
  return lgam(yd + kappa) - lgam(kappa) - lgam(yd + 1.0) - kappa * std::log1p(mean / kappa) +
         yd * (std::log(mean) - std::log(kappa + mean));
}

double loglik_obs(const CaseSeries& cases, const LatentIncidence& incidence, double rho,
                  double kappa, const DiscretizedPMF& d) {
  if (cases.size() != incidence.periods()) {
    throw Error(ErrorCode::alignment_error, "cases and incidence cover different periods");
  }
  if (!(rho > 0.0) || !(kappa > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "rho and kappa must be positive");
  }
  double ll = 0.0;
  for (std::size_t t = 1; t <= cases.size(); ++t) {
    const double mean = rho * delay_load(incidence, d, t);
    if (!(mean > 0.0) || !std::isfinite(mean)) {
      throw Error(ErrorCode::invalid_state, "expected cases not positive at t=" + std::to_string(t));
    }
    ll += negbinom_logpmf(cases[t - 1], mean, kappa);
  }
  return ll;
}

double loglik_incidence(const LatentIncidence& incidence, std::span<const double> gamma, double nu,
                        double lambda, const DiscretizedPMF& g) {
  if (gamma.size() != incidence.periods()) {
    throw Error(ErrorCode::alignment_error, "log R path and incidence cover different periods");
  }
  if (incidence.seeding() < g.max_lag()) {
    throw Error(ErrorCode::invalid_parameter, "seeding window shorter than the generation PMF");
  }
  if (!(nu > 0.0) || !(lambda > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "nu and lambda must be positive");
  }
  double ll = 0.0;
  for (double seed : incidence.seeded()) ll += -std::log(lambda) - seed / lambda;
  for (std::size_t t = 1; t <= gamma.size(); ++t) {
    const double shape = std::exp(gamma[t - 1]) * renewal_load(incidence, g, t) * nu;
    if (!(shape > 0.0) || !std::isfinite(shape)) {
      throw Error(ErrorCode::invalid_state, "gamma shape not positive at t=" + std::to_string(t));
    }
    const double x = incidence.at(static_cast<long>(t));
    ll += shape * std::log(nu) - lgam(shape) + (shape - 1.0) * std::log(x) - nu * x;
  }
  return ll;
}

RenewalTerms renewal_loglik(const CaseSeries* cases, std::span<const double> log_incidence,
                            std::size_t seeding, std::span<const double> gamma,
                            const NuisanceParams& p, const DiscretizedPMF& g,
                            const DiscretizedPMF& d, bool include_incidence,
                            RenewalGradient* grad) {
  const std::size_t seeds = seeding + 1;
  const std::size_t t_len = gamma.size();
  const std::size_t total = log_incidence.size();
  if (total != seeds + t_len) throw Error(ErrorCode::alignment_error, "incidence layout mismatch");
  if (cases && cases->size() != t_len) {
    throw Error(ErrorCode::alignment_error, "cases and log R path cover different periods");
  }
  const auto& k = simd::kernels();

  std::vector<double> inc(total);
  for (std::size_t i = 0; i < total; ++i) inc[i] = std::exp(log_incidence[i]);
  std::vector<double> ginc;  // d ll / d I
  if (grad) ginc.assign(total, 0.0);

  RenewalTerms out;
  std::vector<double> buf(t_len), gbuf(t_len);
  std::vector<double> back(total);

  if (cases) {
    k.causal_conv(d.probs().data(), d.probs().size(), inc.data(), seeds, buf.data(), t_len);
    double ll = 0.0, dlogrho = 0.0, dkappa = 0.0;
    const double kappa = p.kappa;
    const double lg_kappa = lgam(kappa);
    const double dg_kappa = grad ? digam(kappa) : 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double mu = p.rho * buf[t];
      if (!(mu > 0.0) || !std::isfinite(mu)) return {kNegInf, kNegInf};
      const double y = static_cast<double>((*cases)[t]);
      const double log1p_ratio = std::log1p(mu / kappa);
      ll += lgam(y + kappa) - lg_kappa - lgam(y + 1.0) - kappa * log1p_ratio +
            y * (std::log(mu) - std::log(kappa + mu));
      if (grad) {
        const double dmu = y / mu - (y + kappa) / (kappa + mu);
        gbuf[t] = dmu * p.rho;
        dlogrho += dmu * mu;
        dkappa += digam(y + kappa) - dg_kappa - log1p_ratio + (mu - y) / (kappa + mu);
      }
    }
    out.observation = ll;
    if (grad) {
      k.causal_conv_adjoint(d.probs().data(), d.probs().size(), gbuf.data(), t_len, seeds,
                            back.data(), total);
      for (std::size_t i = 0; i < total; ++i) ginc[i] += back[i];
      grad->log_rho += dlogrho;
      grad->log_kappa += dkappa * kappa;
    }
  }

  if (include_incidence) {
    double ll = 0.0, dloglambda = 0.0;
    for (std::size_t i = 0; i < seeds; ++i) {
      ll += -std::log(p.lambda) - inc[i] / p.lambda;
      if (grad) {
        ginc[i] += -1.0 / p.lambda;
        dloglambda += -1.0 + inc[i] / p.lambda;
      }
    }
    k.causal_conv(g.probs().data(), g.probs().size(), inc.data(), seeds, buf.data(), t_len);
    const double log_nu = std::log(p.nu);
    double dlognu = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double r = std::exp(gamma[t]);
      const double shape = r * buf[t] * p.nu;
      if (!(shape > 0.0) || !std::isfinite(shape)) return {out.observation, kNegInf};
      const double x = log_incidence[seeds + t];
      const double it = inc[seeds + t];
      ll += shape * log_nu - lgam(shape) + (shape - 1.0) * x - p.nu * it;
      if (grad) {
        const double dshape = log_nu - digam(shape) + x;
        grad->gamma[t] += dshape * shape;
        gbuf[t] = dshape * r * p.nu;  // d / d Lambda_t
        ginc[seeds + t] += (shape - 1.0) / it - p.nu;
        dlognu += dshape * shape + shape - p.nu * it;
      }
    }
    out.incidence = ll;
    if (grad) {
      k.causal_conv_adjoint(g.probs().data(), g.probs().size(), gbuf.data(), t_len, seeds,
                            back.data(), total);
      for (std::size_t i = 0; i < total; ++i) ginc[i] += back[i];
      grad->log_nu += dlognu;
      grad->log_lambda += dloglambda;
    }
  }

  if (grad) {
    for (std::size_t i = 0; i < total; ++i) grad->log_incidence[i] += ginc[i] * inc[i];
  }
  return out;
}

// --- forward simulation ------------------------------------------------------

std::int64_t sample_negbinom(double mean, double kappa, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  std::gamma_distribution<double> mix(kappa, mean / kappa);
  const double rate = mix(rng);
  if (!(rate > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> pois(rate);
  return pois(rng);
}

RenewalSimulation simulate_renewal(std::span<const double> rt, const DiscretizedPMF& g,
                                   const DiscretizedPMF& d, const NuisanceParams& p,
                                   std::size_t seeding, Rng& rng) {
  validate(p);
  if (seeding < g.max_lag()) {
    throw Error(ErrorCode::invalid_parameter, "seeding window shorter than the generation PMF");
  }
  const std::size_t t_len = rt.size();
  std::vector<double> values(seeding + 1 + t_len);
  std::exponential_distribution<double> seed_dist(1.0 / p.lambda);
  for (std::size_t i = 0; i <= seeding; ++i) values[i] = seed_dist(rng);
  for (std::size_t t = 0; t < t_len; ++t) {
    const std::size_t pos = seeding + 1 + t;
    double load = 0.0;
    for (std::size_t k = 1; k <= g.max_lag(); ++k) load += g[k] * values[pos - k];
    std::gamma_distribution<double> draw(rt[t] * load * p.nu, 1.0 / p.nu);
    values[pos] = std::max(draw(rng), std::numeric_limits<double>::min());
  }
  std::vector<std::int64_t> counts(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const std::size_t pos = seeding + 1 + t;
    double load = 0.0;
    for (std::size_t k = 0; k <= d.max_lag() && k <= pos; ++k) load += d[k] * values[pos - k];
    counts[t] = sample_negbinom(p.rho * load, p.kappa, rng);
  }
  std::vector<double> seeded(values.begin(), values.begin() + static_cast<long>(seeding) + 1);
  std::vector<double> observed(values.begin() + static_cast<long>(seeding) + 1, values.end());
  return {LatentIncidence(std::move(seeded), std::move(observed)),
          CaseSeries::from_counts(std::move(counts))};
}

}  // namespace gmrt
