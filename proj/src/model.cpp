#include "gmrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gmrt/error.hpp"

namespace gmrt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Slice take(std::size_t& cursor, std::size_t n) {
  Slice s{cursor, n};
  cursor += n;
  return s;
}

const LogNormalPrior& sigma_prior(const HyperPriorSpec& h, PriorKind kind) {
  switch (kind) {
    case PriorKind::rw1: return h.sigma_rw1;
    case PriorKind::ou: return h.sigma_ou;
    case PriorKind::rw2: return h.sigma_rw2;
    case PriorKind::ibm: return h.sigma_ibm;
    case PriorKind::hsgp: break;
  }
  throw Error(ErrorCode::invalid_parameter, "HSGP has no sigma");
}

std::span<const double> view(std::span<const double> x, Slice s) { return x.subspan(s.offset, s.size); }
std::span<double> view(std::span<double> x, Slice s) { return x.subspan(s.offset, s.size); }

}  // namespace

ParameterLayout ParameterLayout::build(PriorKind prior, std::size_t periods, std::size_t seeding,
                                       std::size_t hsgp_basis_size) {
  ParameterLayout l;
  std::size_t cur = 0;
  l.latent = take(cur, prior == PriorKind::hsgp ? hsgp_basis_size : periods);
  l.gamma_prime = take(cur, prior == PriorKind::ibm ? periods : 0);
  l.log_seed = take(cur, seeding + 1);
  l.log_obs = take(cur, periods);
  l.log_rho = take(cur, 1);
  l.log_kappa = take(cur, 1);
  l.log_nu = take(cur, 1);
  l.log_lambda = take(cur, 1);
  const bool markov = prior != PriorKind::hsgp;
  l.log_sigma = take(cur, markov ? 1 : 0);
  l.log_theta = take(cur, prior == PriorKind::ou ? 1 : 0);
  l.log_alpha = take(cur, markov ? 0 : 1);
  l.log_ell = take(cur, markov ? 0 : 1);
  l.dim = cur;
  return l;
}

std::vector<std::pair<std::string, Slice>> ParameterLayout::named() const {
  return {{"latent", latent},       {"gamma_prime", gamma_prime}, {"log_seed", log_seed},
          {"log_obs", log_obs},     {"log_rho", log_rho},         {"log_kappa", log_kappa},
          {"log_nu", log_nu},       {"log_lambda", log_lambda},   {"log_sigma", log_sigma},
          {"log_theta", log_theta}, {"log_alpha", log_alpha},     {"log_ell", log_ell}};
}

RenewalPosterior::RenewalPosterior(ModelSpec spec, CaseSeries cases, LikelihoodMask mask)
    : spec_(std::move(spec)), cases_(std::move(cases)), periods_(cases_->size()), mask_(mask) {
  init();
}

RenewalPosterior::RenewalPosterior(ModelSpec spec, std::size_t periods, LikelihoodMask mask)
    : spec_(std::move(spec)), periods_(periods), mask_(mask) {
  if (mask_.observation) {
    throw Error(ErrorCode::invalid_parameter, "observation term requested without cases");
  }
  init();
}

void RenewalPosterior::init() {
  if (periods_ < 2) throw Error(ErrorCode::invalid_parameter, "need at least 2 periods");
  if (spec_.prior == PriorKind::rw2 && periods_ < 3) {
    throw Error(ErrorCode::invalid_parameter, "RW2 needs at least 3 periods");
  }
  if (spec_.generation.kind() != PmfKind::generation) {
    throw Error(ErrorCode::invalid_parameter, "generation PMF has the wrong kind");
  }
  validate(spec_.hyper);
  std::size_t m = 0;
  if (spec_.prior == PriorKind::hsgp) {
    basis_.emplace(periods_, spec_.ell_reference());
    m = basis_->cols();
  }
  layout_ = ParameterLayout::build(spec_.prior, periods_, spec_.seeding(), m);
}

DecodedParams RenewalPosterior::decode(std::span<const double> x) const {
  if (x.size() != layout_.dim) throw Error(ErrorCode::invalid_parameter, "parameter size mismatch");
  DecodedParams d;
  d.nuisance.rho = std::exp(x[layout_.log_rho.offset]);
  d.nuisance.kappa = std::exp(x[layout_.log_kappa.offset]);
  d.nuisance.nu = std::exp(x[layout_.log_nu.offset]);
  d.nuisance.lambda = std::exp(x[layout_.log_lambda.offset]);

  auto& h = d.prior;
  h.kind = spec_.prior;
  h.mu1 = spec_.hyper.log_r1.mean;
  h.sigma1 = spec_.hyper.log_r1.sd;
  h.mu1_prime = spec_.hyper.ibm_initial_slope_mean;
  if (!layout_.log_sigma.empty()) h.sigma = std::exp(x[layout_.log_sigma.offset]);
  if (!layout_.log_theta.empty()) h.theta = std::exp(x[layout_.log_theta.offset]);
  if (!layout_.log_alpha.empty()) h.alpha = std::exp(x[layout_.log_alpha.offset]);
  if (!layout_.log_ell.empty()) h.ell = std::exp(x[layout_.log_ell.offset]);

  const auto latent = view(x, layout_.latent);
  if (spec_.prior == PriorKind::hsgp) {
    d.z.assign(latent.begin(), latent.end());
    d.path.gamma.resize(periods_);
    basis_->gamma_from_z(d.z, h.alpha, h.ell, d.path.gamma);
  } else {
    d.path.gamma.assign(latent.begin(), latent.end());
  }
  if (spec_.prior == PriorKind::ibm) {
    const auto gp = view(x, layout_.gamma_prime);
    d.path.gamma_prime = std::vector<double>(gp.begin(), gp.end());
  }
  const std::size_t inc_begin = layout_.log_seed.offset;
  d.incidence.resize(layout_.log_seed.size + layout_.log_obs.size);
  for (std::size_t i = 0; i < d.incidence.size(); ++i) d.incidence[i] = std::exp(x[inc_begin + i]);
  return d;
}

std::vector<double> RenewalPosterior::encode(const DecodedParams& p) const {
  std::vector<double> x(layout_.dim, 0.0);
  x[layout_.log_rho.offset] = std::log(p.nuisance.rho);
  x[layout_.log_kappa.offset] = std::log(p.nuisance.kappa);
  x[layout_.log_nu.offset] = std::log(p.nuisance.nu);
  x[layout_.log_lambda.offset] = std::log(p.nuisance.lambda);
  if (!layout_.log_sigma.empty()) x[layout_.log_sigma.offset] = std::log(p.prior.sigma);
  if (!layout_.log_theta.empty()) x[layout_.log_theta.offset] = std::log(p.prior.theta);
  if (!layout_.log_alpha.empty()) x[layout_.log_alpha.offset] = std::log(p.prior.alpha);
  if (!layout_.log_ell.empty()) x[layout_.log_ell.offset] = std::log(p.prior.ell);
  const auto& latent = spec_.prior == PriorKind::hsgp ? p.z : p.path.gamma;
  if (latent.size() != layout_.latent.size) {
    throw Error(ErrorCode::invalid_parameter, "latent size mismatch");
  }
  std::copy(latent.begin(), latent.end(), x.begin() + static_cast<long>(layout_.latent.offset));
  if (spec_.prior == PriorKind::ibm) {
    if (!p.path.gamma_prime || p.path.gamma_prime->size() != periods_) {
      throw Error(ErrorCode::invalid_parameter, "IBM derivative path missing");
    }
    std::copy(p.path.gamma_prime->begin(), p.path.gamma_prime->end(),
              x.begin() + static_cast<long>(layout_.gamma_prime.offset));
  }
  if (p.incidence.size() != layout_.log_seed.size + layout_.log_obs.size) {
    throw Error(ErrorCode::invalid_parameter, "incidence size mismatch");
  }
  for (std::size_t i = 0; i < p.incidence.size(); ++i) {
    x[layout_.log_seed.offset + i] = std::log(p.incidence[i]);
  }
  return x;
}

double RenewalPosterior::evaluate(std::span<const double> x, std::span<double> grad,
                                  PosteriorTerms* terms) const {
  if (x.size() != layout_.dim) throw Error(ErrorCode::invalid_parameter, "parameter size mismatch");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != layout_.dim) throw Error(ErrorCode::invalid_parameter, "gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  for (double v : x) {
    if (!std::isfinite(v)) return kNegInf;
  }

  const auto& h = spec_.hyper;
  NuisanceParams np;
  np.rho = std::exp(x[layout_.log_rho.offset]);
  np.kappa = std::exp(x[layout_.log_kappa.offset]);
  np.nu = std::exp(x[layout_.log_nu.offset]);
  np.lambda = std::exp(x[layout_.log_lambda.offset]);
  if (!(np.rho < 1.0) || !(np.kappa > 0.0) || !(np.nu > 0.0) || !(np.lambda > 0.0) ||
      !std::isfinite(np.kappa) || !std::isfinite(np.nu) || !std::isfinite(np.lambda)) {
    return kNegInf;
  }

  PriorHyper ph;
  ph.kind = spec_.prior;
  ph.mu1 = h.log_r1.mean;
  ph.sigma1 = h.log_r1.sd;
  ph.mu1_prime = h.ibm_initial_slope_mean;
  if (!layout_.log_sigma.empty()) ph.sigma = std::exp(x[layout_.log_sigma.offset]);
  if (!layout_.log_theta.empty()) ph.theta = std::exp(x[layout_.log_theta.offset]);
  if (!layout_.log_alpha.empty()) ph.alpha = std::exp(x[layout_.log_alpha.offset]);
  if (!layout_.log_ell.empty()) ph.ell = std::exp(x[layout_.log_ell.offset]);
  for (double v : {ph.sigma, ph.theta, ph.alpha, ph.ell}) {
    if (!(v > 0.0) || !std::isfinite(v)) return kNegInf;
  }

  // Gamma path
  const bool hsgp = spec_.prior == PriorKind::hsgp;
  std::vector<double> gamma_store;
  std::span<const double> gamma;
  if (hsgp) {
    gamma_store.resize(periods_);
    basis_->gamma_from_z(view(x, layout_.latent), ph.alpha, ph.ell, gamma_store);
    gamma = gamma_store;
  } else {
    gamma = view(x, layout_.latent);
  }
  std::vector<double> dgamma(want_grad ? periods_ : 0, 0.0);

  PosteriorTerms t;
  const Slice inc{layout_.log_seed.offset, layout_.log_seed.size + layout_.log_obs.size};

  // likelihood factors
  if (mask_.observation || mask_.incidence) {
    RenewalGradient rg;
    if (want_grad) {
      rg.log_incidence = view(grad, inc);
      rg.gamma = dgamma;
    }
    const auto lt = renewal_loglik(mask_.observation ? &*cases_ : nullptr, view(x, inc),
                                   spec_.seeding(), gamma, np, spec_.generation, spec_.delay,
                                   mask_.incidence, want_grad ? &rg : nullptr);
    t.observation = lt.observation;
    t.incidence = lt.incidence;
    if (!std::isfinite(t.observation) || !std::isfinite(t.incidence)) return kNegInf;
    if (want_grad) {
      grad[layout_.log_rho.offset] += rg.log_rho;
      grad[layout_.log_kappa.offset] += rg.log_kappa;
      grad[layout_.log_nu.offset] += rg.log_nu;
      grad[layout_.log_lambda.offset] += rg.log_lambda;
    }
  }

  // log R prior
  if (hsgp) {
    HsgpGradient hg;
    if (want_grad) hg.z = view(grad, layout_.latent);
    t.prior = logprior_hsgp(view(x, layout_.latent), *basis_, ph.alpha, ph.ell, dgamma,
                            want_grad ? &hg : nullptr);
    if (want_grad) {
      grad[layout_.log_alpha.offset] += hg.alpha * ph.alpha;
      grad[layout_.log_ell.offset] += hg.ell * ph.ell;
    }
  } else {
    PriorGradient pg;
    if (want_grad) {
      auto gl = view(grad, layout_.latent);
      for (std::size_t i = 0; i < periods_; ++i) gl[i] += dgamma[i];
      pg.gamma = gl;
      pg.gamma_prime = view(grad, layout_.gamma_prime);
    }
    PriorGradient* pgp = want_grad ? &pg : nullptr;
    switch (spec_.prior) {
      case PriorKind::rw1: t.prior = logprior_rw1(gamma, ph, pgp); break;
      case PriorKind::ou: t.prior = logprior_ou(gamma, ph, pgp); break;
      case PriorKind::rw2: t.prior = logprior_rw2(gamma, ph, pgp); break;
      case PriorKind::ibm:
        t.prior = logprior_ibm(gamma, view(x, layout_.gamma_prime), ph, pgp);
        break;
      case PriorKind::hsgp: break;
    }
    if (want_grad) {
      grad[layout_.log_sigma.offset] += pg.sigma * ph.sigma;
      if (!layout_.log_theta.empty()) grad[layout_.log_theta.offset] += pg.theta * ph.theta;
    }
  }

  // hyperpriors on the constrained scale, pulled back to log coordinates
  auto hyper = [&](const DensityTerm& d, double value, Slice s) {
    t.hyperprior += d.value;
    if (want_grad) grad[s.offset] += d.dx * value;
  };
  hyper(gmrt::log_density(h.rho, np.rho), np.rho, layout_.log_rho);
  hyper(gmrt::log_density(h.kappa, np.kappa), np.kappa, layout_.log_kappa);
  hyper(gmrt::log_density(h.nu, np.nu), np.nu, layout_.log_nu);
  hyper(gmrt::log_density(h.lambda, np.lambda), np.lambda, layout_.log_lambda);
  if (!hsgp) hyper(gmrt::log_density(sigma_prior(h, spec_.prior), ph.sigma), ph.sigma, layout_.log_sigma);
  if (spec_.prior == PriorKind::ou) hyper(gmrt::log_density(h.theta_ou, ph.theta), ph.theta, layout_.log_theta);
  if (hsgp) {
    hyper(gmrt::log_density(h.alpha_hsgp, ph.alpha), ph.alpha, layout_.log_alpha);
    hyper(gmrt::log_density(h.ell_hsgp, ph.ell), ph.ell, layout_.log_ell);
  }

  // log-transform Jacobian: every coordinate from log_seed onwards
  for (std::size_t i = layout_.log_seed.offset; i < layout_.dim; ++i) {
    t.jacobian += x[i];
    if (want_grad) grad[i] += 1.0;
  }

  if (terms) *terms = t;
  const double total = t.total();
  return std::isfinite(total) ? total : kNegInf;
}

double RenewalPosterior::log_density_gradient(std::span<const double> x,
                                              std::span<double> grad) const {
  return evaluate(x, grad, nullptr);
}

double RenewalPosterior::log_density(std::span<const double> x) const { return evaluate(x, {}, nullptr); }

PosteriorTerms RenewalPosterior::terms(std::span<const double> x) const {
  PosteriorTerms t;
  const double v = evaluate(x, {}, &t);
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::invalid_state, "log posterior is not finite at this point");
  }
  return t;
}

std::vector<std::string> RenewalPosterior::output_names() const {
  std::vector<std::string> names;
  for (std::size_t t = 1; t <= periods_; ++t) names.push_back("R[" + std::to_string(t) + "]");
  if (spec_.prior == PriorKind::ibm) {
    for (std::size_t t = 1; t <= periods_; ++t) names.push_back("gamma_prime[" + std::to_string(t) + "]");
  }
  const long n = static_cast<long>(spec_.seeding());
  for (long j = -n; j <= static_cast<long>(periods_); ++j) names.push_back("I[" + std::to_string(j) + "]");
  for (const char* s : {"rho", "kappa", "nu", "lambda"}) names.emplace_back(s);
  if (spec_.prior == PriorKind::hsgp) {
    names.emplace_back("alpha");
    names.emplace_back("ell");
  } else {
    names.emplace_back("sigma");
    if (spec_.prior == PriorKind::ou) names.emplace_back("theta");
  }
  return names;
}

void RenewalPosterior::write_output(std::span<const double> x, std::span<double> out) const {
  const auto d = decode(x);
  std::size_t k = 0;
  for (double g : d.path.gamma) out[k++] = std::exp(g);
  if (d.path.gamma_prime) {
    for (double g : *d.path.gamma_prime) out[k++] = g;
  }
  for (double v : d.incidence) out[k++] = v;
  out[k++] = d.nuisance.rho;
  out[k++] = d.nuisance.kappa;
  out[k++] = d.nuisance.nu;
  out[k++] = d.nuisance.lambda;
  if (spec_.prior == PriorKind::hsgp) {
    out[k++] = d.prior.alpha;
    out[k++] = d.prior.ell;
  } else {
    out[k++] = d.prior.sigma;
    if (spec_.prior == PriorKind::ou) out[k++] = d.prior.theta;
  }
  if (k != out.size()) throw Error(ErrorCode::invalid_parameter, "output buffer size mismatch");
}

std::vector<double> RenewalPosterior::initial_point(Rng& rng) const {
  const auto& h = spec_.hyper;
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::vector<double> x(layout_.dim, 0.0);

  const double rho0 = std::exp(h.rho.meanlog);
  // log incidence from 3-week smoothed cases divided by the prior median of rho
  std::vector<double> level(periods_, 100.0);
  if (cases_) {
    for (std::size_t t = 0; t < periods_; ++t) {
      double s = 0.0;
      int n = 0;
      for (long k = -1; k <= 1; ++k) {
        const long j = static_cast<long>(t) + k;
        if (j < 0 || j >= static_cast<long>(periods_)) continue;
        s += static_cast<double>((*cases_)[static_cast<std::size_t>(j)]);
        ++n;
      }
      level[t] = std::max(s / n, 1.0) / rho0;
    }
  }
  for (std::size_t i = 0; i < layout_.log_seed.size; ++i) x[layout_.log_seed.offset + i] = std::log(level[0]);
  for (std::size_t t = 0; t < periods_; ++t) x[layout_.log_obs.offset + t] = std::log(level[t]);

  auto set = [&](Slice s, double centre) {
    if (!s.empty()) x[s.offset] = centre + jitter(rng);
  };
  set(layout_.log_rho, h.rho.meanlog);
  set(layout_.log_kappa, std::log(std::max(h.kappa.loc, 1.0)));
  set(layout_.log_nu, h.nu.meanlog);
  set(layout_.log_lambda, std::log(level[0]));
  if (spec_.prior != PriorKind::hsgp) set(layout_.log_sigma, sigma_prior(h, spec_.prior).meanlog);
  set(layout_.log_theta, std::log(std::log(2.0) / h.theta_ou.rate));
  set(layout_.log_alpha, h.alpha_hsgp.meanlog);
  if (!layout_.log_ell.empty()) x[layout_.log_ell.offset] = std::log(h.ell_hsgp.shape / h.ell_hsgp.rate);
  // log rho must stay below zero
  x[layout_.log_rho.offset] = std::min(x[layout_.log_rho.offset], -0.05);
  return x;
}

}  // namespace gmrt
