#include "gmrt/priors.hpp"

#include <cmath>
#include <numbers>

#include "gmrt/error.hpp"
#include "gmrt/simd.hpp"

namespace gmrt {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kLog2Pi = 1.83787706640934548356;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::invalid_parameter, std::string(name) + " must be positive and finite");
  }
}

// log N(x; m, sd) and its partials w.r.t. x, m and sd.
struct NormalTerm {
  double value;
  double dx;
  double dsd;
};

NormalTerm normal_term(double x, double m, double sd) {
  const double r = (x - m) / sd;
  return {-kLogSqrt2Pi - std::log(sd) - 0.5 * r * r, -r / sd, (r * r - 1.0) / sd};
}

// log N2(e; 0, Q) with derivatives w.r.t. e and (symmetric) Q.
struct Normal2Term {
  double value;
  double de1, de2;
  double dqa, dqb, dqc;  // d/dQ11, d/dQ12 (counted once for both off-diagonals), d/dQ22
};

Normal2Term normal2_term(double e1, double e2, const Cov2& q) {
  const double det = q.det();
  const double ia = q.c / det, ib = -q.b / det, ic = q.a / det;
  const double w1 = ia * e1 + ib * e2;  // Q^{-1} e
  const double w2 = ib * e1 + ic * e2;
  const double quad = e1 * w1 + e2 * w2;
  Normal2Term t{};
  t.value = -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
  t.de1 = -w1;
  t.de2 = -w2;
  // d/dQ = -1/2 Q^{-1} + 1/2 w w^T
  t.dqa = -0.5 * ia + 0.5 * w1 * w1;
  t.dqb = 2.0 * (-0.5 * ib + 0.5 * w1 * w2);
  t.dqc = -0.5 * ic + 0.5 * w2 * w2;
  return t;
}

void require_gradient_size(const PriorGradient* grad, std::size_t t, bool needs_prime) {
  if (grad == nullptr) return;
  if (grad->gamma.size() != t || (needs_prime && grad->gamma_prime.size() != t)) {
    throw Error(ErrorCode::invalid_parameter, "gradient buffer size mismatch");
  }
}

}  // namespace

std::string_view to_string(PriorKind kind) noexcept {
  switch (kind) {
    case PriorKind::rw1: return "rw1";
    case PriorKind::ou: return "ou";
    case PriorKind::rw2: return "rw2";
    case PriorKind::ibm: return "ibm";
    case PriorKind::hsgp: return "hsgp";
  }
  return "unknown";
}

PriorKind parse_prior_kind(std::string_view name) {
  for (PriorKind k : kAllPriors) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::config_error, "unknown prior '" + std::string(name) +
                                           "' (expected rw1, ou, rw2, ibm or hsgp)");
}

double normal_logpdf(double x, double mean, double sd) {
  const double r = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * r * r;
}

double logprior_rw1(std::span<const double> gamma, const PriorHyper& h, PriorGradient* grad) {
  const std::size_t t = gamma.size();
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "RW1 needs T >= 2");
  require_positive(h.sigma, "sigma");
  require_positive(h.sigma1, "sigma1");
  require_gradient_size(grad, t, false);

  const double step_scale = 1.0 / std::sqrt(static_cast<double>(t - 1));
  const double sd = h.sigma * step_scale;
  const auto init = normal_term(gamma[0], h.mu1, h.sigma1);
  double lp = init.value;
  if (grad) grad->gamma[0] += init.dx;
  double dsd = 0.0;
  for (std::size_t i = 1; i < t; ++i) {
    const auto term = normal_term(gamma[i], gamma[i - 1], sd);
    lp += term.value;
    if (grad) {
      grad->gamma[i] += term.dx;
      grad->gamma[i - 1] -= term.dx;
      dsd += term.dsd;
    }
  }
  if (grad) grad->sigma += dsd * step_scale;
  return lp;
}

double ou_transition_variance(double sigma, double theta) {
  require_positive(theta, "theta");
  // (1 - e^{-2 theta}) / (2 theta) without cancellation at small theta
  return sigma * sigma * (-std::expm1(-2.0 * theta)) / (2.0 * theta);
}

namespace {

// d/dtheta of (1 - e^{-2 theta}) / (2 theta)
double ou_variance_factor_derivative(double theta) {
  if (theta < 1e-4) return -1.0 + 4.0 * theta / 3.0 - theta * theta;
  const double e = std::exp(-2.0 * theta);
  return e / theta + std::expm1(-2.0 * theta) / (2.0 * theta * theta);
}

}  // namespace

double logprior_ou(std::span<const double> gamma, const PriorHyper& h, PriorGradient* grad) {
  const std::size_t t = gamma.size();
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "OU needs T >= 2");
  require_positive(h.sigma, "sigma");
  require_positive(h.theta, "theta");
  require_positive(h.sigma1, "sigma1");
  require_gradient_size(grad, t, false);

  const double decay = std::exp(-h.theta);
  const double factor = -std::expm1(-2.0 * h.theta) / (2.0 * h.theta);
  const double var = h.sigma * h.sigma * factor;
  const double sd = std::sqrt(var);

  const auto init = normal_term(gamma[0], h.mu1, h.sigma1);
  double lp = init.value;
  if (grad) grad->gamma[0] += init.dx;
  double dsd = 0.0, dmean_dtheta = 0.0;
  for (std::size_t i = 1; i < t; ++i) {
    const auto term = normal_term(gamma[i], gamma[i - 1] * decay, sd);
    lp += term.value;
    if (grad) {
      grad->gamma[i] += term.dx;
      grad->gamma[i - 1] -= term.dx * decay;
      dsd += term.dsd;
      // d mean / d theta = -gamma_{t-1} e^{-theta}; d lp / d mean = -dx
      dmean_dtheta += term.dx * gamma[i - 1] * decay;
    }
  }
  if (grad) {
    // sd = sigma sqrt(factor(theta))
    grad->sigma += dsd * std::sqrt(factor);
    const double dsd_dtheta = h.sigma * 0.5 / std::sqrt(factor) * ou_variance_factor_derivative(h.theta);
    grad->theta += dsd * dsd_dtheta + dmean_dtheta;
  }
  return lp;
}

double logprior_rw2(std::span<const double> gamma, const PriorHyper& h, PriorGradient* grad) {
  const std::size_t t = gamma.size();
  if (t < 3) throw Error(ErrorCode::invalid_parameter, "RW2 needs T >= 3");
  require_positive(h.sigma, "sigma");
  require_positive(h.sigma1, "sigma1");
  require_gradient_size(grad, t, false);

  const auto init = normal_term(gamma[0], h.mu1, h.sigma1);
  const auto first = normal_term(gamma[1], gamma[0], h.sigma);
  double lp = init.value + first.value;
  double dsd = first.dsd;
  if (grad) {
    grad->gamma[0] += init.dx - first.dx;
    grad->gamma[1] += first.dx;
  }
  for (std::size_t i = 2; i < t; ++i) {
    const auto term = normal_term(gamma[i], 2.0 * gamma[i - 1] - gamma[i - 2], h.sigma);
    lp += term.value;
    if (grad) {
      grad->gamma[i] += term.dx;
      grad->gamma[i - 1] -= 2.0 * term.dx;
      grad->gamma[i - 2] += term.dx;
      dsd += term.dsd;
    }
  }
  if (grad) grad->sigma += dsd;
  return lp;
}

Cov2 ibm_covariance(double s) noexcept { return {s, 0.5 * s * s, s * s * s / 3.0}; }

double logprior_ibm(std::span<const double> gamma, std::span<const double> gamma_prime,
                    const PriorHyper& h, PriorGradient* grad) {
  const std::size_t t = gamma.size();
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "IBM needs T >= 2");
  if (gamma_prime.size() != t) {
    throw Error(ErrorCode::invalid_parameter, "IBM needs a derivative path of the same length");
  }
  require_positive(h.sigma, "sigma");
  require_positive(h.sigma1, "sigma1");
  require_gradient_size(grad, t, true);

  // state is (Gamma', Gamma); sigma^2 plays the role of elapsed time
  const double s1 = h.sigma1 * h.sigma1;
  const auto init = normal2_term(gamma_prime[0] - h.mu1_prime, gamma[0] - h.mu1, ibm_covariance(s1));
  double lp = init.value;
  if (grad) {
    grad->gamma_prime[0] += init.de1;
    grad->gamma[0] += init.de2;
  }

  const double s = h.sigma * h.sigma;
  const Cov2 q = ibm_covariance(s);
  double dqa = 0.0, dqb = 0.0, dqc = 0.0, ds = 0.0;
  for (std::size_t i = 1; i < t; ++i) {
    const double e1 = gamma_prime[i] - gamma_prime[i - 1];
    const double e2 = gamma[i] - gamma[i - 1] - s * gamma_prime[i - 1];
    const auto term = normal2_term(e1, e2, q);
    lp += term.value;
    if (grad) {
      grad->gamma_prime[i] += term.de1;
      grad->gamma_prime[i - 1] -= term.de1 + s * term.de2;
      grad->gamma[i] += term.de2;
      grad->gamma[i - 1] -= term.de2;
      ds -= term.de2 * gamma_prime[i - 1];
      dqa += term.dqa;
      dqb += term.dqb;
      dqc += term.dqc;
    }
  }
  if (grad) {
    // Q(s) = [[s, s^2/2], [s^2/2, s^3/3]], s = sigma^2
    ds += dqa + dqb * s + dqc * s * s;
    grad->sigma += ds * 2.0 * h.sigma;
  }
  return lp;
}

double logprior_markov(const GammaPath& path, const PriorHyper& h) {
  switch (h.kind) {
    case PriorKind::rw1: return logprior_rw1(path.gamma, h);
    case PriorKind::ou: return logprior_ou(path.gamma, h);
    case PriorKind::rw2: return logprior_rw2(path.gamma, h);
    case PriorKind::ibm:
      if (!path.gamma_prime) {
        throw Error(ErrorCode::invalid_parameter, "IBM path lacks its derivative process");
      }
      return logprior_ibm(path.gamma, *path.gamma_prime, h);
    case PriorKind::hsgp: break;
  }
  throw Error(ErrorCode::invalid_parameter, "HSGP is not a Markov prior");
}

// --- HSGP --------------------------------------------------------------------

double matern32_kernel(double dt, double alpha, double ell) {
  require_positive(alpha, "alpha");
  require_positive(ell, "ell");
  const double r = std::sqrt(3.0) * std::abs(dt) / ell;
  return alpha * alpha * (1.0 + r) * std::exp(-r);
}

double matern32_spectral_density(double omega, double alpha, double ell) {
  require_positive(alpha, "alpha");
  require_positive(ell, "ell");
  const double base = 3.0 / (ell * ell) + omega * omega;
  return alpha * alpha * 4.0 * std::pow(3.0, 1.5) / (ell * ell * ell) / (base * base);
}

HsgpSettings hsgp_settings(std::size_t t, double ell_ref) {
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "HSGP needs T >= 2");
  require_positive(ell_ref, "reference length scale");
  HsgpSettings s;
  s.half_width = 0.5 * static_cast<double>(t - 1);
  s.c = std::max(4.5 * ell_ref / s.half_width, 1.2);
  const double m = std::ceil(3.45 * s.c * s.half_width / ell_ref);
  if (!(m >= 1.0)) throw Error(ErrorCode::degenerate_approximation, "HSGP basis size is zero");
  s.m = static_cast<std::size_t>(m);
  s.boundary = s.c * s.half_width;
  return s;
}

HsgpBasis::HsgpBasis(std::size_t t, double ell_ref) : t_(t), settings_(hsgp_settings(t, ell_ref)) {
  build();
}

HsgpBasis::HsgpBasis(std::size_t t, const HsgpSettings& settings) : t_(t), settings_(settings) {
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "HSGP needs T >= 2");
  if (settings_.m == 0) throw Error(ErrorCode::degenerate_approximation, "HSGP basis size is zero");
  require_positive(settings_.boundary, "HSGP boundary");
  build();
}

void HsgpBasis::build() {
  const std::size_t m = settings_.m;
  const double big_l = settings_.boundary;
  x_.resize(t_);
  for (std::size_t i = 0; i < t_; ++i) x_[i] = static_cast<double>(i) - settings_.half_width;
  sqrt_eigs_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    sqrt_eigs_[j] = std::numbers::pi * static_cast<double>(j + 1) / (2.0 * big_l);
  }
  phi_.resize(t_ * m);
  const double norm = 1.0 / std::sqrt(big_l);
  for (std::size_t i = 0; i < t_; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      phi_[i * m + j] = norm * std::sin(sqrt_eigs_[j] * (x_[i] + big_l));
    }
  }
}

std::vector<double> HsgpBasis::spectral_weights(double alpha, double ell) const {
  std::vector<double> w(settings_.m);
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::sqrt(matern32_spectral_density(sqrt_eigs_[j], alpha, ell));
  }
  return w;
}

void HsgpBasis::gamma_from_z(std::span<const double> z, double alpha, double ell,
                             std::span<double> gamma) const {
  if (z.size() != settings_.m || gamma.size() != t_) {
    throw Error(ErrorCode::invalid_parameter, "HSGP coefficient/path size mismatch");
  }
  auto w = spectral_weights(alpha, ell);
  for (std::size_t j = 0; j < w.size(); ++j) w[j] *= z[j];
  simd::kernels().gemv(phi_.data(), t_, settings_.m, w.data(), gamma.data());
}

std::vector<double> HsgpBasis::covariance(double alpha, double ell) const {
  const std::size_t m = settings_.m;
  std::vector<double> s(m);
  for (std::size_t j = 0; j < m; ++j) s[j] = matern32_spectral_density(sqrt_eigs_[j], alpha, ell);
  std::vector<double> k(t_ * t_, 0.0);
  for (std::size_t a = 0; a < t_; ++a) {
    for (std::size_t b = 0; b < t_; ++b) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += phi_[a * m + j] * s[j] * phi_[b * m + j];
      k[a * t_ + b] = acc;
    }
  }
  return k;
}

double logprior_hsgp(std::span<const double> z, const HsgpBasis& basis, double alpha, double ell,
                     std::span<const double> dgamma, HsgpGradient* grad) {
  require_positive(alpha, "alpha");
  require_positive(ell, "ell");
  const std::size_t m = basis.cols();
  if (z.size() != m) throw Error(ErrorCode::invalid_parameter, "HSGP coefficient size mismatch");

  double lp = 0.0;
  for (double v : z) lp += -kLogSqrt2Pi - 0.5 * v * v;
  if (grad == nullptr) return lp;
  if (grad->z.size() != m) throw Error(ErrorCode::invalid_parameter, "gradient buffer size mismatch");

  for (std::size_t j = 0; j < m; ++j) grad->z[j] -= z[j];
  if (dgamma.empty()) return lp;
  if (dgamma.size() != basis.rows()) {
    throw Error(ErrorCode::invalid_parameter, "upstream gradient size mismatch");
  }
  std::vector<double> back(m);
  simd::kernels().gemv_t(basis.phi().data(), basis.rows(), m, dgamma.data(), back.data());
  const auto w = basis.spectral_weights(alpha, ell);
  const auto eig = basis.sqrt_eigs();
  for (std::size_t j = 0; j < m; ++j) {
    const double contrib = back[j] * z[j] * w[j];
    grad->z[j] += back[j] * w[j];
    grad->alpha += contrib / alpha;
    // d log sqrt(S) / d ell
    const double base = 3.0 / (ell * ell) + eig[j] * eig[j];
    grad->ell += contrib * (-1.5 / ell + 6.0 / (ell * ell * ell) / base);
  }
  return lp;
}

// --- forward sampling ------------------------------------------------------

namespace {

std::pair<double, double> draw_bivariate(const Cov2& c, Rng& rng) {
  std::normal_distribution<double> n01;
  const double u1 = n01(rng), u2 = n01(rng);
  if (c.a <= 0.0) return {0.0, std::sqrt(std::max(c.c, 0.0)) * u2};
  const double l11 = std::sqrt(c.a);
  const double l21 = c.b / l11;
  const double l22 = std::sqrt(std::max(c.c - l21 * l21, 0.0));
  return {l11 * u1, l21 * u1 + l22 * u2};
}

}  // namespace

GammaPath sample_prior(const PriorHyper& h, std::size_t t, Rng& rng, const HsgpBasis* basis) {
  if (t < 2) throw Error(ErrorCode::invalid_parameter, "prior path needs T >= 2");
  if (!(h.sigma >= 0.0) || !(h.sigma1 >= 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "prior scales must be non-negative");
  }
  std::normal_distribution<double> n01;
  GammaPath path;
  path.gamma.resize(t);
  auto& g = path.gamma;
  switch (h.kind) {
    case PriorKind::rw1: {
      const double sd = h.sigma / std::sqrt(static_cast<double>(t - 1));
      g[0] = h.mu1 + h.sigma1 * n01(rng);
      for (std::size_t i = 1; i < t; ++i) g[i] = g[i - 1] + sd * n01(rng);
      break;
    }
    case PriorKind::ou: {
      const double sd = std::sqrt(ou_transition_variance(h.sigma, h.theta));
      const double decay = std::exp(-h.theta);
      g[0] = h.mu1 + h.sigma1 * n01(rng);
      for (std::size_t i = 1; i < t; ++i) g[i] = g[i - 1] * decay + sd * n01(rng);
      break;
    }
    case PriorKind::rw2: {
      if (t < 3) throw Error(ErrorCode::invalid_parameter, "RW2 needs T >= 3");
      g[0] = h.mu1 + h.sigma1 * n01(rng);
      g[1] = g[0] + h.sigma * n01(rng);
      for (std::size_t i = 2; i < t; ++i) g[i] = 2.0 * g[i - 1] - g[i - 2] + h.sigma * n01(rng);
      break;
    }
    case PriorKind::ibm: {
      std::vector<double> gp(t);
      const auto [d0, l0] = draw_bivariate(ibm_covariance(h.sigma1 * h.sigma1), rng);
      gp[0] = h.mu1_prime + d0;
      g[0] = h.mu1 + l0;
      const double s = h.sigma * h.sigma;
      const Cov2 q = ibm_covariance(s);
      for (std::size_t i = 1; i < t; ++i) {
        const auto [dd, dl] = draw_bivariate(q, rng);
        gp[i] = gp[i - 1] + dd;
        g[i] = g[i - 1] + s * gp[i - 1] + dl;
      }
      path.gamma_prime = std::move(gp);
      break;
    }
    case PriorKind::hsgp: {
      std::optional<HsgpBasis> own;
      if (basis == nullptr) {
        own.emplace(t, h.ell);
        basis = &*own;
      }
      std::vector<double> z(basis->cols());
      for (double& v : z) v = n01(rng);
      basis->gamma_from_z(z, h.alpha, h.ell, g);
      break;
    }
  }
  return path;
}

}  // namespace gmrt
