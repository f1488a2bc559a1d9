#pragma once

// Independent re-derivations used as test oracles. Nothing here calls into
// the library's density code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  const VectorXd r = x - mean;
  const VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
}

/// x = mean + B eta, eta ~ N(0, I).
struct LinearGaussian {
  VectorXd mean;
  MatrixXd b;
  MatrixXd cov() const { return b * b.transpose(); }
  double logpdf(const VectorXd& x) const {
    if (!b.isLowerTriangular()) return mvn_logpdf(x, mean, cov());
    // B is already a Cholesky factor; skip forming B B^T, which squares the conditioning
    const VectorXd w = b.triangularView<Eigen::Lower>().solve(x - mean);
    const double logdet = 2.0 * b.diagonal().array().abs().log().sum();
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
  }
};

inline VectorXd to_vec(std::span<const double> v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// RW1 with initial N(mu1, s1^2) and step variance sigma^2 / (T - 1).
inline LinearGaussian rw1_joint(int t, double sigma, double mu1, double s1) {
  LinearGaussian g{VectorXd::Constant(t, mu1), MatrixXd::Zero(t, t)};
  const double step = sigma / std::sqrt(t - 1.0);
  for (int i = 0; i < t; ++i) {
    g.b(i, 0) = s1;
    for (int k = 1; k <= i; ++k) g.b(i, k) = step;
  }
  return g;
}

/// Stationary-mean-zero OU with per-step decay e^{-theta}.
inline LinearGaussian ou_joint(int t, double sigma, double theta, double mu1, double s1) {
  LinearGaussian g{VectorXd::Zero(t), MatrixXd::Zero(t, t)};
  const double a = std::exp(-theta);
  const double q = std::sqrt(sigma * sigma * (1.0 - std::exp(-2.0 * theta)) / (2.0 * theta));
  for (int i = 0; i < t; ++i) {
    g.mean(i) = mu1 * std::pow(a, i);
    g.b(i, 0) = s1 * std::pow(a, i);
    for (int k = 1; k <= i; ++k) g.b(i, k) = q * std::pow(a, i - k);
  }
  return g;
}

/// RW2: Gamma_2 = Gamma_1 + sigma e_2, then second differences sigma e_t.
inline LinearGaussian rw2_joint(int t, double sigma, double mu1, double s1) {
  LinearGaussian g{VectorXd::Constant(t, mu1), MatrixXd::Zero(t, t)};
  // Row i of B by forward substitution on the noise coefficients.
  g.b(0, 0) = s1;
  if (t > 1) {
    g.b.row(1) = g.b.row(0);
    g.b(1, 1) = sigma;
  }
  for (int i = 2; i < t; ++i) {
    g.b.row(i) = 2.0 * g.b.row(i - 1) - g.b.row(i - 2);
    g.b(i, i) += sigma;
  }
  return g;
}

/// Covariance of an integrated Wiener process over elapsed time s,
/// ordered (derivative, level).
inline Eigen::Matrix2d ibm_cov(double s) {
  Eigen::Matrix2d q;
  q << s, s * s / 2.0, s * s / 2.0, s * s * s / 3.0;
  return q;
}

/// IBM stacked as (G'_1, G_1, G'_2, G_2, ...). The transition over a
/// span s = sigma^2 maps (g', g) to (g', g + s g').
inline LinearGaussian ibm_joint(int t, double sigma, double mu1, double mu1p, double s1) {
  const int n = 2 * t;
  LinearGaussian g{VectorXd::Zero(n), MatrixXd::Zero(n, n)};
  const double s = sigma * sigma;
  Eigen::Matrix2d f;
  f << 1.0, 0.0, s, 1.0;
  const Eigen::Matrix2d l0 = ibm_cov(s1 * s1).llt().matrixL();
  const Eigen::Matrix2d lq = ibm_cov(s).llt().matrixL();
  g.mean.segment<2>(0) << mu1p, mu1;
  g.b.block(0, 0, 2, 2) = l0;
  for (int i = 1; i < t; ++i) {
    g.mean.segment<2>(2 * i) = f * g.mean.segment<2>(2 * (i - 1));
    g.b.block(2 * i, 0, 2, n) = f * g.b.block(2 * (i - 1), 0, 2, n);
    g.b.block(2 * i, 2 * i, 2, 2) += lq;
  }
  return g;
}

inline VectorXd interleave(std::span<const double> gamma_prime, std::span<const double> gamma) {
  VectorXd x(2 * gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    x(2 * i) = gamma_prime[i];
    x(2 * i + 1) = gamma[i];
  }
  return x;
}

inline double matern32(double dt, double alpha, double ell) {
  const double r = std::sqrt(3.0) * std::abs(dt) / ell;
  return alpha * alpha * (1.0 + r) * std::exp(-r);
}

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Negative binomial with mean mu and overdispersion kappa, from log-gammas.
inline double negbinom_logpmf(long y, double mu, double kappa) {
  return std::lgamma(y + kappa) - std::lgamma(kappa) - std::lgamma(y + 1.0) + kappa * std::log(kappa / (kappa + mu)) +
         y * std::log(mu / (kappa + mu));
}

inline double poisson_logpmf(long y, double mu) { return y * std::log(mu) - mu - std::lgamma(y + 1.0); }

inline double gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double exponential_logpdf(double x, double mean) { return -std::log(mean) - x / mean; }

/// Gamma(mean, sd) CDF by composite Simpson integration of the density.
inline double gamma_cdf_numeric(double x, double mean, double sd, int panels = 20000) {
  if (x <= 0.0) return 0.0;
  const double shape = mean * mean / (sd * sd);
  const double rate = mean / (sd * sd);
  auto pdf = [&](double u) { return u <= 0.0 ? (shape < 1.0 ? 0.0 : (shape == 1.0 ? rate : 0.0)) : std::exp(gamma_logpdf(u, shape, rate)); };
  const double h = x / panels;
  double s = pdf(0.0) + pdf(x);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return s * h / 3.0;
}

/// Central finite-difference gradient.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b_i|, floor).
inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1.0) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

/// Type-7 quantile straight from the definition h = (n - 1) q.
inline double type7(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

/// Plain (non-rank-normalized) split R-hat straight from the formula.
inline double split_rhat_formula(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + static_cast<long>(h));
    halves.emplace_back(c.end() - static_cast<long>(h), c.end());
  }
  const double n = static_cast<double>(halves[0].size());
  const double m = static_cast<double>(halves.size());
  std::vector<double> means, vars;
  for (const auto& c : halves) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / (n - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

}  // namespace oracle
