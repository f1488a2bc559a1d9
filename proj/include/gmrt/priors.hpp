#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmrt/rng.hpp"

namespace gmrt {

enum class PriorKind { rw1, ou, rw2, ibm, hsgp };

std::string_view to_string(PriorKind kind) noexcept;
PriorKind parse_prior_kind(std::string_view name);
inline constexpr PriorKind kAllPriors[] = {PriorKind::rw1, PriorKind::ou, PriorKind::rw2,
                                           PriorKind::ibm, PriorKind::hsgp};

/// Hyperparameters of a log-R prior. Fields not used by `kind` are ignored.
struct PriorHyper {
  PriorKind kind = PriorKind::rw1;
  double sigma = 1.0;      // RW1/OU/RW2/IBM scale
  double theta = 1.0;      // OU reversion strength
  double alpha = 1.0;      // HSGP magnitude
  double ell = 5.0;        // HSGP length scale (weeks)
  double mu1 = 0.0;        // initial log R location
  double sigma1 = 0.5;     // initial log R scale
  double mu1_prime = 0.0;  // IBM initial slope location
};

/// Log R path; `gamma_prime` holds the IBM derivative process.
struct GammaPath {
  std::vector<double> gamma;
  std::optional<std::vector<double>> gamma_prime;
};

/// Partial derivatives of a prior log-density. Slots a prior does not
/// touch stay zero. Vectors are accumulated into, not overwritten.
struct PriorGradient {
  std::span<double> gamma;
  std::span<double> gamma_prime;
  double sigma = 0.0;
  double theta = 0.0;
};

double normal_logpdf(double x, double mean, double sd);

double logprior_rw1(std::span<const double> gamma, const PriorHyper& h,
                    PriorGradient* grad = nullptr);
double logprior_ou(std::span<const double> gamma, const PriorHyper& h,
                   PriorGradient* grad = nullptr);
double logprior_rw2(std::span<const double> gamma, const PriorHyper& h,
                    PriorGradient* grad = nullptr);
double logprior_ibm(std::span<const double> gamma, std::span<const double> gamma_prime,
                    const PriorHyper& h, PriorGradient* grad = nullptr);

/// Log-density of a Markov prior path, dispatching on `h.kind`.
double logprior_markov(const GammaPath& path, const PriorHyper& h);

/// Per-step OU transition variance sigma^2 (1 - e^{-2 theta}) / (2 theta).
double ou_transition_variance(double sigma, double theta);

// --- bivariate Gaussian helpers (IBM) --------------------------------------

struct Cov2 {
  double a = 0.0;  // var of first component
  double b = 0.0;  // covariance
  double c = 0.0;  // var of second component
  double det() const noexcept { return a * c - b * b; }
};

/// IBM covariance over a time span `s`: [[s, s^2/2], [s^2/2, s^3/3]].
Cov2 ibm_covariance(double s) noexcept;

// --- HSGP ------------------------------------------------------------------

double matern32_kernel(double dt, double alpha, double ell);
/// One-dimensional Matern-3/2 spectral density.
double matern32_spectral_density(double omega, double alpha, double ell);

/// Boundary factor c and basis size M chosen from a reference length scale
/// and series length.
struct HsgpSettings {
  double c = 0.0;
  std::size_t m = 0;
  double half_width = 0.0;  // d/2 with d = T - 1
  double boundary = 0.0;    // L = c d / 2
};

HsgpSettings hsgp_settings(std::size_t t, double ell_ref);

/// Laplacian eigenfunction basis on [-L, L].
class HsgpBasis {
 public:
  HsgpBasis(std::size_t t, double ell_ref);
  HsgpBasis(std::size_t t, const HsgpSettings& settings);

  std::size_t rows() const noexcept { return t_; }
  std::size_t cols() const noexcept { return settings_.m; }
  const HsgpSettings& settings() const noexcept { return settings_; }
  std::span<const double> phi() const noexcept { return phi_; }  // row-major T x M
  double phi(std::size_t t, std::size_t j) const noexcept { return phi_[t * settings_.m + j]; }
  std::span<const double> sqrt_eigs() const noexcept { return sqrt_eigs_; }
  std::span<const double> points() const noexcept { return x_; }

  /// sqrt of the spectral density at each basis frequency.
  std::vector<double> spectral_weights(double alpha, double ell) const;

  /// Gamma = Phi diag(sqrt S) z.
  void gamma_from_z(std::span<const double> z, double alpha, double ell,
                    std::span<double> gamma) const;

  /// Low-rank covariance Phi diag(S) Phi^T (T x T, row-major).
  std::vector<double> covariance(double alpha, double ell) const;

 private:
  void build();

  std::size_t t_;
  HsgpSettings settings_;
  std::vector<double> phi_;
  std::vector<double> sqrt_eigs_;
  std::vector<double> x_;
};

struct HsgpGradient {
  std::span<double> z;
  double alpha = 0.0;
  double ell = 0.0;
};

/// Whitened HSGP prior: log N(z; 0, I). When `grad` is given, the upstream
/// derivative `dgamma` (d target / d Gamma) is pulled back through
/// Gamma = Phi diag(sqrt S) z onto z, alpha and ell, and added to the
/// density's own z-gradient.
double logprior_hsgp(std::span<const double> z, const HsgpBasis& basis, double alpha, double ell,
                     std::span<const double> dgamma = {}, HsgpGradient* grad = nullptr);

/// Ancestral draw from a prior. HSGP draws use `basis` when given, otherwise
/// one built from `h.ell`.
GammaPath sample_prior(const PriorHyper& h, std::size_t t, Rng& rng,
                       const HsgpBasis* basis = nullptr);

}  // namespace gmrt
