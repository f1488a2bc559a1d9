#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmrt/core.hpp"
#include "gmrt/rng.hpp"

namespace gmrt {

/// Latent incidence I_{-n}..I_0 (seeded) followed by I_1..I_T, stored
/// contiguously: time j lives at index j + n.
class LatentIncidence {
 public:
  LatentIncidence(std::vector<double> seeded, std::vector<double> observed_period);

  std::size_t seeding() const noexcept { return seeded_count_ - 1; }  // n
  std::size_t periods() const noexcept { return values_.size() - seeded_count_; }  // T
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> seeded() const noexcept {
    return std::span<const double>(values_).first(seeded_count_);
  }
  std::span<const double> observed_period() const noexcept {
    return std::span<const double>(values_).subspan(seeded_count_);
  }
  /// I_j for j in [-n, T].
  double at(long j) const;

 private:
  std::size_t seeded_count_;
  std::vector<double> values_;
};

struct NuisanceParams {
  double rho = 0.05;
  double kappa = 70.0;
  double nu = 0.135;
  double lambda = 1.0;
};

void validate(const NuisanceParams& p);

// --- hyperprior families on the constrained scale ---------------------------

struct LogNormalPrior {
  double meanlog = 0.0;
  double sdlog = 1.0;
};
struct TruncatedNormalPrior {
  double loc = 0.0;
  double scale = 1.0;
  double lower = 0.0;  // upper bound is +infinity
};
struct ExponentialPrior {
  double rate = 1.0;
};
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};
struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

/// Log-density and d/dx at x.
struct DensityTerm {
  double value;
  double dx;
};

DensityTerm log_density(const LogNormalPrior& p, double x);
DensityTerm log_density(const TruncatedNormalPrior& p, double x);
DensityTerm log_density(const ExponentialPrior& p, double x);
DensityTerm log_density(const GammaPrior& p, double x);

/// Hyperpriors with the simulation-study defaults.
struct HyperPriorSpec {
  LogNormalPrior rho{-3.0, 0.3};
  TruncatedNormalPrior kappa{70.0, 80.0, 0.0};
  LogNormalPrior nu{-2.0, 0.7};
  ExponentialPrior lambda{0.3};
  NormalPrior log_r1{0.0, 0.5};
  double ibm_initial_slope_mean = 0.0;

  LogNormalPrior sigma_rw1{-0.6, 0.6};
  LogNormalPrior sigma_ou{-2.6, 0.6};
  ExponentialPrior theta_ou{1.0};
  LogNormalPrior sigma_rw2{-2.0, 0.6};
  LogNormalPrior sigma_ibm{-0.5, 0.6};
  LogNormalPrior alpha_hsgp{-0.6, 0.6};
  GammaPrior ell_hsgp{100.0, 20.0};
};

void validate(const HyperPriorSpec& h);

// --- renewal terms ------------------------------------------------------------

/// Lambda_t = sum_j g_{t-j} I_j over j < t.
double renewal_load(const LatentIncidence& incidence, const DiscretizedPMF& g, std::size_t t);
/// D_t = sum_j d_{t-j} I_j over j <= t.
double delay_load(const LatentIncidence& incidence, const DiscretizedPMF& d, std::size_t t);

/// log NB(y; mean, overdispersion kappa) with Var = mean + mean^2 / kappa.
double negbinom_logpmf(std::int64_t y, double mean, double kappa);

double loglik_obs(const CaseSeries& cases, const LatentIncidence& incidence, double rho,
                  double kappa, const DiscretizedPMF& d);

double loglik_incidence(const LatentIncidence& incidence, std::span<const double> gamma, double nu,
                        double lambda, const DiscretizedPMF& g);

/// Gradient of the combined observation + incidence log-likelihood with respect
/// to log-scale coordinates. Spans are accumulated into.
struct RenewalGradient {
  std::span<double> log_incidence;
  std::span<double> gamma;
  double log_rho = 0.0;
  double log_kappa = 0.0;
  double log_nu = 0.0;
  double log_lambda = 0.0;
};

struct RenewalTerms {
  double observation = 0.0;
  double incidence = 0.0;
};

/// Evaluates both likelihood factors from log incidence. Non-finite results
/// (incidence underflow, zero shape) come back as -infinity rather than
/// throwing. `cases` may be null to skip the observation factor.
RenewalTerms renewal_loglik(const CaseSeries* cases, std::span<const double> log_incidence,
                            std::size_t seeding, std::span<const double> gamma,
                            const NuisanceParams& p, const DiscretizedPMF& g,
                            const DiscretizedPMF& d, bool include_incidence = true,
                            RenewalGradient* grad = nullptr);

// --- forward simulation ------------------------------------------------------

/// Negative binomial draw as a gamma-Poisson mixture.
std::int64_t sample_negbinom(double mean, double kappa, Rng& rng);

struct RenewalSimulation {
  LatentIncidence incidence;
  CaseSeries cases;
};

/// Draws incidence and cases from the generative model for a given R path.
RenewalSimulation simulate_renewal(std::span<const double> rt, const DiscretizedPMF& g,
                                   const DiscretizedPMF& d, const NuisanceParams& p,
                                   std::size_t seeding, Rng& rng);

}  // namespace gmrt
