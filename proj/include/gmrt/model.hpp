#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmrt/core.hpp"
#include "gmrt/nuts.hpp"
#include "gmrt/priors.hpp"
#include "gmrt/renewal.hpp"

namespace gmrt {

/// Everything that fixes the posterior apart from the data.
struct ModelSpec {
  PriorKind prior = PriorKind::rw1;
  HyperPriorSpec hyper;
  DiscretizedPMF generation{{0.0, 1.0}, PmfKind::generation};
  DiscretizedPMF delay{{1.0}, PmfKind::delay};
  /// Reference length scale for the HSGP basis; defaults to the prior mean of ell.
  std::optional<double> hsgp_ell_ref;

  std::size_t seeding() const noexcept { return generation.max_lag(); }
  double ell_reference() const noexcept {
    return hsgp_ell_ref.value_or(hyper.ell_hsgp.shape / hyper.ell_hsgp.rate);
  }
};

struct Slice {
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t end() const noexcept { return offset + size; }
  bool empty() const noexcept { return size == 0; }
};

/// Partition of the unconstrained parameter vector.
struct ParameterLayout {
  Slice latent;       // Gamma (Markov priors) or whitened HSGP coefficients z
  Slice gamma_prime;  // IBM only
  Slice log_seed;     // log I_{-n}..log I_0
  Slice log_obs;      // log I_1..log I_T
  Slice log_rho, log_kappa, log_nu, log_lambda;
  Slice log_sigma;  // RW1/OU/RW2/IBM
  Slice log_theta;  // OU
  Slice log_alpha, log_ell;  // HSGP
  std::size_t dim = 0;

  static ParameterLayout build(PriorKind prior, std::size_t periods, std::size_t seeding,
                               std::size_t hsgp_basis_size);
  /// Slices in layout order, each with its name.
  std::vector<std::pair<std::string, Slice>> named() const;
};

/// Constrained-scale view of a parameter vector.
struct DecodedParams {
  GammaPath path;            // Gamma (and Gamma' for IBM)
  std::vector<double> z;     // HSGP coefficients
  std::vector<double> incidence;  // I_{-n}..I_T
  NuisanceParams nuisance;
  PriorHyper prior;
};

/// Additive pieces of the log posterior.
struct PosteriorTerms {
  double observation = 0.0;
  double incidence = 0.0;
  double prior = 0.0;
  double hyperprior = 0.0;
  double jacobian = 0.0;
  double total() const noexcept { return observation + incidence + prior + hyperprior + jacobian; }
};

struct LikelihoodMask {
  bool observation = true;
  bool incidence = true;
};

/// Log posterior of the renewal model under one of the five log-R priors.
class RenewalPosterior final : public LogDensityModel {
 public:
  /// Posterior given observed cases.
  RenewalPosterior(ModelSpec spec, CaseSeries cases, LikelihoodMask mask = {});
  /// Prior-only density over `periods` weeks (no observations).
  RenewalPosterior(ModelSpec spec, std::size_t periods, LikelihoodMask mask = {false, true});

  const ModelSpec& spec() const noexcept { return spec_; }
  const ParameterLayout& layout() const noexcept { return layout_; }
  std::size_t periods() const noexcept { return periods_; }
  const std::optional<CaseSeries>& cases() const noexcept { return cases_; }
  const std::optional<HsgpBasis>& basis() const noexcept { return basis_; }

  std::size_t dim() const override { return layout_.dim; }
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> output_names() const override;
  void write_output(std::span<const double> x, std::span<double> out) const override;
  std::vector<double> initial_point(Rng& rng) const override;

  double log_density(std::span<const double> x) const;
  PosteriorTerms terms(std::span<const double> x) const;

  DecodedParams decode(std::span<const double> x) const;
  std::vector<double> encode(const DecodedParams& p) const;

  /// Output index of R_t (1-based t).
  std::size_t rt_output_index(std::size_t t) const { return t - 1; }

 private:
  double evaluate(std::span<const double> x, std::span<double> grad, PosteriorTerms* terms) const;
  void init();

  ModelSpec spec_;
  std::optional<CaseSeries> cases_;
  std::size_t periods_;
  LikelihoodMask mask_;
  std::optional<HsgpBasis> basis_;
  ParameterLayout layout_;
};

}  // namespace gmrt
