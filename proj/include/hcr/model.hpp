#ifndef HCR_MODEL_HPP
#define HCR_MODEL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hcr/portfolio.hpp"

namespace hcr {

enum class SizeFamily { Gamma, LogNormal, LogT };
enum class CountFamily { Poisson, NegBinomial };

// One of the six claim-size x claim-count combinations (M1..M6).
// kappa is fixed at 1: the Gamma size shape for a cell with n claims is n.
struct ModelSpec {
  SizeFamily size_family = SizeFamily::Gamma;
  CountFamily count_family = CountFamily::Poisson;

  static constexpr double kappa = 1.0;

  bool has_nu() const { return size_family == SizeFamily::LogT; }
  bool has_delta() const { return count_family == CountFamily::NegBinomial; }

  // M1..M6 in menu order: G-P, LN-P, LT-P, G-NB, LN-NB, LT-NB.
  int model_id() const;
  std::string name() const;        // "M1".."M6"
  std::string description() const; // e.g. "LT-NB"
  static ModelSpec from_name(const std::string& name);
  static std::vector<ModelSpec> all();
};

// Shape/rate pair of a Gamma prior block.
struct GammaHyper {
  double shape = 1.0;  // a
  double rate = 1.0;   // b
};

// The eight hyperparameters (a, b per block); nu/delta blocks exist only
// when the active model uses those parameters.
struct HyperParams {
  GammaHyper lambda;
  GammaHyper theta;
  std::optional<GammaHyper> nu;
  std::optional<GammaHyper> delta;
};

// Per-age-class parameters plus the hyperparameter level. Vectors for
// families the active ModelSpec does not use are empty, and the matching
// hyper blocks are absent.
struct ParameterState {
  std::vector<double> lambda;  // claim rate per insured
  std::vector<double> theta;   // Gamma rate of the claim-size baseline
  std::vector<double> nu;      // degrees of freedom (LogT only)
  std::vector<double> delta;   // count dispersion (NegBinomial only)
  HyperParams hyper;

  int n_classes() const { return static_cast<int>(lambda.size()); }
  void validate(const ModelSpec& spec) const;  // throws std::domain_error
};

enum class HyperpriorFamily { Gamma01, HalfCauchy };

// Which hyperparameter block of the prior hierarchy.
enum class ParamBlock { Lambda, Theta, Nu, Delta };

// Hyperprior assignment: Gamma(0.1, 0.1) or Half-Cauchy(0, 1) per block.
struct PriorConfig {
  HyperpriorFamily default_family = HyperpriorFamily::Gamma01;
  std::map<ParamBlock, HyperpriorFamily> overrides;

  HyperpriorFamily family(ParamBlock block) const {
    auto it = overrides.find(block);
    return it == overrides.end() ? default_family : it->second;
  }
};

// ---- densities (all log scale; throw std::domain_error off-domain) ----

// log density of exp(Y), Y ~ Student-t(mu, sigma2, nu), at x > 0.
double log_pdf_log_t(double x, double mu, double sigma2, double nu);

// log density of the lognormal with log-scale mean mu and variance sigma2.
double log_pdf_lognormal(double x, double mu, double sigma2);

// log density of Gamma(shape, rate): b^a / Gamma(a) * x^{a-1} e^{-bx}.
double log_pdf_gamma(double x, double shape, double rate);

// log Poisson mass at n with the given mean.
double log_pmf_poisson(long n, double mean);

// log negative-binomial mass at n, mean mu, dispersion delta:
//   Gamma(n+delta) / (Gamma(n+1) Gamma(delta)) (mu/delta)^n / (1+mu/delta)^{delta+n}
// Equivalent to the Poisson(mu*gamma) mixture with gamma ~ Gamma(delta, delta);
// mean mu, variance mu (1 + mu/delta).
double log_pmf_negbinomial(long n, double mu, double delta);

// Half-Cauchy(0, 1) log density at h > 0.
double log_pdf_half_cauchy(double h);

// Var/mean ratio of the negative binomial above: 1 + mu/delta.
double overdispersion_factor(double mu, double delta);

// Lognormal (mu, sigma2) with the same mean and variance as Gamma(n, theta):
//   sigma2 = log(1/n + 1), mu = log(n/theta) - sigma2/2.
// Undefined at n = 0; callers skip zero-claim cells.
struct MomentMatch {
  double mu;
  double sigma2;
};
MomentMatch moment_match(long n, double theta);

// ---- likelihood / prior / posterior ----

// Sum over cells of the count-family log mass (mean lambda_a * population,
// dispersion delta_a under NB) plus, for cells with n >= 1, the size-family
// log density at the cell's claim total. Zero-claim cells contribute the
// count term only.
double log_likelihood(const PortfolioData& data, const ParameterState& params,
                      const ModelSpec& spec);

// Gamma log priors of every per-class parameter given the hyperparameters,
// plus the configured hyperprior log density of each hyperparameter.
double log_prior(const ParameterState& params, const ModelSpec& spec,
                 const PriorConfig& prior);

// Unnormalized log posterior.
double log_posterior(const PortfolioData& data, const ParameterState& params,
                     const ModelSpec& spec, const PriorConfig& prior);

}  // namespace hcr

#endif
