#ifndef HCR_INFERENCE_HPP
#define HCR_INFERENCE_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcr/model.hpp"
#include "hcr/portfolio.hpp"

namespace hcr {

enum class KernelKind { Nuts, RandomWalk };

struct SamplerConfig {
  int n_chains = 3;
  int n_iterations = 10000;  // per chain, burn-in included
  int n_burnin = 5000;
  std::uint64_t seed = 0;
  double target_accept = 0.8;
  int max_tree_depth = 10;   // NUTS trajectory doubling limit
  KernelKind kernel = KernelKind::Nuts;
  bool parallel_chains = true;

  void validate() const;  // throws std::invalid_argument
};

struct ChainStats {
  double mean_accept = 0.0;  // post burn-in mean acceptance statistic
  int divergences = 0;       // post burn-in divergent transitions
  double step_size = 0.0;    // frozen after adaptation
};

// Posterior draws in natural scale, ordered (chain, iteration, parameter).
struct ChainDraws {
  std::vector<std::string> param_names;
  int n_chains = 0;
  int n_kept = 0;  // post burn-in iterations per chain
  std::vector<double> values;    // n_chains * n_kept * n_params
  std::vector<double> log_post;  // n_chains * n_kept
  std::vector<ChainStats> stats;
  bool divergence_warning = false;

  int n_params() const { return static_cast<int>(param_names.size()); }
  double value(int chain, int iter, int param) const {
    return values[(static_cast<std::size_t>(chain) * n_kept + iter) * n_params() + param];
  }
  double log_post_at(int chain, int iter) const {
    return log_post[static_cast<std::size_t>(chain) * n_kept + iter];
  }
  std::vector<double> draw(int chain, int iter) const;
  std::vector<double> posterior_mean() const;  // per parameter, natural scale
};

struct Diagnostics {
  std::vector<std::string> param_names;
  std::vector<double> rhat;  // split-Rhat
  std::vector<double> ess;
  std::vector<std::vector<double>> geweke_z;      // [param][chain]
  std::vector<std::vector<double>> lag_autocorr;  // [param][lag-1], lags 1..n_lags
  std::vector<std::vector<double>> cross_corr;    // pooled posterior correlations
  int n_lags = 0;
};

// ---- unconstrained transform (elementwise log / exp) ----

std::vector<double> to_unconstrained(std::span<const double> natural);
std::vector<double> to_natural(std::span<const double> unconstrained);
// log |d exp(z) / dz| = sum(z)
double log_jacobian_inverse(std::span<const double> unconstrained);

// Log posterior of the log-transformed parameter vector, with analytic
// gradient. Parameter order: lambda[1..A], theta[1..A], nu[1..A] (LogT),
// delta[1..A] (NB), then the hyperparameter pairs unless pinned.
class PosteriorTarget {
 public:
  PosteriorTarget(const PortfolioData& data, const ModelSpec& spec,
                  const PriorConfig& prior);
  // Pinned-hyper variant: hyperparameters are constants, not sampled.
  PosteriorTarget(const PortfolioData& data, const ModelSpec& spec,
                  const PriorConfig& prior, const HyperParams& fixed_hyper);
  ~PosteriorTarget();
  PosteriorTarget(PosteriorTarget&&) noexcept;

  int dim() const;
  int n_classes() const;
  const ModelSpec& spec() const;
  const std::vector<std::string>& param_names() const;

  ParameterState params_from_unconstrained(std::span<const double> z) const;
  std::vector<double> unconstrained_from_params(const ParameterState& p) const;

  // Reference path through model::log_posterior; -inf outside the sampler box.
  double log_density(std::span<const double> z) const;
  // Fused fast path used by the samplers; writes the analytic gradient.
  double log_density_and_gradient(std::span<const double> z,
                                  std::span<double> grad) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Rebuilds a ParameterState from one posterior draw using the parameter-name
// manifest. Hyper blocks absent from the manifest (pinned-hyper fits) are
// filled with unit placeholders; the likelihood ignores them.
ParameterState params_from_draw(const std::vector<std::string>& names,
                                std::span<const double> values,
                                const ModelSpec& spec);

// Convenience wrapper for the gradient alone; throws std::runtime_error
// naming the offending coordinate if any component is non-finite.
std::vector<double> grad_log_posterior_unconstrained(const PortfolioData& data,
                                                     std::span<const double> z,
                                                     const ModelSpec& spec,
                                                     const PriorConfig& prior);

// Runs config.n_chains independent chains of the configured kernel on the
// model posterior. Step size and the diagonal metric adapt during burn-in
// only. Identical (data, spec, prior, config) gives bit-identical draws.
ChainDraws run_chains(const PortfolioData& data, const ModelSpec& spec,
                      const PriorConfig& prior, const SamplerConfig& config);
// Pinned-hyper variant (hyperparameters held at fixed values).
ChainDraws run_chains(const PortfolioData& data, const ModelSpec& spec,
                      const PriorConfig& prior, const SamplerConfig& config,
                      const HyperParams& fixed_hyper);

// Split-Rhat, autocorrelation-truncated ESS (Geyer pairs), Geweke z-scores
// (first 10% vs last 50%), lag autocorrelations, pooled cross-correlations.
// Requires >= 2 chains with >= 100 kept draws each.
Diagnostics compute_diagnostics(const ChainDraws& draws, int n_lags = 20);

}  // namespace hcr

#endif
