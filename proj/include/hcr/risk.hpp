#ifndef HCR_RISK_HPP
#define HCR_RISK_HPP

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hcr/inference.hpp"
#include "hcr/model.hpp"

namespace hcr {

struct PredictiveConfig {
  int horizon = 1;  // planning horizon in months
  std::map<int, long> future_population;  // age class (1-based) -> insured count
  int replicates_per_draw = 1;
  double quantile_level = 0.95;
  std::uint64_t seed = 0;

  void validate(int n_classes) const;  // throws std::invalid_argument
};

// Draws of the per-insured aggregate claim value over the horizon, one
// array per age class (equal lengths).
struct PredictiveSamples {
  std::vector<std::vector<double>> r;  // [class][sample]
  std::vector<std::pair<int, int>> provenance;  // (posterior draw, replicate)

  int n_classes() const { return static_cast<int>(r.size()); }
};

// Simulated future claim totals per age class, before dividing by the
// population. Kept separate so per-service fits can be aggregated: sum the
// totals across services, then divide once.
std::vector<std::vector<double>> draw_predictive_totals(const ChainDraws& draws,
                                                        const ModelSpec& spec,
                                                        const PredictiveConfig& cfg);

PredictiveSamples predictive_from_totals(
    const std::vector<std::vector<double>>& totals, const PredictiveConfig& cfg);

// totals / population for a single fit; per-service totals go through
// predictive_from_totals after summation instead.
PredictiveSamples draw_predictive(const ChainDraws& draws, const ModelSpec& spec,
                                  const PredictiveConfig& cfg);

// Elementwise sum of per-service totals arrays (equal shapes required).
std::vector<std::vector<double>> sum_predictive_totals(
    const std::vector<std::vector<std::vector<double>>>& per_service);

// ---- empirical risk measures ----
// All of these use the inf{r : F_hat(r) >= tau} quantile; see premium.

// Empirical tau-quantile of the samples.
double value_at_risk(std::span<const double> samples, double tau);

// Mean of the tail beyond VaR(tau), with ties at the VaR atom fractionally
// included so that exactly (1 - tau) of the sample mass is averaged. This
// makes TVaR = VaR + ES / (1 - tau) exact on any sample.
double tail_value_at_risk(std::span<const double> samples, double tau);

// Mean positive excess over VaR(tau).
double expected_shortfall(std::span<const double> samples, double tau);

// Sample standard deviation / sample mean; domain error on a zero mean.
double coefficient_of_variation(std::span<const double> samples);

// Predictive-quantile premium per age class; identical estimator to
// value_at_risk at the same level.
std::vector<double> premium(const PredictiveSamples& samples, double level = 0.95);

std::vector<double> value_at_risk(const PredictiveSamples& samples, double tau);
std::vector<double> tail_value_at_risk(const PredictiveSamples& samples, double tau);
std::vector<double> expected_shortfall(const PredictiveSamples& samples, double tau);

}  // namespace hcr

#endif
