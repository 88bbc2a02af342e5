#include "hcr/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hcr/sampling.hpp"
#include "hcr/util.hpp"

namespace hcr {

void PredictiveConfig::validate(int n_classes) const {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (replicates_per_draw < 1)
    throw std::invalid_argument("replicates_per_draw must be >= 1");
  if (!(quantile_level > 0.0 && quantile_level < 1.0))
    throw std::invalid_argument("quantile_level must be in (0, 1)");
  for (int a = 1; a <= n_classes; ++a) {
    auto it = future_population.find(a);
    if (it == future_population.end())
      throw std::invalid_argument("missing future population for age class " +
                                  std::to_string(a));
    if (it->second < 1)
      throw std::invalid_argument("future population must be positive");
  }
}

std::vector<std::vector<double>> draw_predictive_totals(const ChainDraws& draws,
                                                        const ModelSpec& spec,
                                                        const PredictiveConfig& cfg) {
  int n_classes = 0;
  for (const auto& name : draws.param_names)
    if (name.rfind("lambda[", 0) == 0) ++n_classes;
  if (n_classes < 1) throw std::invalid_argument("draws carry no lambda block");
  cfg.validate(n_classes);

  const long n_draws = static_cast<long>(draws.n_chains) * draws.n_kept;
  if (n_draws < 1) throw std::invalid_argument("no posterior draws");

  std::vector<std::vector<double>> totals(
      n_classes,
      std::vector<double>(static_cast<std::size_t>(n_draws) * cfg.replicates_per_draw));

  for (long k = 0; k < n_draws; ++k) {
    const int chain = static_cast<int>(k / draws.n_kept);
    const int iter = static_cast<int>(k % draws.n_kept);
    const auto params =
        params_from_draw(draws.param_names, draws.draw(chain, iter), spec);
    for (int rep = 0; rep < cfg.replicates_per_draw; ++rep) {
      // one substream per (posterior draw, replicate): deterministic under
      // any parallel schedule
      auto rng = make_rng(cfg.seed,
                          static_cast<std::uint64_t>(k) * cfg.replicates_per_draw + rep);
      const std::size_t slot =
          static_cast<std::size_t>(k) * cfg.replicates_per_draw + rep;
      for (int a = 0; a < n_classes; ++a) {
        const double pop =
            static_cast<double>(cfg.future_population.at(a + 1));
        double total = 0.0;
        for (int h = 0; h < cfg.horizon; ++h) {
          const long n = sample_count(
              rng, spec.count_family, params.lambda[a] * pop,
              spec.has_delta() ? params.delta[a] : 0.0);
          if (n >= 1)
            total += sample_claim_total(rng, spec.size_family, n, params.theta[a],
                                        spec.has_nu() ? params.nu[a] : 0.0);
        }
        totals[a][slot] = total;
      }
    }
  }
  return totals;
}

PredictiveSamples predictive_from_totals(
    const std::vector<std::vector<double>>& totals, const PredictiveConfig& cfg) {
  PredictiveSamples out;
  out.r.resize(totals.size());
  for (std::size_t a = 0; a < totals.size(); ++a) {
    const double pop =
        static_cast<double>(cfg.future_population.at(static_cast<int>(a) + 1));
    out.r[a].resize(totals[a].size());
    for (std::size_t i = 0; i < totals[a].size(); ++i)
      out.r[a][i] = totals[a][i] / pop;
  }
  if (!totals.empty()) {
    out.provenance.reserve(totals[0].size());
    for (std::size_t i = 0; i < totals[0].size(); ++i)
      out.provenance.emplace_back(static_cast<int>(i / cfg.replicates_per_draw),
                                  static_cast<int>(i % cfg.replicates_per_draw));
  }
  return out;
}

PredictiveSamples draw_predictive(const ChainDraws& draws, const ModelSpec& spec,
                                  const PredictiveConfig& cfg) {
  return predictive_from_totals(draw_predictive_totals(draws, spec, cfg), cfg);
}

std::vector<std::vector<double>> sum_predictive_totals(
    const std::vector<std::vector<std::vector<double>>>& per_service) {
  if (per_service.empty()) throw std::invalid_argument("nothing to aggregate");
  auto out = per_service.front();
  for (std::size_t s = 1; s < per_service.size(); ++s) {
    const auto& t = per_service[s];
    if (t.size() != out.size())
      throw std::invalid_argument("service totals disagree on class count");
    for (std::size_t a = 0; a < out.size(); ++a) {
      if (t[a].size() != out[a].size())
        throw std::invalid_argument("service totals disagree on sample count");
      for (std::size_t i = 0; i < out[a].size(); ++i) out[a][i] += t[a][i];
    }
  }
  return out;
}

namespace {

// index (1-based) of the inf{r : F_hat(r) >= tau} order statistic
std::size_t quantile_index(std::size_t n, double tau) {
  const double k = std::ceil(tau * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(n)));
}

std::vector<double> sorted_copy(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("empty sample array");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  return s;
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("tau must be in (0, 1)");
}

}  // namespace

double value_at_risk(std::span<const double> samples, double tau) {
  check_tau(tau);
  const auto s = sorted_copy(samples);
  return s[quantile_index(s.size(), tau) - 1];
}

double tail_value_at_risk(std::span<const double> samples, double tau) {
  check_tau(tau);
  const auto s = sorted_copy(samples);
  const std::size_t n = s.size();
  const std::size_t k = quantile_index(n, tau);
  const double var = s[k - 1];
  double tail = 0.0;
  for (std::size_t i = k; i < n; ++i) tail += s[i];
  tail /= static_cast<double>(n);
  // fractional weight of the atom at the VaR order statistic
  tail += (static_cast<double>(k) / static_cast<double>(n) - tau) * var;
  return tail / (1.0 - tau);
}

double expected_shortfall(std::span<const double> samples, double tau) {
  check_tau(tau);
  const auto s = sorted_copy(samples);
  const double var = s[quantile_index(s.size(), tau) - 1];
  double excess = 0.0;
  for (double x : s) excess += std::max(0.0, x - var);
  return excess / static_cast<double>(s.size());
}

double coefficient_of_variation(std::span<const double> samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("coefficient of variation needs >= 2 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  if (mean == 0.0)
    throw std::domain_error("coefficient of variation undefined for zero mean");
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(samples.size() - 1)) / mean;
}

namespace {

std::vector<double> per_class(const PredictiveSamples& samples, double tau,
                              double (*measure)(std::span<const double>, double)) {
  std::vector<double> out;
  out.reserve(samples.r.size());
  for (const auto& r : samples.r) out.push_back(measure(r, tau));
  return out;
}

}  // namespace

std::vector<double> premium(const PredictiveSamples& samples, double level) {
  return per_class(samples, level, &value_at_risk);
}

std::vector<double> value_at_risk(const PredictiveSamples& samples, double tau) {
  return per_class(samples, tau, &value_at_risk);
}

std::vector<double> tail_value_at_risk(const PredictiveSamples& samples, double tau) {
  return per_class(samples, tau, &tail_value_at_risk);
}

std::vector<double> expected_shortfall(const PredictiveSamples& samples, double tau) {
  return per_class(samples, tau, &expected_shortfall);
}

}  // namespace hcr
