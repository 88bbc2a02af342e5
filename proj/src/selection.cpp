#include "hcr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hcr/sampling.hpp"
#include "hcr/util.hpp"

namespace hcr {

DicResult dic(const ChainDraws& draws, const PortfolioData& data,
              const ModelSpec& spec) {
  const long n_draws = static_cast<long>(draws.n_chains) * draws.n_kept;
  if (n_draws < 1) throw std::invalid_argument("dic: no posterior draws");

  double d_bar = 0.0;
  for (int c = 0; c < draws.n_chains; ++c)
    for (int i = 0; i < draws.n_kept; ++i) {
      const auto params = params_from_draw(draws.param_names, draws.draw(c, i), spec);
      d_bar += -2.0 * log_likelihood(data, params, spec);
    }
  d_bar /= static_cast<double>(n_draws);

  const auto mean_params =
      params_from_draw(draws.param_names, draws.posterior_mean(), spec);
  const double ll_at_mean = log_likelihood(data, mean_params, spec);
  if (!std::isfinite(ll_at_mean))
    throw std::runtime_error("dic: non-finite likelihood at the posterior mean");

  DicResult r;
  r.d_bar = d_bar;
  r.d_at_mean = -2.0 * ll_at_mean;
  r.p_d = r.d_bar - r.d_at_mean;
  r.dic = r.d_at_mean + 2.0 * r.p_d;
  return r;
}

double crps_core(double y, std::span<const double> replicates,
                 std::span<const double> replicates_tilde) {
  if (replicates.size() < 2 || replicates.size() != replicates_tilde.size())
    throw std::invalid_argument("crps needs >= 2 paired replicate streams");
  double abs_err = 0.0, abs_pair = 0.0;
  for (std::size_t l = 0; l < replicates.size(); ++l) {
    abs_err += std::abs(replicates[l] - y);
    abs_pair += std::abs(replicates[l] - replicates_tilde[l]);
  }
  const double n = static_cast<double>(replicates.size());
  return abs_err / n - 0.5 * abs_pair / n;
}

double crps(const ChainDraws& draws, const PortfolioData& data,
            const ModelSpec& spec, std::uint64_t seed) {
  const long n_draws = static_cast<long>(draws.n_chains) * draws.n_kept;
  if (n_draws < 2) throw std::invalid_argument("crps: needs >= 2 posterior draws");

  // Pair each draw with an independently chosen one via a seeded shuffle.
  std::vector<long> partner(n_draws);
  std::iota(partner.begin(), partner.end(), 0L);
  auto shuffle_rng = make_rng(seed, 0);
  std::shuffle(partner.begin(), partner.end(), shuffle_rng);

  std::vector<ParameterState> states;
  states.reserve(n_draws);
  for (int c = 0; c < draws.n_chains; ++c)
    for (int i = 0; i < draws.n_kept; ++i)
      states.push_back(params_from_draw(draws.param_names, draws.draw(c, i), spec));

  auto simulate_cell = [&](std::mt19937_64& rng, const ParameterState& p,
                           const PortfolioRecord& rec) {
    const int a = rec.age_class - 1;
    const long n = sample_count(rng, spec.count_family,
                                p.lambda[a] * static_cast<double>(rec.population),
                                spec.has_delta() ? p.delta[a] : 0.0);
    if (n < 1) return 0.0;
    return sample_claim_total(rng, spec.size_family, n, p.theta[a],
                              spec.has_nu() ? p.nu[a] : 0.0);
  };

  double total = 0.0;
  long cell_index = 0;
  for (const auto& rec : data.records()) {
    double abs_err = 0.0, abs_pair = 0.0;
    auto rng = make_rng(seed, 1 + static_cast<std::uint64_t>(cell_index));
    for (long l = 0; l < n_draws; ++l) {
      const double rep = simulate_cell(rng, states[l], rec);
      const double rep_tilde = simulate_cell(rng, states[partner[l]], rec);
      abs_err += std::abs(rep - rec.claim_total);
      abs_pair += std::abs(rep - rep_tilde);
    }
    total += (abs_err - 0.5 * abs_pair) / static_cast<double>(n_draws);
    ++cell_index;
  }
  return total / static_cast<double>(data.records().size());
}

}  // namespace hcr
