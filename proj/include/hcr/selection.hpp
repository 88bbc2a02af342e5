#ifndef HCR_SELECTION_HPP
#define HCR_SELECTION_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcr/inference.hpp"
#include "hcr/model.hpp"
#include "hcr/portfolio.hpp"

namespace hcr {

struct DicResult {
  double d_bar = 0.0;      // posterior mean deviance
  double d_at_mean = 0.0;  // deviance at the posterior mean (natural scale)
  double p_d = 0.0;        // d_bar - d_at_mean
  double dic = 0.0;        // d_at_mean + 2 p_d
};

// Deviance D = -2 log L. Throws std::runtime_error if the likelihood at the
// posterior mean is non-finite.
DicResult dic(const ChainDraws& draws, const PortfolioData& data,
              const ModelSpec& spec);

// Paired CRPS estimator for one cell: mean |rep - y| - 0.5 mean |rep - rep~|,
// with rep and rep~ matched elementwise.
double crps_core(double y, std::span<const double> replicates,
                 std::span<const double> replicates_tilde);

// Monte-Carlo CRPS of the fitted model on the observed claim totals: one
// replicate pair per retained posterior draw (the second leg uses an
// independently permuted draw), averaged over all cells.
double crps(const ChainDraws& draws, const PortfolioData& data,
            const ModelSpec& spec, std::uint64_t seed);

struct ComparisonRow {
  std::string model;
  DicResult dic;
  double crps = 0.0;
};

}  // namespace hcr

#endif
