#ifndef HCR_SIMULATION_HPP
#define HCR_SIMULATION_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hcr/inference.hpp"
#include "hcr/model.hpp"
#include "hcr/portfolio.hpp"

namespace hcr {

// Gamma(shape, rate) with the given mean and precision (1 / variance):
// rate = precision * mean, shape = mean * rate.
std::pair<double, double> hyper_from_mean_precision(double mean, double precision);

// Reference hyperparameters of the recovery study (heavy-tailed
// overdispersed generator, all four blocks present).
HyperParams default_study_hyper();

// Bundled 7-class x 12-month exposure table (constant within class).
std::vector<std::vector<long>> default_study_populations();

struct GeneratedDataset {
  PortfolioData data;
  ParameterState true_params;  // the per-class draws behind the data
};

// Draws per-class parameters from Gamma priors under `true_hyper`, then
// simulates every cell from the LT-NB model: N ~ NB(lambda * pop, delta),
// X ~ log-t given N >= 1 claims. Bit-deterministic given seed.
GeneratedDataset generate_dataset_full(const HyperParams& true_hyper,
                                       const std::vector<std::vector<long>>& populations,
                                       std::uint64_t seed, int service_id = 1);

PortfolioData generate_dataset(const HyperParams& true_hyper,
                               const std::vector<std::vector<long>>& populations,
                               std::uint64_t seed);

struct StudyConfig {
  int n_datasets = 30;
  HyperParams true_hyper = default_study_hyper();
  std::vector<std::vector<long>> populations = default_study_populations();
  SamplerConfig fit_config;  // seed is re-derived per dataset
  std::uint64_t seed = 0;
  int horizon = 1;
  int replicates_per_draw = 1;
  double premium_level = 0.95;
  double rhat_threshold = 1.1;  // exclusion gate after one retry
  std::optional<std::filesystem::path> checkpoint;  // resume support

  void validate() const;
};

struct DatasetOutcome {
  int index = -1;
  std::vector<double> hyper_means;  // posterior means, order of hyper_names
  std::vector<double> premium;      // per class
  std::vector<double> realized;     // per-insured claims under the true params
  double max_rhat = 0.0;
  bool retried = false;
  bool excluded = false;
};

struct StudyReport {
  std::vector<std::string> hyper_names;
  std::vector<double> true_values;
  std::vector<double> mrb_percent;  // 100/true * mean(estimate - true)
  std::vector<double> mse_percent;  // 100 * mean((estimate - true)^2)
  std::vector<double> u_a_percent;  // per class exceedance rate
  std::vector<DatasetOutcome> outcomes;
  int n_used = 0;
};

// Generate -> fit -> score loop over cfg.n_datasets independent datasets.
// Fits that fail the Rhat gate after one doubled-length retry are excluded
// and counted. With a checkpoint path, completed datasets are persisted and
// skipped on resume. Progress lines go to `progress` when given.
StudyReport run_study(const StudyConfig& cfg, std::ostream* progress = nullptr);

}  // namespace hcr

#endif
