#include "hcr/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace hcr {

long sample_count(std::mt19937_64& rng, CountFamily family, double mean,
                  double delta) {
  if (!(mean > 0.0)) throw std::domain_error("sample_count: mean must be positive");
  double rate = mean;
  if (family == CountFamily::NegBinomial) {
    if (!(delta > 0.0))
      throw std::domain_error("sample_count: delta must be positive");
    std::gamma_distribution<double> mixing(delta, 1.0 / delta);
    rate = mean * mixing(rng);
    if (rate <= 0.0) return 0;
  }
  std::poisson_distribution<long> poisson(rate);
  return poisson(rng);
}

double sample_claim_total(std::mt19937_64& rng, SizeFamily family, long n,
                          double theta, double nu) {
  if (n < 1) throw std::domain_error("sample_claim_total: needs n >= 1 claims");
  if (!(theta > 0.0))
    throw std::domain_error("sample_claim_total: theta must be positive");
  switch (family) {
    case SizeFamily::Gamma: {
      std::gamma_distribution<double> gamma(static_cast<double>(n), 1.0 / theta);
      return gamma(rng);
    }
    case SizeFamily::LogNormal: {
      const auto mm = moment_match(n, theta);
      std::normal_distribution<double> normal(mm.mu, std::sqrt(mm.sigma2));
      return std::exp(normal(rng));
    }
    case SizeFamily::LogT: {
      if (!(nu > 0.0))
        throw std::domain_error("sample_claim_total: nu must be positive");
      const auto mm = moment_match(n, theta);
      std::student_t_distribution<double> student(nu);
      return std::exp(mm.mu + std::sqrt(mm.sigma2) * student(rng));
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace hcr
