#ifndef HCR_SAMPLING_HPP
#define HCR_SAMPLING_HPP

#include <random>

#include "hcr/model.hpp"

namespace hcr {

// One claim-count draw: Poisson(mean), or the Poisson-Gamma mixture for the
// negative binomial (mean `mean`, dispersion `delta`).
long sample_count(std::mt19937_64& rng, CountFamily family, double mean,
                  double delta = 0.0);

// One cell claim total given n >= 1 claims: Gamma(n, theta) for the Gamma
// family, otherwise the moment-matched lognormal / log-t.
double sample_claim_total(std::mt19937_64& rng, SizeFamily family, long n,
                          double theta, double nu = 0.0);

}  // namespace hcr

#endif
