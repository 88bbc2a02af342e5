#include "hcr/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hcr {

namespace {

constexpr double kLogPi = 1.1447298858494001741;   // log(pi)
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

void require(bool ok, const char* msg) {
  if (!ok) throw std::domain_error(msg);
}

}  // namespace

int ModelSpec::model_id() const {
  int col = static_cast<int>(size_family);              // G=0, LN=1, LT=2
  int row = count_family == CountFamily::Poisson ? 0 : 1;
  return 1 + col + 3 * row;
}

std::string ModelSpec::name() const { return "M" + std::to_string(model_id()); }

std::string ModelSpec::description() const {
  static const char* size_names[] = {"G", "LN", "LT"};
  return std::string(size_names[static_cast<int>(size_family)]) +
         (count_family == CountFamily::Poisson ? "-P" : "-NB");
}

ModelSpec ModelSpec::from_name(const std::string& name) {
  for (const auto& spec : all())
    if (spec.name() == name) return spec;
  throw std::invalid_argument("unknown model '" + name + "' (expected M1..M6)");
}

std::vector<ModelSpec> ModelSpec::all() {
  std::vector<ModelSpec> out;
  for (auto count : {CountFamily::Poisson, CountFamily::NegBinomial})
    for (auto size : {SizeFamily::Gamma, SizeFamily::LogNormal, SizeFamily::LogT})
      out.push_back({size, count});
  return out;
}

void ParameterState::validate(const ModelSpec& spec) const {
  const std::size_t a = lambda.size();
  require(a >= 1, "no age classes in parameter state");
  require(theta.size() == a, "theta size mismatch");
  require(nu.size() == (spec.has_nu() ? a : 0), "nu present iff size family is LogT");
  require(delta.size() == (spec.has_delta() ? a : 0),
          "delta present iff count family is NegBinomial");
  require(nu.empty() == !hyper.nu.has_value(), "nu hyper block mismatch");
  require(delta.empty() == !hyper.delta.has_value(), "delta hyper block mismatch");

  auto all_positive = [](const std::vector<double>& v) {
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x)) return false;
    return true;
  };
  require(all_positive(lambda) && all_positive(theta) && all_positive(nu) &&
              all_positive(delta),
          "parameters must be strictly positive");
  auto block_positive = [](const std::optional<GammaHyper>& h) {
    return !h || (h->shape > 0.0 && h->rate > 0.0);
  };
  require(hyper.lambda.shape > 0.0 && hyper.lambda.rate > 0.0 &&
              hyper.theta.shape > 0.0 && hyper.theta.rate > 0.0 &&
              block_positive(hyper.nu) && block_positive(hyper.delta),
          "hyperparameters must be strictly positive");
}

double log_pdf_log_t(double x, double mu, double sigma2, double nu) {
  require(x > 0.0, "log_pdf_log_t: x must be positive");
  require(sigma2 > 0.0, "log_pdf_log_t: sigma2 must be positive");
  require(nu > 0.0, "log_pdf_log_t: nu must be positive");
  const double log_x = std::log(x);
  const double r = log_x - mu;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * (kLogPi + std::log(nu) + std::log(sigma2)) -
         0.5 * (nu + 1.0) * std::log1p(r * r / (nu * sigma2)) - log_x;
}

double log_pdf_lognormal(double x, double mu, double sigma2) {
  require(x > 0.0, "log_pdf_lognormal: x must be positive");
  require(sigma2 > 0.0, "log_pdf_lognormal: sigma2 must be positive");
  const double log_x = std::log(x);
  const double r = log_x - mu;
  return -0.5 * (kLog2Pi + std::log(sigma2)) - 0.5 * r * r / sigma2 - log_x;
}

double log_pdf_gamma(double x, double shape, double rate) {
  require(x > 0.0, "log_pdf_gamma: x must be positive");
  require(shape > 0.0, "log_pdf_gamma: shape must be positive");
  require(rate > 0.0, "log_pdf_gamma: rate must be positive");
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

double log_pmf_poisson(long n, double mean) {
  require(n >= 0, "log_pmf_poisson: n must be nonnegative");
  require(mean > 0.0, "log_pmf_poisson: mean must be positive");
  return static_cast<double>(n) * std::log(mean) - mean -
         std::lgamma(static_cast<double>(n) + 1.0);
}

double log_pmf_negbinomial(long n, double mu, double delta) {
  require(n >= 0, "log_pmf_negbinomial: n must be nonnegative");
  require(mu > 0.0, "log_pmf_negbinomial: mu must be positive");
  require(delta > 0.0, "log_pmf_negbinomial: delta must be positive");
  const double nd = static_cast<double>(n);
  return std::lgamma(nd + delta) - std::lgamma(nd + 1.0) - std::lgamma(delta) +
         nd * (std::log(mu) - std::log(delta)) -
         (delta + nd) * std::log1p(mu / delta);
}

double log_pdf_half_cauchy(double h) {
  require(h > 0.0, "log_pdf_half_cauchy: argument must be positive");
  return std::log(2.0) - kLogPi - std::log1p(h * h);
}

double overdispersion_factor(double mu, double delta) {
  require(mu > 0.0, "overdispersion_factor: mu must be positive");
  require(delta > 0.0, "overdispersion_factor: delta must be positive");
  return 1.0 + mu / delta;
}

MomentMatch moment_match(long n, double theta) {
  require(n >= 1, "moment_match: undefined for n = 0");
  require(theta > 0.0, "moment_match: theta must be positive");
  const double sigma2 = std::log1p(1.0 / static_cast<double>(n));
  const double mu = std::log(static_cast<double>(n) / theta) - 0.5 * sigma2;
  return {mu, sigma2};
}

double log_likelihood(const PortfolioData& data, const ParameterState& params,
                      const ModelSpec& spec) {
  params.validate(spec);
  require(params.n_classes() >= data.n_classes(),
          "parameter state has fewer age classes than the data");

  double total = 0.0;
  for (const auto& rec : data.records()) {
    const int a = rec.age_class - 1;
    const double count_mean = params.lambda[a] * static_cast<double>(rec.population);
    if (spec.count_family == CountFamily::Poisson)
      total += log_pmf_poisson(rec.n_claims, count_mean);
    else
      total += log_pmf_negbinomial(rec.n_claims, count_mean, params.delta[a]);

    if (rec.n_claims >= 1) {
      switch (spec.size_family) {
        case SizeFamily::Gamma:
          total += log_pdf_gamma(rec.claim_total,
                                 ModelSpec::kappa * static_cast<double>(rec.n_claims),
                                 params.theta[a]);
          break;
        case SizeFamily::LogNormal: {
          const auto mm = moment_match(rec.n_claims, params.theta[a]);
          total += log_pdf_lognormal(rec.claim_total, mm.mu, mm.sigma2);
          break;
        }
        case SizeFamily::LogT: {
          const auto mm = moment_match(rec.n_claims, params.theta[a]);
          total += log_pdf_log_t(rec.claim_total, mm.mu, mm.sigma2, params.nu[a]);
          break;
        }
      }
    }
  }
  return total;
}

namespace {

double log_hyperprior(double h, HyperpriorFamily family) {
  switch (family) {
    case HyperpriorFamily::Gamma01:
      return log_pdf_gamma(h, 0.1, 0.1);
    case HyperpriorFamily::HalfCauchy:
      return log_pdf_half_cauchy(h);
  }
  throw std::logic_error("unreachable");
}

double block_log_prior(const std::vector<double>& values, const GammaHyper& h,
                       ParamBlock block, const PriorConfig& prior) {
  double total = 0.0;
  for (double v : values) total += log_pdf_gamma(v, h.shape, h.rate);
  const auto family = prior.family(block);
  total += log_hyperprior(h.shape, family);
  total += log_hyperprior(h.rate, family);
  return total;
}

}  // namespace

double log_prior(const ParameterState& params, const ModelSpec& spec,
                 const PriorConfig& prior) {
  params.validate(spec);
  double total = 0.0;
  total += block_log_prior(params.lambda, params.hyper.lambda, ParamBlock::Lambda, prior);
  total += block_log_prior(params.theta, params.hyper.theta, ParamBlock::Theta, prior);
  if (spec.has_nu())
    total += block_log_prior(params.nu, *params.hyper.nu, ParamBlock::Nu, prior);
  if (spec.has_delta())
    total += block_log_prior(params.delta, *params.hyper.delta, ParamBlock::Delta, prior);
  return total;
}

double log_posterior(const PortfolioData& data, const ParameterState& params,
                     const ModelSpec& spec, const PriorConfig& prior) {
  return log_likelihood(data, params, spec) + log_prior(params, spec, prior);
}

}  // namespace hcr
