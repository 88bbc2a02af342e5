#include "hcr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

#include "hcr/util.hpp"

namespace hcr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogPi = 1.1447298858494001741;
constexpr double kLog2Pi = 1.8378770664093454836;
// Unconstrained coordinates outside this box get zero posterior mass; keeps
// every intermediate of the fused evaluation finite.
constexpr double kZBound = 60.0;
constexpr double kDivergenceThreshold = 1000.0;

double digamma(double x) { return boost::math::digamma(x); }

double hyperprior_log_density(double h, HyperpriorFamily f) {
  if (f == HyperpriorFamily::Gamma01)
    return 0.1 * std::log(0.1) - std::lgamma(0.1) - 0.9 * std::log(h) - 0.1 * h;
  return std::log(2.0) - kLogPi - std::log1p(h * h);
}

double hyperprior_score(double h, HyperpriorFamily f) {
  if (f == HyperpriorFamily::Gamma01) return -0.9 / h - 0.1;
  return -2.0 * h / (1.0 + h * h);
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
  if (n_iterations < 1) throw std::invalid_argument("n_iterations must be >= 1");
  if (n_burnin < 0 || n_burnin >= n_iterations)
    throw std::invalid_argument("n_burnin must be in [0, n_iterations)");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target_accept must be in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("max_tree_depth must be >= 1");
}

std::vector<double> ChainDraws::draw(int chain, int iter) const {
  std::vector<double> out(n_params());
  for (int p = 0; p < n_params(); ++p) out[p] = value(chain, iter, p);
  return out;
}

std::vector<double> ChainDraws::posterior_mean() const {
  std::vector<double> mean(n_params(), 0.0);
  for (int c = 0; c < n_chains; ++c)
    for (int i = 0; i < n_kept; ++i)
      for (int p = 0; p < n_params(); ++p) mean[p] += value(c, i, p);
  const double total = static_cast<double>(n_chains) * n_kept;
  for (auto& m : mean) m /= total;
  return mean;
}

std::vector<double> to_unconstrained(std::span<const double> natural) {
  std::vector<double> z(natural.size());
  for (std::size_t i = 0; i < natural.size(); ++i) {
    if (!(natural[i] > 0.0))
      throw std::domain_error("to_unconstrained: parameters must be positive");
    z[i] = std::log(natural[i]);
  }
  return z;
}

std::vector<double> to_natural(std::span<const double> unconstrained) {
  std::vector<double> v(unconstrained.size());
  for (std::size_t i = 0; i < unconstrained.size(); ++i)
    v[i] = std::exp(unconstrained[i]);
  return v;
}

double log_jacobian_inverse(std::span<const double> unconstrained) {
  return std::accumulate(unconstrained.begin(), unconstrained.end(), 0.0);
}

// ---- PosteriorTarget ----

struct PosteriorTarget::Impl {
  PortfolioData data;
  ModelSpec spec;
  PriorConfig prior;
  std::optional<HyperParams> fixed_hyper;

  int n_classes = 0;
  int off_lambda = 0, off_theta = 0, off_nu = -1, off_delta = -1, off_hyper = -1;
  int dim = 0;
  std::vector<std::string> names;

  // Per-class cell caches. Count terms run over every cell; size terms only
  // over cells with at least one claim.
  struct ClassCells {
    std::vector<double> pi, log_pi, n, lgamma_n1;
    std::vector<double> ns, x, theta_x_coef;  // ns: counts of size cells
    std::vector<double> log_x, sigma2, log_sigma2, c1, lgamma_ns, nm1_log_x;
  };
  std::vector<ClassCells> cells;

  Impl(const PortfolioData& d, const ModelSpec& s, const PriorConfig& p,
       std::optional<HyperParams> fh)
      : data(d), spec(s), prior(p), fixed_hyper(std::move(fh)) {
    n_classes = data.n_classes();
    if (n_classes < 1) throw std::invalid_argument("empty portfolio");
    if (fixed_hyper) {
      if (spec.has_nu() != fixed_hyper->nu.has_value() ||
          spec.has_delta() != fixed_hyper->delta.has_value())
        throw std::invalid_argument("fixed hyper blocks must match the model");
    }

    const int a = n_classes;
    off_lambda = 0;
    off_theta = a;
    int next = 2 * a;
    if (spec.has_nu()) { off_nu = next; next += a; }
    if (spec.has_delta()) { off_delta = next; next += a; }
    if (!fixed_hyper) {
      off_hyper = next;
      next += 4 + (spec.has_nu() ? 2 : 0) + (spec.has_delta() ? 2 : 0);
    }
    dim = next;

    auto push_block = [&](const char* base) {
      for (int i = 1; i <= a; ++i)
        names.push_back(std::string(base) + "[" + std::to_string(i) + "]");
    };
    push_block("lambda");
    push_block("theta");
    if (spec.has_nu()) push_block("nu");
    if (spec.has_delta()) push_block("delta");
    if (!fixed_hyper) {
      names.insert(names.end(), {"a_lambda", "b_lambda", "a_theta", "b_theta"});
      if (spec.has_nu()) names.insert(names.end(), {"a_nu", "b_nu"});
      if (spec.has_delta()) names.insert(names.end(), {"a_delta", "b_delta"});
    }

    cells.resize(a);
    for (const auto& rec : data.records()) {
      auto& cc = cells[rec.age_class - 1];
      const double nd = static_cast<double>(rec.n_claims);
      cc.pi.push_back(static_cast<double>(rec.population));
      cc.log_pi.push_back(std::log(static_cast<double>(rec.population)));
      cc.n.push_back(nd);
      cc.lgamma_n1.push_back(std::lgamma(nd + 1.0));
      if (rec.n_claims >= 1) {
        const double s2 = std::log1p(1.0 / nd);
        cc.ns.push_back(nd);
        cc.x.push_back(rec.claim_total);
        cc.log_x.push_back(std::log(rec.claim_total));
        cc.sigma2.push_back(s2);
        cc.log_sigma2.push_back(std::log(s2));
        cc.c1.push_back(std::log(rec.claim_total / nd) + 0.5 * s2);
        cc.lgamma_ns.push_back(std::lgamma(nd));
        cc.nm1_log_x.push_back((nd - 1.0) * std::log(rec.claim_total));
      }
    }
  }

  int hyper_offset(ParamBlock block) const {
    // pairs laid out in block order: lambda, theta, nu, delta
    int off = off_hyper;
    if (block == ParamBlock::Lambda) return off;
    off += 2;
    if (block == ParamBlock::Theta) return off;
    off += 2;
    if (block == ParamBlock::Nu) return off;
    return off + (spec.has_nu() ? 2 : 0);
  }

  bool in_box(std::span<const double> z) const {
    for (double zi : z)
      if (!std::isfinite(zi) || std::abs(zi) > kZBound) return false;
    return true;
  }

  ParameterState unpack(std::span<const double> v) const {
    ParameterState p;
    const int a = n_classes;
    p.lambda.assign(v.begin() + off_lambda, v.begin() + off_lambda + a);
    p.theta.assign(v.begin() + off_theta, v.begin() + off_theta + a);
    if (spec.has_nu()) p.nu.assign(v.begin() + off_nu, v.begin() + off_nu + a);
    if (spec.has_delta())
      p.delta.assign(v.begin() + off_delta, v.begin() + off_delta + a);
    if (fixed_hyper) {
      p.hyper = *fixed_hyper;
    } else {
      int off = off_hyper;
      p.hyper.lambda = {v[off], v[off + 1]};
      p.hyper.theta = {v[off + 2], v[off + 3]};
      off += 4;
      if (spec.has_nu()) { p.hyper.nu = GammaHyper{v[off], v[off + 1]}; off += 2; }
      if (spec.has_delta()) p.hyper.delta = GammaHyper{v[off], v[off + 1]};
    }
    return p;
  }

  std::vector<double> pack(const ParameterState& p) const {
    p.validate(spec);
    if (p.n_classes() != n_classes)
      throw std::invalid_argument("parameter state class count mismatch");
    std::vector<double> v(dim);
    std::copy(p.lambda.begin(), p.lambda.end(), v.begin() + off_lambda);
    std::copy(p.theta.begin(), p.theta.end(), v.begin() + off_theta);
    if (spec.has_nu()) std::copy(p.nu.begin(), p.nu.end(), v.begin() + off_nu);
    if (spec.has_delta())
      std::copy(p.delta.begin(), p.delta.end(), v.begin() + off_delta);
    if (!fixed_hyper) {
      int off = off_hyper;
      v[off] = p.hyper.lambda.shape;
      v[off + 1] = p.hyper.lambda.rate;
      v[off + 2] = p.hyper.theta.shape;
      v[off + 3] = p.hyper.theta.rate;
      off += 4;
      if (spec.has_nu()) { v[off] = p.hyper.nu->shape; v[off + 1] = p.hyper.nu->rate; off += 2; }
      if (spec.has_delta()) { v[off] = p.hyper.delta->shape; v[off + 1] = p.hyper.delta->rate; }
    }
    return v;
  }

  // Fused log density + gradient. grad may be empty (density only).
  double eval(std::span<const double> z, std::span<double> grad) const {
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    if (!in_box(z)) return kNegInf;

    std::vector<double> v(dim);
    for (int i = 0; i < dim; ++i) v[i] = std::exp(z[i]);
    std::vector<double> gn(want_grad ? dim : 0, 0.0);

    const bool nb = spec.has_delta();
    const bool lt = spec.has_nu();
    const bool ln = spec.size_family == SizeFamily::LogNormal;
    const bool ga = spec.size_family == SizeFamily::Gamma;

    double ll = 0.0;
    for (int a = 0; a < n_classes; ++a) {
      const auto& cc = cells[a];
      const double lam = v[off_lambda + a];
      const double th = v[off_theta + a];
      const double log_lam = z[off_lambda + a];
      const double log_th = z[off_theta + a];

      double g_lam = 0.0, g_th = 0.0, g_nu = 0.0, g_del = 0.0;

      // count terms
      if (!nb) {
        for (std::size_t i = 0; i < cc.n.size(); ++i) {
          const double mu = lam * cc.pi[i];
          ll += cc.n[i] * (log_lam + cc.log_pi[i]) - mu - cc.lgamma_n1[i];
          if (want_grad) g_lam += cc.n[i] / lam - cc.pi[i];
        }
      } else {
        const double del = v[off_delta + a];
        const double log_del = z[off_delta + a];
        const double lg_del = std::lgamma(del);
        const double psi_del = want_grad ? digamma(del) : 0.0;
        for (std::size_t i = 0; i < cc.n.size(); ++i) {
          const double mu = lam * cc.pi[i];
          const double t = std::log1p(mu / del);
          const double nd = cc.n[i];
          ll += std::lgamma(nd + del) - cc.lgamma_n1[i] - lg_del +
                nd * (log_lam + cc.log_pi[i] - log_del) - (del + nd) * t;
          if (want_grad) {
            g_lam += cc.pi[i] * (nd / mu - (del + nd) / (del + mu));
            g_del += digamma(nd + del) - psi_del - nd / del - t +
                     (del + nd) * mu / (del * (del + mu));
          }
        }
      }

      // size terms
      if (ga) {
        for (std::size_t i = 0; i < cc.ns.size(); ++i) {
          ll += cc.ns[i] * log_th - cc.lgamma_ns[i] + cc.nm1_log_x[i] -
                th * cc.x[i];
          if (want_grad) g_th += cc.ns[i] / th - cc.x[i];
        }
      } else if (ln) {
        for (std::size_t i = 0; i < cc.ns.size(); ++i) {
          const double r = cc.c1[i] + log_th;
          ll += -0.5 * (kLog2Pi + cc.log_sigma2[i]) -
                0.5 * r * r / cc.sigma2[i] - cc.log_x[i];
          if (want_grad) g_th += -r / (cc.sigma2[i] * th);
        }
      } else if (lt) {
        const double nu = v[off_nu + a];
        const double base = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                            0.5 * (kLogPi + std::log(nu));
        const double dig_base =
            want_grad ? 0.5 * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu)) -
                            0.5 / nu
                      : 0.0;
        for (std::size_t i = 0; i < cc.ns.size(); ++i) {
          const double r = cc.c1[i] + log_th;
          const double d = nu * cc.sigma2[i] + r * r;
          const double log1pq = std::log1p(r * r / (nu * cc.sigma2[i]));
          ll += base - 0.5 * cc.log_sigma2[i] - 0.5 * (nu + 1.0) * log1pq -
                cc.log_x[i];
          if (want_grad) {
            g_th += -(nu + 1.0) * r / (th * d);
            g_nu += dig_base - 0.5 * log1pq + 0.5 * (nu + 1.0) * r * r / (nu * d);
          }
        }
      }

      if (want_grad) {
        gn[off_lambda + a] += g_lam;
        gn[off_theta + a] += g_th;
        if (lt) gn[off_nu + a] += g_nu;
        if (nb) gn[off_delta + a] += g_del;
      }
    }

    // priors: per-class Gamma blocks plus hyperpriors
    auto block = [&](int off_values, ParamBlock which, double shape, double rate,
                     int hyp_off) {
      const int a = n_classes;
      double sum_v = 0.0, sum_log_v = 0.0;
      for (int i = 0; i < a; ++i) {
        sum_v += v[off_values + i];
        sum_log_v += z[off_values + i];
      }
      ll += a * (shape * std::log(rate) - std::lgamma(shape)) +
            (shape - 1.0) * sum_log_v - rate * sum_v;
      const auto fam = prior.family(which);
      ll += hyperprior_log_density(shape, fam) + hyperprior_log_density(rate, fam);
      if (want_grad) {
        for (int i = 0; i < a; ++i)
          gn[off_values + i] += (shape - 1.0) / v[off_values + i] - rate;
        if (hyp_off >= 0) {
          gn[hyp_off] += a * (std::log(rate) - digamma(shape)) + sum_log_v +
                         hyperprior_score(shape, fam);
          gn[hyp_off + 1] += a * shape / rate - sum_v + hyperprior_score(rate, fam);
        }
      }
    };

    const HyperParams hyper =
        fixed_hyper ? *fixed_hyper : unpack(std::span<const double>(v)).hyper;
    const bool sampled = !fixed_hyper.has_value();
    block(off_lambda, ParamBlock::Lambda, hyper.lambda.shape, hyper.lambda.rate,
          sampled ? hyper_offset(ParamBlock::Lambda) : -1);
    block(off_theta, ParamBlock::Theta, hyper.theta.shape, hyper.theta.rate,
          sampled ? hyper_offset(ParamBlock::Theta) : -1);
    if (lt)
      block(off_nu, ParamBlock::Nu, hyper.nu->shape, hyper.nu->rate,
            sampled ? hyper_offset(ParamBlock::Nu) : -1);
    if (nb)
      block(off_delta, ParamBlock::Delta, hyper.delta->shape, hyper.delta->rate,
            sampled ? hyper_offset(ParamBlock::Delta) : -1);

    // Jacobian of the exp inverse transform
    double ld = ll;
    for (int i = 0; i < dim; ++i) ld += z[i];
    if (want_grad)
      for (int i = 0; i < dim; ++i) grad[i] = gn[i] * v[i] + 1.0;
    if (!std::isfinite(ld)) return kNegInf;
    return ld;
  }
};

PosteriorTarget::PosteriorTarget(const PortfolioData& data, const ModelSpec& spec,
                                 const PriorConfig& prior)
    : impl_(std::make_unique<Impl>(data, spec, prior, std::nullopt)) {}

PosteriorTarget::PosteriorTarget(const PortfolioData& data, const ModelSpec& spec,
                                 const PriorConfig& prior,
                                 const HyperParams& fixed_hyper)
    : impl_(std::make_unique<Impl>(data, spec, prior, fixed_hyper)) {}

PosteriorTarget::~PosteriorTarget() = default;
PosteriorTarget::PosteriorTarget(PosteriorTarget&&) noexcept = default;

int PosteriorTarget::dim() const { return impl_->dim; }
int PosteriorTarget::n_classes() const { return impl_->n_classes; }
const ModelSpec& PosteriorTarget::spec() const { return impl_->spec; }
const std::vector<std::string>& PosteriorTarget::param_names() const {
  return impl_->names;
}

ParameterState PosteriorTarget::params_from_unconstrained(
    std::span<const double> z) const {
  return impl_->unpack(to_natural(z));
}

std::vector<double> PosteriorTarget::unconstrained_from_params(
    const ParameterState& p) const {
  return to_unconstrained(impl_->pack(p));
}

double PosteriorTarget::log_density(std::span<const double> z) const {
  if (!impl_->in_box(z)) return kNegInf;
  const auto params = impl_->unpack(to_natural(z));
  return log_posterior(impl_->data, params, impl_->spec, impl_->prior) +
         log_jacobian_inverse(z);
}

double PosteriorTarget::log_density_and_gradient(std::span<const double> z,
                                                 std::span<double> grad) const {
  if (static_cast<int>(grad.size()) != impl_->dim)
    throw std::invalid_argument("gradient span has wrong size");
  return impl_->eval(z, grad);
}

ParameterState params_from_draw(const std::vector<std::string>& names,
                                std::span<const double> values,
                                const ModelSpec& spec) {
  if (names.size() != values.size())
    throw std::invalid_argument("draw length does not match parameter manifest");
  ParameterState p;
  auto block_of = [](const std::string& name, const char* base) {
    const std::string prefix = std::string(base) + "[";
    if (name.rfind(prefix, 0) != 0 || name.back() != ']') return -1;
    return std::stoi(name.substr(prefix.size(), name.size() - prefix.size() - 1));
  };
  auto assign = [](std::vector<double>& v, int idx1, double value) {
    if (idx1 < 1) throw std::invalid_argument("bad parameter index");
    if (static_cast<int>(v.size()) < idx1) v.resize(idx1, 0.0);
    v[idx1 - 1] = value;
  };

  HyperParams h{{1.0, 1.0},
                {1.0, 1.0},
                spec.has_nu() ? std::optional<GammaHyper>({1.0, 1.0}) : std::nullopt,
                spec.has_delta() ? std::optional<GammaHyper>({1.0, 1.0}) : std::nullopt};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& name = names[i];
    const double v = values[i];
    if (int k = block_of(name, "lambda"); k > 0) assign(p.lambda, k, v);
    else if (int k2 = block_of(name, "theta"); k2 > 0) assign(p.theta, k2, v);
    else if (int k3 = block_of(name, "nu"); k3 > 0) assign(p.nu, k3, v);
    else if (int k4 = block_of(name, "delta"); k4 > 0) assign(p.delta, k4, v);
    else if (name == "a_lambda") h.lambda.shape = v;
    else if (name == "b_lambda") h.lambda.rate = v;
    else if (name == "a_theta") h.theta.shape = v;
    else if (name == "b_theta") h.theta.rate = v;
    else if (name == "a_nu" && h.nu) h.nu->shape = v;
    else if (name == "b_nu" && h.nu) h.nu->rate = v;
    else if (name == "a_delta" && h.delta) h.delta->shape = v;
    else if (name == "b_delta" && h.delta) h.delta->rate = v;
    else throw std::invalid_argument("unknown parameter name '" + name + "'");
  }
  p.hyper = h;
  p.validate(spec);
  return p;
}

std::vector<double> grad_log_posterior_unconstrained(const PortfolioData& data,
                                                     std::span<const double> z,
                                                     const ModelSpec& spec,
                                                     const PriorConfig& prior) {
  PosteriorTarget target(data, spec, prior);
  std::vector<double> grad(target.dim());
  target.log_density_and_gradient(z, grad);
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw std::runtime_error("non-finite gradient at coordinate " +
                               std::to_string(i) + " (" +
                               target.param_names()[i] + ")");
  return grad;
}

// ---- samplers ----

namespace {

struct Metric {
  std::vector<double> inv_mass;  // diagonal of M^{-1}

  explicit Metric(int dim) : inv_mass(dim, 1.0) {}

  double kinetic(std::span<const double> p) const {
    double k = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) k += p[i] * p[i] * inv_mass[i];
    return 0.5 * k;
  }
};

struct Phase {
  double sum_alpha = 0.0;
  long n_alpha = 0;
  void add(double alpha) { sum_alpha += alpha; ++n_alpha; }
  void check_not_stuck() const {
    if (n_alpha > 0 && sum_alpha / static_cast<double>(n_alpha) < 1e-8)
      throw std::runtime_error(
          "sampler stalled: every proposal rejected for an entire adaptation window");
  }
};

struct DualAveraging {
  double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
  long m = 0;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void reset(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    m = 0;
  }
  double update(double alpha, double target) {
    ++m;
    const double md = static_cast<double>(m);
    h_bar = (1.0 - 1.0 / (md + t0)) * h_bar + (target - alpha) / (md + t0);
    log_eps = mu - std::sqrt(md) / gamma * h_bar;
    const double eta = std::pow(md, -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    return std::exp(log_eps);
  }
  double frozen() const { return std::exp(log_eps_bar); }
};

struct PhasePoint {
  std::vector<double> z, p, g;
  double ld = 0.0;
};

class NutsKernel {
 public:
  NutsKernel(const PosteriorTarget& target, const Metric& metric, double eps,
             int max_depth, std::mt19937_64& rng)
      : target_(target), metric_(metric), eps_(eps), max_depth_(max_depth),
        rng_(rng), dim_(target.dim()) {}

  struct Result {
    double alpha_mean = 0.0;
    bool divergent = false;
    int depth = 0;
  };

  // One transition; state/ld/grad updated in place.
  Result transition(std::vector<double>& z, double& ld, std::vector<double>& g) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    PhasePoint init{z, std::vector<double>(dim_), g, ld};
    for (int i = 0; i < dim_; ++i)
      init.p[i] = normal(rng_) / std::sqrt(metric_.inv_mass[i]);
    const double joint0 = ld - metric_.kinetic(init.p);
    const double log_u = joint0 - expo(rng_);

    PhasePoint fwd = init, bwd = init, prop = init;
    double n_total = 1.0;
    bool keep_going = true;
    Result res;
    double sum_alpha = 0.0;
    long n_alpha = 0;

    while (keep_going && res.depth < max_depth_) {
      const bool forward = unif(rng_) < 0.5;
      Tree tree = build_tree(forward ? fwd : bwd, forward ? 1.0 : -1.0,
                             res.depth, log_u, joint0, unif);
      (forward ? fwd : bwd) = tree.outer;
      sum_alpha += tree.sum_alpha;
      n_alpha += tree.n_alpha;
      res.divergent = res.divergent || tree.divergent;
      if (!tree.valid) break;
      if (tree.n > 0.0 && unif(rng_) < tree.n / n_total) prop = tree.prop;
      n_total += tree.n;
      keep_going = no_u_turn(bwd, fwd);
      ++res.depth;
    }

    z = prop.z;
    ld = prop.ld;
    g = prop.g;
    res.alpha_mean = n_alpha > 0 ? sum_alpha / static_cast<double>(n_alpha) : 0.0;
    return res;
  }

 private:
  struct Tree {
    PhasePoint outer;  // end reached in the traversal direction
    PhasePoint prop;
    double n = 0.0;
    bool valid = false;
    bool divergent = false;
    double sum_alpha = 0.0;
    long n_alpha = 0;
    PhasePoint inner_bwd, inner_fwd;  // subtree span for the U-turn check
  };

  PhasePoint leapfrog(const PhasePoint& from, double step) const {
    PhasePoint out;
    out.p.resize(dim_);
    out.z.resize(dim_);
    out.g.assign(dim_, 0.0);
    for (int i = 0; i < dim_; ++i) out.p[i] = from.p[i] + 0.5 * step * from.g[i];
    for (int i = 0; i < dim_; ++i)
      out.z[i] = from.z[i] + step * metric_.inv_mass[i] * out.p[i];
    out.ld = target_.log_density_and_gradient(out.z, out.g);
    for (int i = 0; i < dim_; ++i) out.p[i] += 0.5 * step * out.g[i];
    return out;
  }

  bool no_u_turn(const PhasePoint& lo, const PhasePoint& hi) const {
    double dot_lo = 0.0, dot_hi = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double dz = hi.z[i] - lo.z[i];
      dot_lo += dz * metric_.inv_mass[i] * lo.p[i];
      dot_hi += dz * metric_.inv_mass[i] * hi.p[i];
    }
    return dot_lo >= 0.0 && dot_hi >= 0.0;
  }

  Tree build_tree(const PhasePoint& from, double dir, int depth, double log_u,
                  double joint0, std::uniform_real_distribution<double>& unif) {
    Tree t;
    if (depth == 0) {
      PhasePoint next = leapfrog(from, dir * eps_);
      double joint = next.ld - metric_.kinetic(next.p);
      if (!std::isfinite(joint)) joint = kNegInf;
      t.outer = next;
      t.prop = std::move(next);
      t.n = log_u <= joint ? 1.0 : 0.0;
      t.divergent = (log_u - joint) > kDivergenceThreshold;
      t.valid = !t.divergent;
      t.sum_alpha = std::min(1.0, std::exp(joint - joint0));
      t.n_alpha = 1;
      t.inner_bwd = t.outer;
      t.inner_fwd = t.outer;
      return t;
    }

    Tree first = build_tree(from, dir, depth - 1, log_u, joint0, unif);
    if (!first.valid) return first;
    Tree second = build_tree(first.outer, dir, depth - 1, log_u, joint0, unif);

    Tree t2;
    t2.outer = second.outer;
    t2.prop = first.prop;
    const double total = first.n + second.n;
    if (second.valid && second.n > 0.0 && unif(rng_) < second.n / total)
      t2.prop = second.prop;
    t2.n = total;
    t2.sum_alpha = first.sum_alpha + second.sum_alpha;
    t2.n_alpha = first.n_alpha + second.n_alpha;
    t2.divergent = first.divergent || second.divergent;
    t2.inner_bwd = dir > 0.0 ? first.inner_bwd : second.inner_bwd;
    t2.inner_fwd = dir > 0.0 ? second.inner_fwd : first.inner_fwd;
    t2.valid = second.valid && no_u_turn(t2.inner_bwd, t2.inner_fwd);
    return t2;
  }

  const PosteriorTarget& target_;
  const Metric& metric_;
  double eps_;
  int max_depth_;
  std::mt19937_64& rng_;
  int dim_;
};

double find_reasonable_epsilon(const PosteriorTarget& target, const Metric& metric,
                               const std::vector<double>& z, double ld,
                               const std::vector<double>& g, std::mt19937_64& rng) {
  const int dim = target.dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p(dim);
  for (int i = 0; i < dim; ++i) p[i] = normal(rng) / std::sqrt(metric.inv_mass[i]);
  const double joint0 = ld - metric.kinetic(p);

  auto joint_after_step = [&](double eps) {
    std::vector<double> p2 = p, z2 = z, g2(dim);
    for (int i = 0; i < dim; ++i) p2[i] += 0.5 * eps * g[i];
    for (int i = 0; i < dim; ++i) z2[i] = z[i] + eps * metric.inv_mass[i] * p2[i];
    const double ld2 = target.log_density_and_gradient(z2, g2);
    for (int i = 0; i < dim; ++i) p2[i] += 0.5 * eps * g2[i];
    const double j = ld2 - metric.kinetic(p2);
    return std::isfinite(j) ? j : kNegInf;
  };

  double eps = 1.0;
  double delta = joint_after_step(eps) - joint0;
  // halve until the first step is at least sane
  for (int k = 0; !std::isfinite(delta) && k < 60; ++k) {
    eps *= 0.5;
    delta = joint_after_step(eps) - joint0;
  }
  const double dir = delta > std::log(0.5) ? 1.0 : -1.0;
  for (int k = 0; k < 60; ++k) {
    if (dir * delta <= -dir * std::log(2.0)) break;
    eps *= std::pow(2.0, dir);
    if (eps < 1e-10 || eps > 1e4) break;
    delta = joint_after_step(eps) - joint0;
    if (!std::isfinite(delta)) delta = kNegInf;
  }
  return std::clamp(eps, 1e-10, 1e4);
}

struct ChainResult {
  std::vector<double> values;    // kept x dim, natural scale
  std::vector<double> log_post;  // kept
  ChainStats stats;
};

std::vector<double> initial_point(const PosteriorTarget& target,
                                  const std::optional<HyperParams>& fixed_hyper,
                                  std::mt19937_64& rng) {
  // Draws per-class parameters from their priors with hyperparameters at the
  // hyperprior center (1 for both families), jittered per chain through the
  // chain's own stream; hyper coordinates start near 1.
  const int dim = target.dim();
  const int a = target.n_classes();
  const auto& spec = target.spec();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim, 1.0);

  auto prior_draw = [&](const GammaHyper& h) {
    std::gamma_distribution<double> gamma(h.shape, 1.0 / h.rate);
    return std::clamp(gamma(rng), 0.05, 20.0);
  };
  const HyperParams defaults{
      {1.0, 1.0}, {1.0, 1.0},
      spec.has_nu() ? std::optional<GammaHyper>({1.0, 1.0}) : std::nullopt,
      spec.has_delta() ? std::optional<GammaHyper>({1.0, 1.0}) : std::nullopt};
  const HyperParams& h = fixed_hyper ? *fixed_hyper : defaults;

  int off = 0;
  for (int i = 0; i < a; ++i) v[off++] = prior_draw(h.lambda);
  for (int i = 0; i < a; ++i) v[off++] = prior_draw(h.theta);
  if (spec.has_nu())
    for (int i = 0; i < a; ++i) v[off++] = prior_draw(*h.nu);
  if (spec.has_delta())
    for (int i = 0; i < a; ++i) v[off++] = prior_draw(*h.delta);
  for (; off < dim; ++off) v[off] = std::exp(0.3 * normal(rng));

  return to_unconstrained(v);
}

ChainResult run_one_chain(const PosteriorTarget& target, const SamplerConfig& cfg,
                          const std::optional<HyperParams>& fixed_hyper,
                          int chain_index) {
  auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(chain_index));
  const int dim = target.dim();
  const int kept = cfg.n_iterations - cfg.n_burnin;

  std::vector<double> z, g(dim);
  double ld = kNegInf;
  for (int attempt = 0; attempt < 100 && !std::isfinite(ld); ++attempt) {
    z = initial_point(target, fixed_hyper, rng);
    ld = target.log_density_and_gradient(z, g);
  }
  if (!std::isfinite(ld))
    throw std::runtime_error("chain " + std::to_string(chain_index) +
                             ": could not find a finite starting point");

  Metric metric(dim);
  double eps = find_reasonable_epsilon(target, metric, z, ld, g, rng);
  DualAveraging da;
  da.reset(eps);

  // Burn-in layout: step-size adaptation throughout, with the diagonal
  // metric estimated once from the middle of the first half.
  const int b1 = cfg.n_burnin / 2;
  const int collect_begin = b1 / 2;
  std::vector<std::vector<double>> collected;

  ChainResult out;
  out.values.reserve(static_cast<std::size_t>(kept) * dim);
  out.log_post.reserve(kept);
  Phase phase;
  double sum_accept = 0.0;

  // random-walk state
  double rw_log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
  long rw_adapt_count = 0;
  std::vector<double> g_scratch(dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    const bool warm = iter < cfg.n_burnin;
    double alpha = 0.0;
    bool divergent = false;

    if (cfg.kernel == KernelKind::Nuts) {
      NutsKernel kernel(target, metric, eps, cfg.max_tree_depth, rng);
      auto res = kernel.transition(z, ld, g);
      alpha = res.alpha_mean;
      divergent = res.divergent;
    } else {
      std::vector<double> zp(dim);
      const double scale = std::exp(rw_log_scale);
      for (int i = 0; i < dim; ++i)
        zp[i] = z[i] + scale * std::sqrt(metric.inv_mass[i]) * normal(rng);
      const double ldp = target.log_density_and_gradient(zp, g_scratch);
      alpha = std::min(1.0, std::exp(ldp - ld));
      if (unif(rng) < alpha) {
        z = zp;
        ld = ldp;
      }
    }

    if (warm) {
      phase.add(alpha);
      if (cfg.kernel == KernelKind::Nuts)
        eps = da.update(alpha, cfg.target_accept);
      else
        rw_log_scale +=
            (alpha - 0.234) / std::pow(1.0 + static_cast<double>(rw_adapt_count++), 0.6);
      if (iter >= collect_begin && iter < b1) collected.push_back(z);
      if (iter == b1 - 1 && !collected.empty()) {
        phase.check_not_stuck();
        phase = Phase{};
        const double n = static_cast<double>(collected.size());
        for (int i = 0; i < dim; ++i) {
          double mean = 0.0;
          for (const auto& s : collected) mean += s[i];
          mean /= n;
          double var = 0.0;
          for (const auto& s : collected) var += (s[i] - mean) * (s[i] - mean);
          var /= std::max(1.0, n - 1.0);
          metric.inv_mass[i] =
              std::max(1e-10, n / (n + 5.0) * var + 1e-3 * (5.0 / (n + 5.0)));
        }
        collected.clear();
        if (cfg.kernel == KernelKind::Nuts) {
          eps = find_reasonable_epsilon(target, metric, z, ld, g, rng);
          da.reset(eps);
        }
      }
      if (iter == cfg.n_burnin - 1) {
        phase.check_not_stuck();
        if (cfg.kernel == KernelKind::Nuts) eps = da.frozen();
      }
    } else {
      const auto v = to_natural(z);
      out.values.insert(out.values.end(), v.begin(), v.end());
      out.log_post.push_back(ld - log_jacobian_inverse(z));
      sum_accept += alpha;
      if (divergent) ++out.stats.divergences;
    }
  }

  out.stats.mean_accept = kept > 0 ? sum_accept / kept : 0.0;
  out.stats.step_size =
      cfg.kernel == KernelKind::Nuts ? eps : std::exp(rw_log_scale);
  return out;
}

ChainDraws run_chains_impl(const PortfolioData& data, const ModelSpec& spec,
                           const PriorConfig& prior, const SamplerConfig& config,
                           const std::optional<HyperParams>& fixed_hyper) {
  config.validate();
  PosteriorTarget target =
      fixed_hyper ? PosteriorTarget(data, spec, prior, *fixed_hyper)
                  : PosteriorTarget(data, spec, prior);

  std::vector<ChainResult> results(config.n_chains);
  if (config.parallel_chains && config.n_chains > 1) {
    std::vector<std::future<ChainResult>> futures;
    futures.reserve(config.n_chains);
    for (int c = 0; c < config.n_chains; ++c)
      futures.push_back(std::async(std::launch::async, [&, c] {
        return run_one_chain(target, config, fixed_hyper, c);
      }));
    for (int c = 0; c < config.n_chains; ++c) results[c] = futures[c].get();
  } else {
    for (int c = 0; c < config.n_chains; ++c)
      results[c] = run_one_chain(target, config, fixed_hyper, c);
  }

  ChainDraws draws;
  draws.param_names = target.param_names();
  draws.n_chains = config.n_chains;
  draws.n_kept = config.n_iterations - config.n_burnin;
  for (auto& r : results) {
    draws.values.insert(draws.values.end(), r.values.begin(), r.values.end());
    draws.log_post.insert(draws.log_post.end(), r.log_post.begin(),
                          r.log_post.end());
    draws.stats.push_back(r.stats);
  }

  long total_div = 0;
  for (const auto& s : draws.stats) total_div += s.divergences;
  const long total_iters =
      static_cast<long>(draws.n_chains) * std::max(1, draws.n_kept);
  if (config.kernel == KernelKind::Nuts &&
      static_cast<double>(total_div) / static_cast<double>(total_iters) > 0.01) {
    draws.divergence_warning = true;
    std::cerr << "warning: " << total_div << " divergent transitions ("
              << (100.0 * total_div / total_iters)
              << "% of post burn-in draws); results may be biased\n";
  }
  return draws;
}

}  // namespace

ChainDraws run_chains(const PortfolioData& data, const ModelSpec& spec,
                      const PriorConfig& prior, const SamplerConfig& config) {
  return run_chains_impl(data, spec, prior, config, std::nullopt);
}

ChainDraws run_chains(const PortfolioData& data, const ModelSpec& spec,
                      const PriorConfig& prior, const SamplerConfig& config,
                      const HyperParams& fixed_hyper) {
  return run_chains_impl(data, spec, prior, config, fixed_hyper);
}

}  // namespace hcr
