#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hcr/inference.hpp"

namespace hcr {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

// Biased (1/N) autocovariance at a single lag.
double autocov(std::span<const double> v, double mean, int lag) {
  const int n = static_cast<int>(v.size());
  double s = 0.0;
  for (int i = 0; i + lag < n; ++i) s += (v[i] - mean) * (v[i + lag] - mean);
  return s / static_cast<double>(n);
}

// Potential scale reduction over a set of equal-length sequences.
double rhat_of_sequences(const std::vector<std::vector<double>>& seqs) {
  const int m = static_cast<int>(seqs.size());
  const int n = static_cast<int>(seqs[0].size());
  std::vector<double> means(m);
  double w = 0.0;
  for (int j = 0; j < m; ++j) {
    means[j] = mean_of(seqs[j]);
    w += variance_of(seqs[j], means[j]);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mj : means) b += (mj - grand) * (mj - grand);
  b *= static_cast<double>(n) / (m - 1);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double v_hat = (n - 1.0) / n * w + b / n;
  return std::sqrt(v_hat / w);
}

// Integrated autocorrelation time via Geyer's initial monotone positive
// sequence, combining chains the way Stan does. Returns tau >= ~0.
double combined_tau(const std::vector<std::span<const double>>& chains) {
  const int c = static_cast<int>(chains.size());
  const int n = static_cast<int>(chains[0].size());
  std::vector<double> means(c), vars(c), acov0(c);
  double w = 0.0;
  for (int j = 0; j < c; ++j) {
    means[j] = mean_of(chains[j]);
    acov0[j] = autocov(chains[j], means[j], 0);
    vars[j] = acov0[j] * n / (n - 1.0);
    w += vars[j];
  }
  w /= c;
  double v_hat = (n - 1.0) / n * w;
  if (c > 1) {
    const double grand = mean_of(means);
    double b = 0.0;
    for (double mj : means) b += (mj - grand) * (mj - grand);
    b *= static_cast<double>(n) / (c - 1);
    v_hat += b / n;
  }
  if (v_hat <= 0.0) return 1.0;

  auto rho = [&](int lag) {
    double acv = 0.0;
    for (int j = 0; j < c; ++j) acv += autocov(chains[j], means[j], lag);
    acv /= c;
    return 1.0 - (w - acv) / v_hat;
  };

  // pair sums rho(2k) + rho(2k+1), truncated at the first nonpositive one
  // and forced nonincreasing
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  const int max_lag = n - 2;
  for (int k = 0; 2 * k + 1 <= max_lag; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0 / (static_cast<double>(c) * n));
}

// Spectral-style standard error of a window mean: var * tau / n.
double window_se2(std::span<const double> window) {
  const double tau = combined_tau({window});
  const double var = variance_of(window, mean_of(window));
  return var * tau / static_cast<double>(window.size());
}

}  // namespace

Diagnostics compute_diagnostics(const ChainDraws& draws, int n_lags) {
  if (draws.n_chains < 2)
    throw std::invalid_argument("diagnostics require at least 2 chains");
  if (draws.n_kept < 100)
    throw std::invalid_argument("diagnostics require at least 100 kept draws per chain");

  const int n_params = draws.n_params();
  const int n = draws.n_kept;
  const int c = draws.n_chains;

  Diagnostics d;
  d.param_names = draws.param_names;
  d.n_lags = n_lags;
  d.rhat.resize(n_params);
  d.ess.resize(n_params);
  d.geweke_z.assign(n_params, std::vector<double>(c, 0.0));
  d.lag_autocorr.assign(n_params, std::vector<double>(n_lags, 0.0));

  std::vector<std::vector<double>> series(c, std::vector<double>(n));
  for (int p = 0; p < n_params; ++p) {
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < n; ++i) series[j][i] = draws.value(j, i, p);

    // split-Rhat: each chain halved
    std::vector<std::vector<double>> halves;
    const int half = n / 2;
    for (int j = 0; j < c; ++j) {
      halves.emplace_back(series[j].begin(), series[j].begin() + half);
      halves.emplace_back(series[j].end() - half, series[j].end());
    }
    d.rhat[p] = rhat_of_sequences(halves);

    std::vector<std::span<const double>> spans;
    for (int j = 0; j < c; ++j) spans.emplace_back(series[j]);
    const double tau = combined_tau(spans);
    const double total = static_cast<double>(c) * n;
    d.ess[p] = std::min(total, total / tau);

    // Geweke: first 10% vs last 50% of each chain
    for (int j = 0; j < c; ++j) {
      const int n1 = std::max(2, n / 10);
      const int n2 = std::max(2, n / 2);
      std::span<const double> w1(series[j].data(), n1);
      std::span<const double> w2(series[j].data() + (n - n2), n2);
      const double se2 = window_se2(w1) + window_se2(w2);
      d.geweke_z[p][j] =
          se2 > 0.0 ? (mean_of(w1) - mean_of(w2)) / std::sqrt(se2) : 0.0;
    }

    // lag autocorrelations averaged over chains
    for (int lag = 1; lag <= n_lags && lag < n; ++lag) {
      double r = 0.0;
      for (int j = 0; j < c; ++j) {
        const double m = mean_of(series[j]);
        const double a0 = autocov(series[j], m, 0);
        r += a0 > 0.0 ? autocov(series[j], m, lag) / a0 : 0.0;
      }
      d.lag_autocorr[p][lag - 1] = r / c;
    }
  }

  // pooled cross-correlation matrix
  d.cross_corr.assign(n_params, std::vector<double>(n_params, 0.0));
  const std::size_t total = static_cast<std::size_t>(c) * n;
  std::vector<double> means(n_params, 0.0), sds(n_params, 0.0);
  for (int p = 0; p < n_params; ++p) {
    double s = 0.0;
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < n; ++i) s += draws.value(j, i, p);
    means[p] = s / static_cast<double>(total);
  }
  for (int p = 0; p < n_params; ++p) {
    double s = 0.0;
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < n; ++i) {
        const double dlt = draws.value(j, i, p) - means[p];
        s += dlt * dlt;
      }
    sds[p] = std::sqrt(s / static_cast<double>(total - 1));
  }
  for (int p = 0; p < n_params; ++p) {
    d.cross_corr[p][p] = 1.0;
    for (int q = p + 1; q < n_params; ++q) {
      double s = 0.0;
      for (int j = 0; j < c; ++j)
        for (int i = 0; i < n; ++i)
          s += (draws.value(j, i, p) - means[p]) * (draws.value(j, i, q) - means[q]);
      const double denom = sds[p] * sds[q] * static_cast<double>(total - 1);
      const double r = denom > 0.0 ? s / denom : 0.0;
      d.cross_corr[p][q] = r;
      d.cross_corr[q][p] = r;
    }
  }
  return d;
}

}  // namespace hcr
