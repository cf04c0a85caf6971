#include "yieldfusion/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "yieldfusion/nuts.hpp"
#include "yieldfusion/simd/kernels.hpp"

namespace yf {

std::pair<double, double> hdi(std::vector<double> samples, double mass) {
  const std::size_t n = samples.size();
  if (n < 100) throw std::invalid_argument("hdi needs at least 100 samples");
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("hdi mass must be in (0, 1)");
  std::sort(samples.begin(), samples.end());
  const std::size_t k = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
  std::size_t best = 0;
  double width = samples[k - 1] - samples[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = samples[i + k - 1] - samples[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + k - 1]};
}

double mean_of(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("variance needs two samples");
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double median_of(std::vector<double> x) { return quantile_of(std::move(x), 0.5); }

double quantile_of(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs paired samples");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

using Chains = std::vector<std::vector<double>>;

Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + half);
    // Odd lengths drop the middle draw.
    out.emplace_back(c.end() - half, c.end());
  }
  return out;
}

Chains rank_normalize(const Chains& chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const std::vector<double> r = average_ranks(pooled);
  const double s = static_cast<double>(pooled.size());
  const boost::math::normal_distribution<double> nd;
  Chains out;
  std::size_t k = 0;
  for (const auto& c : chains) {
    out.emplace_back();
    for (std::size_t i = 0; i < c.size(); ++i, ++k)
      out.back().push_back(boost::math::quantile(nd, (r[k] - 0.375) / (s + 0.25)));
  }
  return out;
}

double rhat_basic(const Chains& chains) {
  const std::size_t m = chains.size();
  const double n = static_cast<double>(chains[0].size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(variance_of(c));
  }
  const double within = mean_of(vars);
  const double between = m > 1 ? n * variance_of(means) : 0.0;
  if (within <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt((between / within + n - 1.0) / n);
}

// Biased autocovariance (normalized by n) of one chain via FFT.
std::vector<double> autocovariance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  const double mu = mean_of(x);
  std::vector<double> buf(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i] - mu;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, buf);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> ac;
  fft.inv(ac, freq);
  ac.resize(n);
  const double a0 = ac[0];
  for (double& v : ac) v = a0 > 0.0 ? v / a0 : 0.0;
  // Rescale correlations to biased covariances.
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
  var /= static_cast<double>(n);
  for (double& v : ac) v *= var;
  return ac;
}

}  // namespace

double ess_basic(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  if (n < 4) throw std::invalid_argument("ess needs at least 4 draws per chain");
  std::vector<std::vector<double>> acov;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    acov.push_back(autocovariance(c));
    means.push_back(mean_of(c));
    vars.push_back(acov.back()[0] * static_cast<double>(n) / static_cast<double>(n - 1));
  }
  const double mean_var = mean_of(vars);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += variance_of(means);
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);
  auto acov_t = [&](std::size_t t) {
    double s = 0.0;
    for (const auto& a : acov) s += a[t];
    return s / static_cast<double>(m);
  };
  std::vector<double> rho(n, 0.0);
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - acov_t(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - acov_t(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov_t(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
      rho[k + 2] = rho[k + 1];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t && k < n; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double split_rhat(const Chains& chains) {
  if (chains.size() < 1 || chains[0].size() < 4) throw std::invalid_argument("split_rhat needs draws");
  const Chains split = split_chains(chains);
  const double bulk = rhat_basic(rank_normalize(split));
  std::vector<double> pooled;
  for (const auto& c : split) pooled.insert(pooled.end(), c.begin(), c.end());
  const double med = median_of(pooled);
  Chains folded = split;
  for (auto& c : folded)
    for (double& v : c) v = std::abs(v - med);
  const double tail = rhat_basic(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess_bulk(const Chains& chains) { return ess_basic(rank_normalize(split_chains(chains))); }

double silverman_bandwidth(const std::vector<double>& x) {
  const double sd = std::sqrt(variance_of(x));
  const double iqr = quantile_of(x, 0.75) - quantile_of(x, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1e-12;
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

std::vector<double> kde_on_grid(const std::vector<double>& x, const std::vector<double>& grid, double h) {
  std::vector<double> out(grid.size());
  simd::kernels().gauss_sum(grid.data(), grid.size(), x.data(), x.size(), h, out.data());
  const double norm = 1.0 / (static_cast<double>(x.size()) * h * std::sqrt(2.0 * M_PI));
  for (double& v : out) v *= norm;
  return out;
}

double kde_mode(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("kde_mode needs samples");
  const double h = silverman_bandwidth(x);
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  auto argmax_on = [&](double lo, double hi, int m) {
    std::vector<double> grid(m);
    for (int i = 0; i < m; ++i) grid[i] = lo + (hi - lo) * i / (m - 1);
    const std::vector<double> d = kde_on_grid(x, grid, h);
    const auto it = std::max_element(d.begin(), d.end());
    return std::pair<double, double>{grid[it - d.begin()], (hi - lo) / (m - 1)};
  };
  const auto [coarse, step] = argmax_on(*mn - h, *mx + h, 512);
  return argmax_on(coarse - 2.0 * step, coarse + 2.0 * step, 201).first;
}

namespace {

double trapezoid(const std::vector<double>& y, double dx) {
  double s = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) s += 0.5 * (y[i - 1] + y[i]) * dx;
  return s;
}

}  // namespace

double kl_divergence_kde(const std::vector<double>& p_samples, const std::vector<double>& q_samples) {
  const double hp = silverman_bandwidth(p_samples);
  const double hq = silverman_bandwidth(q_samples);
  const auto [p_lo, p_hi] = std::minmax_element(p_samples.begin(), p_samples.end());
  const auto [q_lo, q_hi] = std::minmax_element(q_samples.begin(), q_samples.end());
  const double pad = 3.0 * std::max(hp, hq);
  const double lo = std::min(*p_lo, *q_lo) - pad;
  const double hi = std::max(*p_hi, *q_hi) + pad;
  constexpr int kGrid = 512;
  std::vector<double> grid(kGrid);
  const double dx = (hi - lo) / (kGrid - 1);
  for (int i = 0; i < kGrid; ++i) grid[i] = lo + dx * i;
  std::vector<double> p = kde_on_grid(p_samples, grid, hp);
  std::vector<double> q = kde_on_grid(q_samples, grid, hq);
  const double zp = trapezoid(p, dx);
  const double zq = trapezoid(q, dx);
  if (!std::isfinite(zp) || !std::isfinite(zq) || zp <= 0.0 || zq <= 0.0)
    throw std::runtime_error("KDE mass is not finite");
  std::vector<double> integrand(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    const double pi = std::max(p[i] / zp, 1e-300);
    const double qi = std::max(q[i] / zq, 1e-300);
    integrand[i] = pi * std::log(pi / qi);
  }
  const double kl = trapezoid(integrand, dx);
  if (kl < -1e-6) throw std::runtime_error("KL estimate is negative beyond tolerance");
  return std::max(kl, 0.0);
}

const ParamSummary& PosteriorSummary::get(const std::string& name) const {
  for (const ParamSummary& p : params)
    if (p.name == name) return p;
  throw std::invalid_argument("no summary for '" + name + "'");
}

PosteriorSummary summarize(const NutsResult& r, double hdi_mass) {
  PosteriorSummary s;
  s.n_divergent = r.n_divergent;
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const int col = static_cast<int>(j);
    const std::vector<double> pooled = r.pooled(col);
    ParamSummary p;
    p.name = r.names[j];
    p.mean = mean_of(pooled);
    p.median = median_of(pooled);
    p.mode = kde_mode(pooled);
    std::tie(p.hdi_lo, p.hdi_hi) = hdi(pooled, hdi_mass);
    const auto chains = r.per_chain(col);
    p.rhat = split_rhat(chains);
    p.ess_bulk = ess_bulk(chains);
    s.params.push_back(p);
  }
  return s;
}

nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json params = nlohmann::json::object();
  for (const ParamSummary& p : s.params)
    params[p.name] = {{"mean", p.mean},     {"median", p.median}, {"mode", p.mode},
                      {"hdi_95", {p.hdi_lo, p.hdi_hi}}, {"rhat", p.rhat}, {"ess_bulk", p.ess_bulk}};
  return {{"params", params}, {"n_divergent", s.n_divergent}};
}

}  // namespace yf
