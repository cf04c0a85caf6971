#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace yf {

struct NutsResult;

// Shortest window holding ceil(mass * n) sorted samples (leftmost on ties).
std::pair<double, double> hdi(std::vector<double> samples, double mass = 0.95);

double mean_of(const std::vector<double>& x);
double variance_of(const std::vector<double>& x);  // n-1 denominator
double median_of(std::vector<double> x);
// Linear interpolation between order statistics, q in [0, 1].
double quantile_of(std::vector<double> x, double q);

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(const std::vector<double>& x);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Rank-normalized split R-hat: the larger of the bulk and folded values.
double split_rhat(const std::vector<std::vector<double>>& chains);
// Bulk effective sample size of rank-normalized split chains.
double ess_bulk(const std::vector<std::vector<double>>& chains);
// Plain ESS of the given chains with Geyer's initial monotone sequence.
double ess_basic(const std::vector<std::vector<double>>& chains);

double silverman_bandwidth(const std::vector<double>& x);
// Gaussian KDE evaluated on a grid (density, integrates to about 1).
std::vector<double> kde_on_grid(const std::vector<double>& x, const std::vector<double>& grid, double h);
double kde_mode(const std::vector<double>& x);

// KL(p || q) in nats from two sample sets: Silverman KDEs on a 512-point grid
// spanning both samples, trapezoidal normalization and integration, floor 1e-300.
double kl_divergence_kde(const std::vector<double>& p_samples, const std::vector<double>& q_samples);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double mode = 0.0;
  double hdi_lo = 0.0;
  double hdi_hi = 0.0;
  double rhat = 0.0;
  double ess_bulk = 0.0;
};

struct PosteriorSummary {
  std::vector<ParamSummary> params;
  int n_divergent = 0;
  const ParamSummary& get(const std::string& name) const;
};

PosteriorSummary summarize(const NutsResult& r, double hdi_mass = 0.95);
nlohmann::json to_json(const PosteriorSummary& s);

}  // namespace yf
