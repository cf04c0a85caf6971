#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "yieldfusion/stats.hpp"

using namespace yf;

namespace {

std::vector<double> normal_draws(std::size_t n, double mu, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(mu, sd);
  std::vector<double> x(n);
  for (double& v : x) v = nd(rng);
  return x;
}

}  // namespace

TEST_CASE("hdi on a uniform grid") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const auto [lo, hi] = hdi(x, 0.95);
  CHECK(hi - lo == 94.0);
  CHECK(lo == 1.0);
  CHECK_THROWS(hdi(std::vector<double>(50, 1.0)));
  CHECK_THROWS(hdi(x, 1.0));
}

TEST_CASE("hdi of a symmetric sample") {
  const auto x = normal_draws(100000, 2.0, 3.0, 1);
  const auto [lo, hi] = hdi(x, 0.95);
  CHECK(std::abs(0.5 * (lo + hi) - mean_of(x)) < 0.1 * 3.0);
  CHECK(hi - lo == doctest::Approx(2 * 1.959964 * 3.0).epsilon(0.02));
}

TEST_CASE("hdi of a skewed sample hugs zero") {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> ed(1.0);
  std::vector<double> x(20000);
  for (double& v : x) v = ed(rng);
  const auto [lo, hi] = hdi(x, 0.5);
  CHECK(lo < quantile_of(x, 0.05));
  CHECK(hi == doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("order statistics and ranks") {
  CHECK(median_of({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median_of({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile_of({0.0, 10.0}, 0.25) == 2.5);
  const auto r = average_ranks({10.0, 20.0, 20.0, 5.0});
  CHECK(r == std::vector<double>{2.0, 3.5, 3.5, 1.0});
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(variance_of({1.0, 2.0, 3.0}) == 1.0);
}

TEST_CASE("convergence diagnostics on iid chains") {
  std::vector<std::vector<double>> chains;
  for (int c = 0; c < 4; ++c) chains.push_back(normal_draws(1000, 0.0, 1.0, 10 + c));
  CHECK(split_rhat(chains) < 1.01);
  CHECK(ess_bulk(chains) == doctest::Approx(4000.0).epsilon(0.2));
  CHECK(ess_basic(chains) == doctest::Approx(4000.0).epsilon(0.2));
  for (double& v : chains[2]) v += 10.0;
  CHECK(split_rhat(chains) > 1.5);
}

TEST_CASE("ess of an autocorrelated chain") {
  // AR(1) with phi = 0.9 has integrated autocorrelation time 19.
  std::vector<std::vector<double>> chains;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int c = 0; c < 4; ++c) {
    std::vector<double> x(20000);
    double v = nd(rng) / std::sqrt(1 - 0.81);
    for (double& s : x) s = v = 0.9 * v + nd(rng);
    chains.push_back(x);
  }
  CHECK(ess_basic(chains) == doctest::Approx(80000.0 / 19.0).epsilon(0.15));
}

TEST_CASE("kde bandwidth and mode") {
  const auto x = normal_draws(200000, 1.5, 0.5, 5);
  const double sd = std::sqrt(variance_of(x));
  CHECK(silverman_bandwidth(x) <= 0.9 * sd * std::pow(200000.0, -0.2) + 1e-12);
  // Sampling sd of the KDE mode here is about 0.015.
  CHECK(std::abs(kde_mode(x) - 1.5) < 0.05);
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(-1.0 + 5.0 * i / 400.0);
  const auto f = kde_on_grid(x, grid, silverman_bandwidth(x));
  double integral = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) integral += 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("kl divergence between unit normals") {
  const auto p = normal_draws(20000, 0.0, 1.0, 6);
  const auto q = normal_draws(20000, 1.0, 1.0, 7);
  CHECK(std::abs(kl_divergence_kde(p, q) - 0.5) < 0.05);
  const auto p2 = normal_draws(20000, 0.0, 1.0, 8);
  CHECK(kl_divergence_kde(p, p2) < 0.01);
  CHECK(kl_divergence_kde(p, p2) >= 0.0);
}
