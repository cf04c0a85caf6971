#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "yieldfusion/nuts.hpp"
#include "yieldfusion/posterior.hpp"
#include "yieldfusion/stats.hpp"

using namespace yf;

namespace {

class Gaussian : public Target {
 public:
  // Zero-mean Gaussian with precision matrix prec.
  explicit Gaussian(Eigen::MatrixXd prec) : prec_(std::move(prec)) {}
  int dim() const override { return static_cast<int>(prec_.rows()); }
  double log_density(const double* u, double* grad) const override {
    Eigen::Map<const Eigen::VectorXd> x(u, dim());
    const Eigen::VectorXd px = prec_ * x;
    if (grad != nullptr) Eigen::Map<Eigen::VectorXd>(grad, dim()) = -px;
    return -0.5 * x.dot(px);
  }
  std::vector<double> initial_point(std::mt19937_64& rng) const override {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> x(dim());
    for (double& v : x) v = u(rng);
    return x;
  }
  std::vector<std::string> column_names() const override {
    std::vector<std::string> n;
    for (int i = 0; i < dim(); ++i) n.push_back("x" + std::to_string(i));
    return n;
  }
  std::vector<double> columns(const double* u) const override { return {u, u + dim()}; }

 private:
  Eigen::MatrixXd prec_;
};

}  // namespace

TEST_CASE("config validation") {
  NutsConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_warmup = c.n_iter;
  CHECK_THROWS(c.validate());
  c = NutsConfig{};
  c.target_accept = 1.0;
  CHECK_THROWS(c.validate());
  c = NutsConfig{};
  c.max_tree_depth = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("chain seeds differ across streams") {
  CHECK(chain_seed(1, 0) != chain_seed(1, 1));
  CHECK(chain_seed(1, 0) != chain_seed(2, 0));
  CHECK(chain_seed(7, 3) == chain_seed(7, 3));
}

TEST_CASE("standard normal in eleven dimensions") {
  const Gaussian g(Eigen::MatrixXd::Identity(11, 11));
  NutsConfig cfg;
  cfg.seed = 42;
  const NutsResult r = run_nuts(g, cfg);
  REQUIRE(r.chains.size() == 4);
  CHECK(r.draws_per_chain() == 6000);
  for (int c = 0; c < 11; ++c) {
    const std::vector<double> x = r.pooled(c);
    const double m = mean_of(x);
    const double sd = std::sqrt(variance_of(x));
    CHECK(std::abs(m) < 0.05);
    CHECK(sd >= 0.95);
    CHECK(sd <= 1.05);
    CHECK(split_rhat(r.per_chain(c)) < 1.01);
  }
  const double acc = r.mean_accept_stat();
  CHECK(acc >= 0.90);
  CHECK(acc <= 0.99);
  CHECK(r.n_divergent == 0);
  for (const ChainOutput& ch : r.chains) {
    CHECK(ch.step_size.size() == 8000);
    CHECK(ch.divergent.size() == 6000);
    CHECK(ch.inv_metric.size() == 11);
    CHECK((ch.inv_metric.array() - 1.0).abs().maxCoeff() < 0.3);
  }
}

TEST_CASE("same seed gives identical draws") {
  const Gaussian g(Eigen::MatrixXd::Identity(3, 3));
  NutsConfig cfg;
  cfg.n_iter = 600;
  cfg.n_warmup = 300;
  cfg.seed = 9;
  const NutsResult a = run_nuts(g, cfg);
  cfg.threads = 1;
  const NutsResult b = run_nuts(g, cfg);
  for (std::size_t c = 0; c < a.chains.size(); ++c) {
    CHECK((a.chains[c].draws.array() == b.chains[c].draws.array()).all());
    CHECK(a.chains[c].energy == b.chains[c].energy);
  }
  cfg.seed = 10;
  const NutsResult d = run_nuts(g, cfg);
  CHECK_FALSE((a.chains[0].draws.array() == d.chains[0].draws.array()).all());
}

TEST_CASE("correlated gaussian covariance") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.8, 0.8, 2.0;
  const Gaussian g(cov.inverse());
  NutsConfig cfg;
  cfg.n_iter = 4500;
  cfg.n_warmup = 2000;
  cfg.seed = 3;
  const NutsResult r = run_nuts(g, cfg);
  const std::vector<double> x = r.pooled(0), y = r.pooled(1);
  REQUIRE(x.size() == 10000);
  const double mx = mean_of(x), my = mean_of(y);
  double cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cxy += (x[i] - mx) * (y[i] - my);
  cxy /= static_cast<double>(x.size() - 1);
  CHECK(variance_of(x) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(variance_of(y) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(cxy == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("posterior draws stay in the support") {
  const JointDensity d(beirut_summary_dataset(), FusionMethod::dirichlet());
  NutsConfig cfg;
  cfg.n_iter = 700;
  cfg.n_warmup = 300;
  cfg.seed = 5;
  const NutsResult r = run_nuts(d, cfg);
  CHECK(r.names == d.column_names());
  for (const ChainOutput& ch : r.chains) {
    CHECK(ch.draws.rows() == 400);
    for (Eigen::Index i = 0; i < ch.draws.rows(); ++i) {
      const double y = ch.draws(i, 0);
      CHECK(y > 0.0);
      CHECK(y < 2.75);
      CHECK(ch.draws(i, 1) > 0.05);
      CHECK(ch.draws(i, 1) < 0.30);
      CHECK(ch.draws(i, 2) > 0.02);
      CHECK(ch.draws(i, 2) < 0.15);
      CHECK(ch.draws(i, 3) + ch.draws(i, 4) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("csv export") {
  const Gaussian g(Eigen::MatrixXd::Identity(2, 2));
  NutsConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 300;
  cfg.n_warmup = 150;
  const NutsResult r = run_nuts(g, cfg);
  const std::string path = "test_nuts_draws.csv";
  write_draws_csv(r, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "chain,x0,x1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 300);
  std::remove(path.c_str());
  CHECK_THROWS(r.column("missing"));
}
