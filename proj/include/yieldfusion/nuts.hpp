#pragma once

// No-U-Turn sampler with multinomial trajectory sampling, the generalized
// U-turn criterion, dual-averaging step size adaptation and a windowed
// diagonal metric, run over several independent chains.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace yf {

class JointDensity;

// Anything NUTS can sample: a differentiable log density on R^d plus a map
// from the sampling space to reported columns.
class Target {
 public:
  virtual ~Target() = default;
  virtual int dim() const = 0;
  // Returns -inf outside the support. grad may be null.
  virtual double log_density(const double* u, double* grad) const = 0;
  virtual std::vector<double> initial_point(std::mt19937_64& rng) const = 0;
  virtual std::vector<std::string> column_names() const = 0;
  virtual std::vector<double> columns(const double* u) const = 0;
};

class JointTarget : public Target {
 public:
  explicit JointTarget(const JointDensity& d) : d_(d) {}
  int dim() const override;
  double log_density(const double* u, double* grad) const override;
  std::vector<double> initial_point(std::mt19937_64& rng) const override;
  std::vector<std::string> column_names() const override;
  std::vector<double> columns(const double* u) const override;

 private:
  const JointDensity& d_;
};

struct NutsConfig {
  int n_chains = 4;
  int n_iter = 8000;  // per chain, warmup included
  int n_warmup = 2000;
  double target_accept = 0.95;
  int max_tree_depth = 12;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: one worker per chain

  void validate() const;
};

struct ChainOutput {
  Eigen::MatrixXd draws;          // post-warmup x columns, constrained space
  Eigen::MatrixXd unconstrained;  // post-warmup x dim
  std::vector<std::uint8_t> divergent;
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  std::vector<double> energy;
  std::vector<double> accept_stat;
  std::vector<double> step_size;  // every iteration, warmup included
  Eigen::VectorXd inv_metric;
};

struct NutsResult {
  std::vector<std::string> names;
  std::vector<ChainOutput> chains;
  int n_divergent = 0;
  double divergent_fraction = 0.0;
  bool diagnostic_failure = false;  // more than 25% divergent transitions

  int column(const std::string& name) const;  // throws if absent
  std::vector<double> pooled(int col) const;
  std::vector<std::vector<double>> per_chain(int col) const;
  std::size_t draws_per_chain() const { return chains.empty() ? 0 : chains[0].draws.rows(); }
  double mean_accept_stat() const;
};

NutsResult run_nuts(const Target& target, const NutsConfig& cfg);
NutsResult run_nuts(const JointDensity& density, const NutsConfig& cfg);

// Chain-specific seed derived from a master seed.
std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t stream);

void write_draws_csv(const NutsResult& r, const std::string& path);

}  // namespace yf
