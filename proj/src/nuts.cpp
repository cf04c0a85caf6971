#include "yieldfusion/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <thread>

#include "yieldfusion/posterior.hpp"

namespace yf {

int JointTarget::dim() const { return d_.dim(); }
double JointTarget::log_density(const double* u, double* grad) const { return d_.log_density(u, grad); }
std::vector<double> JointTarget::initial_point(std::mt19937_64& rng) const { return d_.initial_point(rng); }
std::vector<std::string> JointTarget::column_names() const { return d_.column_names(); }
std::vector<double> JointTarget::columns(const double* u) const { return d_.columns(u); }

void NutsConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
  if (n_warmup < 0 || n_warmup >= n_iter) throw std::invalid_argument("n_warmup must be in [0, n_iter)");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target_accept must be in (0, 1)");
  if (max_tree_depth < 1) throw std::invalid_argument("max_tree_depth must be >= 1");
}

std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

using Vec = Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  Vec q, p, g;
  double logp = 0.0;
};

class Sampler {
 public:
  Sampler(const Target& t, const NutsConfig& cfg, std::uint64_t seed)
      : t_(t), cfg_(cfg), rng_(seed), d_(t.dim()), inv_metric_(Vec::Ones(t.dim())) {}

  ChainOutput run() {
    std::vector<double> init = t_.initial_point(rng_);
    z_.q = Eigen::Map<const Vec>(init.data(), d_);
    z_.p = Vec::Zero(d_);
    z_.g = Vec::Zero(d_);
    update(z_);
    if (!std::isfinite(z_.logp)) throw std::runtime_error("initial point has non-finite density");

    setup_windows();
    eps_ = 1.0;
    init_stepsize();
    mu_ = std::log(10.0 * eps_);
    restart_dual_averaging();

    const int n_keep = cfg_.n_iter - cfg_.n_warmup;
    const auto names = t_.column_names();
    ChainOutput out;
    out.draws.resize(n_keep, static_cast<Eigen::Index>(names.size()));
    out.unconstrained.resize(n_keep, d_);
    out.divergent.reserve(n_keep);
    out.step_size.reserve(cfg_.n_iter);

    Vec w_mean = Vec::Zero(d_), w_m2 = Vec::Zero(d_);
    int w_n = 0;
    for (int it = 0; it < cfg_.n_iter; ++it) {
      const bool warm = it < cfg_.n_warmup;
      out.step_size.push_back(eps_);
      transition();
      if (warm) {
        learn_stepsize(accept_);
        // Windowed variance estimate of the position.
        if (adapt_metric_) {
          const int c = window_counter_;
          if (c >= init_buffer_ && c < cfg_.n_warmup - term_buffer_ && c != cfg_.n_warmup) {
            ++w_n;
            const Vec delta = z_.q - w_mean;
            w_mean += delta / w_n;
            w_m2 += delta.cwiseProduct(z_.q - w_mean);
          }
          if (c == next_window_ && c != cfg_.n_warmup) {
            compute_next_window();
            const double n = w_n;
            const Vec var = w_m2 / (n - 1.0);
            inv_metric_ = (n / (n + 5.0)) * var + Vec::Constant(d_, 1e-3 * (5.0 / (n + 5.0)));
            w_mean.setZero();
            w_m2.setZero();
            w_n = 0;
            ++window_counter_;
            init_stepsize();
            mu_ = std::log(10.0 * eps_);
            restart_dual_averaging();
          } else {
            ++window_counter_;
          }
        }
        if (it == cfg_.n_warmup - 1) eps_ = std::exp(x_bar_);
      } else {
        const int row = it - cfg_.n_warmup;
        const std::vector<double> cols = t_.columns(z_.q.data());
        for (std::size_t j = 0; j < cols.size(); ++j) out.draws(row, static_cast<Eigen::Index>(j)) = cols[j];
        out.unconstrained.row(row) = z_.q.transpose();
        out.divergent.push_back(divergent_ ? 1 : 0);
        out.tree_depth.push_back(depth_);
        out.n_leapfrog.push_back(n_leapfrog_);
        out.energy.push_back(energy_);
        out.accept_stat.push_back(accept_);
      }
    }
    out.inv_metric = inv_metric_;
    return out;
  }

 private:
  void update(PhasePoint& z) const { z.logp = t_.log_density(z.q.data(), z.g.data()); }

  double hamiltonian(const PhasePoint& z) const {
    const double h = -z.logp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    return std::isnan(h) ? kInf : h;
  }

  Vec p_sharp(const PhasePoint& z) const { return inv_metric_.cwiseProduct(z.p); }

  void sample_momentum(PhasePoint& z) {
    for (int i = 0; i < d_; ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.g;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    update(z);
    if (!std::isfinite(z.logp)) return;
    z.p += 0.5 * eps * z.g;
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void init_stepsize() {
    const PhasePoint z_init = z_;
    sample_momentum(z_);
    double h0 = hamiltonian(z_);
    leapfrog(z_, eps_);
    double delta = h0 - hamiltonian(z_);
    const int direction = delta > std::log(0.8) ? 1 : -1;
    for (;;) {
      z_ = z_init;
      sample_momentum(z_);
      h0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      delta = h0 - hamiltonian(z_);
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw std::runtime_error("step size search diverged; posterior may be improper");
      if (eps_ == 0.0) throw std::runtime_error("step size search collapsed to zero");
    }
    z_ = z_init;
  }

  void restart_dual_averaging() {
    da_counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  void learn_stepsize(double adapt_stat) {
    ++da_counter_;
    adapt_stat = std::min(1.0, adapt_stat);
    const double eta = 1.0 / (da_counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (cfg_.target_accept - adapt_stat);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(da_counter_)) / kGamma;
    const double x_eta = std::pow(static_cast<double>(da_counter_), -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    eps_ = std::exp(x);
  }

  void setup_windows() {
    const int nw = cfg_.n_warmup;
    adapt_metric_ = nw >= 20;
    init_buffer_ = 75;
    term_buffer_ = 50;
    window_size_ = 25;
    if (adapt_metric_ && init_buffer_ + window_size_ + term_buffer_ > nw) {
      init_buffer_ = static_cast<int>(0.15 * nw);
      term_buffer_ = static_cast<int>(0.1 * nw);
      window_size_ = nw - (init_buffer_ + term_buffer_);
    }
    window_counter_ = 0;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  void compute_next_window() {
    const int last = cfg_.n_warmup - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = window_counter_ + window_size_;
    if (next_window_ != last) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= cfg_.n_warmup - term_buffer_) next_window_ = last;
    }
  }

  static bool criterion(const Vec& p_sharp_minus, const Vec& p_sharp_plus, const Vec& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z_propose, Vec& p_sharp_beg, Vec& p_sharp_end, Vec& rho,
                  Vec& p_beg, Vec& p_end, double h0, double sign, double& log_sum_weight,
                  double& sum_metro) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++n_leapfrog_;
      const double h = std::isfinite(z_.logp) ? hamiltonian(z_) : kInf;
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = p_sharp(z_);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    double lsw_init = -kInf;
    Vec p_init_end(d_), p_sharp_init_end(d_), rho_init = Vec::Zero(d_);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0,
                    sign, lsw_init, sum_metro))
      return false;

    PhasePoint z_propose_final = z_;
    double lsw_final = -kInf;
    Vec p_final_beg(d_), p_sharp_final_beg(d_), rho_final = Vec::Zero(d_);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg,
                    p_end, h0, sign, lsw_final, sum_metro))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (uniform() < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    const Vec rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  void transition() {
    sample_momentum(z_);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    Vec p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    const Vec ps = p_sharp(z_);
    Vec p_sharp_fwd_fwd = ps, p_sharp_fwd_bck = ps, p_sharp_bck_fwd = ps, p_sharp_bck_bck = ps;
    Vec rho = z_.p;
    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z_);
    n_leapfrog_ = 0;
    depth_ = 0;
    divergent_ = false;
    double sum_metro = 0.0;

    while (depth_ < cfg_.max_tree_depth) {
      Vec rho_fwd = Vec::Zero(d_), rho_bck = Vec::Zero(d_);
      bool valid = false;
      double lsw_subtree = -kInf;
      if (uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth_, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                           h0, 1.0, lsw_subtree, sum_metro);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth_, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                           h0, -1.0, lsw_subtree, sum_metro);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth_;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    accept_ = n_leapfrog_ > 0 ? sum_metro / n_leapfrog_ : 0.0;
    z_ = z_sample;
    energy_ = hamiltonian(z_);
  }

  static constexpr double kMaxDeltaH = 1000.0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  const Target& t_;
  const NutsConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  int d_;
  Vec inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  int da_counter_ = 0;
  bool adapt_metric_ = false;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int window_size_ = 25;
  int window_counter_ = 0;
  int next_window_ = 0;
  int depth_ = 0;
  int n_leapfrog_ = 0;
  bool divergent_ = false;
  double accept_ = 0.0;
  double energy_ = 0.0;
};

}  // namespace

int NutsResult::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("no column named '" + name + "'");
}

std::vector<double> NutsResult::pooled(int col) const {
  std::vector<double> v;
  for (const ChainOutput& c : chains)
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) v.push_back(c.draws(r, col));
  return v;
}

std::vector<std::vector<double>> NutsResult::per_chain(int col) const {
  std::vector<std::vector<double>> v;
  for (const ChainOutput& c : chains) {
    v.emplace_back();
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) v.back().push_back(c.draws(r, col));
  }
  return v;
}

double NutsResult::mean_accept_stat() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const ChainOutput& c : chains)
    for (double a : c.accept_stat) {
      s += a;
      ++n;
    }
  return n > 0 ? s / static_cast<double>(n) : 0.0;
}

NutsResult run_nuts(const Target& target, const NutsConfig& cfg) {
  cfg.validate();
  NutsResult res;
  res.names = target.column_names();
  res.chains.resize(cfg.n_chains);
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  auto work = [&](int c) {
    try {
      Sampler s(target, cfg, chain_seed(cfg.seed, static_cast<std::uint64_t>(c)));
      res.chains[c] = s.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const int workers = std::max(1, cfg.threads > 0 ? std::min(cfg.threads, cfg.n_chains) : cfg.n_chains);
  if (workers == 1) {
    for (int c = 0; c < cfg.n_chains; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int c = w; c < cfg.n_chains; c += workers) work(c);
      });
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::size_t total = 0;
  for (const ChainOutput& c : res.chains) {
    total += c.divergent.size();
    for (std::uint8_t f : c.divergent) res.n_divergent += f;
  }
  res.divergent_fraction = total > 0 ? static_cast<double>(res.n_divergent) / static_cast<double>(total) : 0.0;
  res.diagnostic_failure = res.divergent_fraction > 0.25;
  return res;
}

NutsResult run_nuts(const JointDensity& density, const NutsConfig& cfg) {
  JointTarget t(density);
  return run_nuts(t, cfg);
}

void write_draws_csv(const NutsResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "chain";
  for (const std::string& n : r.names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < r.chains.size(); ++c) {
    const Eigen::MatrixXd& d = r.chains[c].draws;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      out << c;
      for (Eigen::Index j = 0; j < d.cols(); ++j) out << ',' << d(i, j);
      out << '\n';
    }
  }
}

}  // namespace yf
