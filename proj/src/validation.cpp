#include "yieldfusion/validation.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "yieldfusion/stats.hpp"

namespace yf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

NutsResult fit(const Dataset& data, const FusionMethod& method, const FitConfig& cfg, const NutsConfig& nuts) {
  const JointDensity d(data, method, cfg.prior, cfg.link);
  return run_nuts(d, nuts);
}

std::vector<double> yield_draws(const NutsResult& r) { return r.pooled(r.column("yield_kt")); }

// KL is invariant under the log map; the log-yield marginals are close to
// Gaussian, which keeps the KDE tails from underflowing against each other.
std::vector<double> log_yield_draws(const NutsResult& r) {
  std::vector<double> y = yield_draws(r);
  for (double& v : y) v = std::log(v);
  return y;
}

double gamma_column_mean(const NutsResult& r, Modality m) {
  return mean_of(r.pooled(r.column(std::string("gamma_") + modality_name(m))));
}

std::vector<std::size_t> even_indices(std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = (i * n) / count;
  return idx;
}

// Parameter vectors of all pooled draws, chain by chain.
std::vector<ParamVector> pooled_params(const NutsResult& fit, const JointDensity& density) {
  std::vector<ParamVector> out;
  for (const ChainOutput& ch : fit.chains) {
    if (ch.unconstrained.cols() != density.dim())
      throw std::invalid_argument("fit does not match the density dimension");
    for (Eigen::Index i = 0; i < ch.unconstrained.rows(); ++i) {
      const Eigen::VectorXd u = ch.unconstrained.row(i).transpose();
      out.push_back(density.constrain(u.data()));
    }
  }
  return out;
}

double logsumexp_mean(const std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s / static_cast<double>(x.size()));
}

}  // namespace

// ---- posterior predictive checks ----

const char* discrepancy_name(Modality m) {
  switch (m) {
    case Modality::Seismic:
      return "squared_standardized_residual";
    case Modality::Crater:
      return "squared_standardized_log_diameter_residual";
    case Modality::Sar:
      return "mean_negative_student_t_log_density";
    case Modality::Vlm:
      return "mean_cross_entropy";
  }
  return "unknown";
}

void ppc_pvalues(PpcResult& r) {
  if (r.t_obs.size() != r.t_rep.size() || r.t_obs.empty())
    throw std::invalid_argument("ppc needs matching nonempty discrepancy vectors");
  const double s = static_cast<double>(r.t_obs.size());
  double ge = 0.0, gt = 0.0, eq = 0.0;
  for (std::size_t i = 0; i < r.t_obs.size(); ++i) {
    if (r.t_rep[i] > r.t_obs[i]) {
      gt += 1.0;
      ge += 1.0;
    } else if (r.t_rep[i] == r.t_obs[i]) {
      eq += 1.0;
      ge += 1.0;
    }
  }
  r.p_bayes = ge / s;
  r.mid_p = (gt + 0.5 * eq) / s;
  r.se = std::sqrt(r.mid_p * (1.0 - r.mid_p) / s);
}

PpcResult ppc(const NutsResult& fit, const JointDensity& density, Modality m, int s, std::uint64_t seed) {
  if (!density.present(m)) throw std::invalid_argument(std::string("ppc: modality absent: ") + modality_name(m));
  if (s < 1) throw std::invalid_argument("ppc: S must be positive");
  const std::vector<ParamVector> params = pooled_params(fit, density);
  if (params.empty()) throw std::invalid_argument("ppc: fit has no draws");
  const Dataset& data = density.dataset();
  const MagnitudeLink& link = density.link();

  PpcResult r;
  r.modality = m;
  r.discrepancy = discrepancy_name(m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> z_obs;
  std::vector<double> vlm_w;
  if (m == Modality::Sar)
    for (const SarBox& b : data.sar) z_obs.push_back(damage_logit(b.damage_pct));
  if (m == Modality::Vlm) {
    vlm_w = vlm_weights(data.vlm);
    const double tot = std::accumulate(vlm_w.begin(), vlm_w.end(), 0.0);
    for (double& w : vlm_w) w /= tot;
  }

  for (std::size_t idx : even_indices(params.size(), static_cast<std::size_t>(s))) {
    const ParamVector& p = params[idx];
    double t_obs = 0.0, t_rep = 0.0;
    switch (m) {
      case Modality::Seismic: {
        const double pred = magnitude_from_yield(p.yield_kt, link);
        const double e = (data.seismic->mw_obs - pred) / p.sigma_m;
        const double e_rep = normal(rng);
        t_obs = e * e;
        t_rep = e_rep * e_rep;
        break;
      }
      case Modality::Crater: {
        const double mu = crater_mu_log10(p.yield_kt);
        for (double dim : {data.crater->width_m, data.crater->length_m}) {
          const double e = (std::log10(dim) - mu) / p.sigma_c;
          const double e_rep = normal(rng);
          t_obs += e * e;
          t_rep += e_rep * e_rep;
        }
        break;
      }
      case Modality::Sar: {
        const double scale = p.sigma_sar / 100.0;
        const double log_norm = student_t_log_norm(p.nu, scale);
        std::student_t_distribution<double> student(p.nu);
        const std::size_t n = data.sar.size();
        for (std::size_t i = 0; i < n; ++i) {
          const double p_kpa = psi_to_kpa(kb_incident_overpressure(data.sar[i].range_m, p.yield_kt));
          const double z_mu = p.k_slope * (std::log10(p_kpa) - std::log10(p.p50_kpa));
          auto neg_lp = [&](double z) {
            const double t = (z - z_mu) / scale;
            return -(log_norm - 0.5 * (p.nu + 1.0) * std::log1p(t * t / p.nu));
          };
          const double z_rep_raw = z_mu + scale * student(rng);
          const double z_rep = damage_logit(100.0 / (1.0 + std::exp(-z_rep_raw)));
          t_obs += neg_lp(z_obs[i]);
          t_rep += neg_lp(z_rep);
        }
        t_obs /= static_cast<double>(n);
        t_rep /= static_cast<double>(n);
        break;
      }
      case Modality::Vlm: {
        for (std::size_t i = 0; i < data.vlm.size(); ++i) {
          const auto pi = vlm_bin_probs(kb_incident_overpressure(data.vlm[i].range_m, p.yield_kt), p.sigma_dex);
          double ce = 0.0;
          for (int k = 0; k < 9; ++k)
            if (data.vlm[i].pmf[k] > 0.0) ce -= data.vlm[i].pmf[k] * std::log(pi[k]);
          const double u = unif(rng);
          int k_rep = 8;
          double acc = 0.0;
          for (int k = 0; k < 9; ++k) {
            acc += pi[k];
            if (u < acc) {
              k_rep = k;
              break;
            }
          }
          t_obs += vlm_w[i] * ce;
          t_rep -= vlm_w[i] * std::log(pi[k_rep]);
        }
        break;
      }
    }
    r.t_obs.push_back(t_obs);
    r.t_rep.push_back(t_rep);
  }
  ppc_pvalues(r);
  return r;
}

// ---- KL and leave-one-out ----

LooKlResult loo_kl_from(std::vector<Modality> mods, std::vector<double> kl, std::vector<double> gamma_mean) {
  if (mods.size() != kl.size() || kl.size() != gamma_mean.size())
    throw std::invalid_argument("loo_kl: vector lengths differ");
  LooKlResult r;
  r.modalities = std::move(mods);
  r.kl = std::move(kl);
  r.gamma_mean = std::move(gamma_mean);
  r.spearman = r.kl.size() >= 2 ? spearman(r.gamma_mean, r.kl) : kNaN;
  return r;
}

LooKlResult loo_kl(const Dataset& data, const FitConfig& cfg) {
  if (data.n_modalities() < 2) throw std::invalid_argument("loo_kl needs at least two modalities");
  const NutsResult full = fit(data, FusionMethod::dirichlet(), cfg, cfg.nuts);
  if (full.diagnostic_failure) throw std::runtime_error("loo_kl: full fit failed its sampler diagnostics");
  const std::vector<double> y_full = log_yield_draws(full);
  std::vector<Modality> mods;
  std::vector<double> kl, gm;
  for (Modality m : kAllModalities) {
    if (!data.has(m)) continue;
    const NutsResult reduced = fit(data.without(m), FusionMethod::dirichlet(), cfg, cfg.nuts);
    mods.push_back(m);
    kl.push_back(kl_divergence_kde(y_full, log_yield_draws(reduced)));
    gm.push_back(gamma_column_mean(full, m));
  }
  return loo_kl_from(mods, kl, gm);
}

// ---- single-modality fits and post-hoc fusers ----

WaicTerms waic_terms(const std::vector<std::vector<double>>& loglik_by_draw) {
  if (loglik_by_draw.empty()) throw std::invalid_argument("waic needs draws");
  const std::size_t n = loglik_by_draw[0].size();
  const std::size_t s = loglik_by_draw.size();
  WaicTerms w;
  w.lppd.resize(n);
  w.var.resize(n);
  std::vector<double> col(s);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < s; ++d) col[d] = loglik_by_draw[d][i];
    w.lppd[i] = logsumexp_mean(col);
    w.var[i] = s > 1 ? variance_of(col) : 0.0;
  }
  return w;
}

SingleModalityFit fit_single_modality(const Dataset& data, Modality m, const FitConfig& cfg) {
  if (!data.has(m)) throw std::invalid_argument(std::string("modality absent: ") + modality_name(m));
  const Dataset only = data.only(m);
  const JointDensity density(only, FusionMethod::plain(), cfg.prior, cfg.link);
  const NutsResult r = run_nuts(density, cfg.nuts);
  SingleModalityFit out;
  out.modality = m;
  out.diagnostic_failure = r.diagnostic_failure;
  out.yield_draws = yield_draws(r);
  std::vector<std::vector<double>> ll;
  for (const ParamVector& p : pooled_params(r, density)) ll.push_back(density.pointwise_loglik(m, p));
  const WaicTerms w = waic_terms(ll);
  // Observation weights follow how the modality aggregates its terms.
  std::vector<double> obs_w(w.lppd.size(), 1.0 / static_cast<double>(w.lppd.size()));
  if (m == Modality::Vlm) {
    obs_w = vlm_weights(only.vlm);
    const double tot = std::accumulate(obs_w.begin(), obs_w.end(), 0.0);
    for (double& v : obs_w) v /= tot;
  }
  for (std::size_t i = 0; i < w.lppd.size(); ++i) {
    out.lppd += w.lppd[i];
    out.p_waic += w.var[i];
    out.elpd_mean += obs_w[i] * (w.lppd[i] - w.var[i]);
  }
  return out;
}

std::vector<SingleModalityFit> fit_all_single(const Dataset& data, const FitConfig& cfg) {
  std::vector<SingleModalityFit> fits;
  for (Modality m : kAllModalities)
    if (data.has(m)) fits.push_back(fit_single_modality(data, m, cfg));
  return fits;
}

std::array<double, 4> softmax_weights(const std::array<double, 4>& elpd_mean) {
  const double mx = *std::max_element(elpd_mean.begin(), elpd_mean.end());
  std::array<double, 4> w{};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += (w[i] = std::exp(elpd_mean[i] - mx));
  for (double& v : w) v /= s;
  return w;
}

std::array<double, 4> fixed_gamma_weights(const std::vector<SingleModalityFit>& fits) {
  std::array<double, 4> e{};
  std::array<bool, 4> seen{};
  for (const SingleModalityFit& f : fits) {
    e[static_cast<int>(f.modality)] = f.elpd_mean;
    seen[static_cast<int>(f.modality)] = true;
  }
  for (bool b : seen)
    if (!b) throw std::invalid_argument("fixed_gamma_weights needs all four single-modality fits");
  return softmax_weights(e);
}

std::array<double, 4> fixed_gamma_weights(const Dataset& data, const FitConfig& cfg) {
  for (Modality m : kAllModalities)
    if (!data.has(m)) throw std::invalid_argument("fixed_gamma_weights needs all four modalities");
  return fixed_gamma_weights(fit_all_single(data, cfg));
}

std::vector<double> bma_fuse(const std::vector<SingleModalityFit>& fits, std::size_t n_total) {
  if (fits.empty()) throw std::invalid_argument("bma_fuse needs fits");
  double mx = -std::numeric_limits<double>::infinity();
  for (const SingleModalityFit& f : fits) {
    if (f.yield_draws.empty()) throw std::invalid_argument("bma_fuse: fit without draws");
    mx = std::max(mx, f.elpd());
  }
  std::vector<double> w(fits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) s += (w[i] = std::exp(fits[i].elpd() - mx));
  std::vector<std::size_t> count(fits.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    w[i] /= s;
    count[i] = static_cast<std::size_t>(std::floor(w[i] * static_cast<double>(n_total)));
    used += count[i];
  }
  count[std::max_element(w.begin(), w.end()) - w.begin()] += n_total - used;
  std::vector<double> out;
  out.reserve(n_total);
  for (std::size_t i = 0; i < fits.size(); ++i)
    for (std::size_t j : even_indices(fits[i].yield_draws.size(), count[i])) out.push_back(fits[i].yield_draws[j]);
  return out;
}

CiResult ci_fuse(const std::vector<SingleModalityFit>& fits) {
  if (fits.empty()) throw std::invalid_argument("ci_fuse needs fits");
  std::vector<double> mu, var;
  for (const SingleModalityFit& f : fits) {
    if (f.yield_draws.size() < 2) throw std::invalid_argument("ci_fuse: fit without draws");
    const auto [lo, hi] = std::minmax_element(f.yield_draws.begin(), f.yield_draws.end());
    if (*lo == *hi) throw std::invalid_argument("ci_fuse: zero-variance marginal");
    mu.push_back(mean_of(f.yield_draws));
    var.push_back(variance_of(f.yield_draws));
    if (!(var.back() > 0.0)) throw std::invalid_argument("ci_fuse: zero-variance marginal");
  }
  CiResult r;
  std::vector<double> omega(fits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) s += (omega[i] = 1.0 / var[i]);
  double lambda = 0.0, num = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    omega[i] /= s;
    if (omega[i] == 0.0) continue;
    lambda += omega[i] / var[i];
    num += omega[i] * mu[i] / var[i];
    r.omega[static_cast<int>(fits[i].modality)] = omega[i];
  }
  r.var = 1.0 / lambda;
  r.mean = num / lambda;
  return r;
}

// ---- ablation ----

int corrupted_modality(ScenarioPreset p) {
  switch (p) {
    case ScenarioPreset::SarHeavyTail:
    case ScenarioPreset::SarBiased:
      return static_cast<int>(Modality::Sar);
    case ScenarioPreset::VlmNoisy:
      return static_cast<int>(Modality::Vlm);
    default:
      return -1;
  }
}

namespace {

std::vector<ReplicateRecord> run_replicate(const ScenarioConfig& scenario, const std::vector<FusionMethod>& methods,
                                           const AblationConfig& cfg, int rep) {
  ScenarioConfig sc = scenario;
  const std::uint64_t rep_seed = chain_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  sc.seed = rep_seed;
  const Dataset data = generate(sc);
  const double y_true = sc.y_true_kt;

  bool need_single = false;
  for (const FusionMethod& m : methods)
    need_single = need_single || m.kind == FusionKind::FixedGamma || !m.is_joint();
  std::vector<SingleModalityFit> singles;
  bool singles_failed = false;
  if (need_single) {
    for (Modality m : kAllModalities) {
      FitConfig fc = cfg.fit;
      fc.nuts.seed = chain_seed(rep_seed, 1000 + static_cast<int>(m));
      singles.push_back(fit_single_modality(data, m, fc));
      singles_failed = singles_failed || singles.back().diagnostic_failure;
    }
  }

  std::vector<ReplicateRecord> recs;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const FusionMethod& method = methods[mi];
    ReplicateRecord rec;
    rec.replicate = rep;
    rec.gamma_mean.fill(kNaN);
    std::vector<double> y;
    double lo = 0.0, hi = 0.0;
    NutsConfig nuts = cfg.fit.nuts;
    nuts.seed = chain_seed(rep_seed, 100 + mi);
    if (method.is_joint()) {
      FusionMethod fm = method;
      if (fm.kind == FusionKind::FixedGamma) fm = FusionMethod::fixed(fixed_gamma_weights(singles));
      const NutsResult r = fit(data, fm, cfg.fit, nuts);
      rec.excluded = r.diagnostic_failure;
      y = yield_draws(r);
      if (fm.kind == FusionKind::DirichletGamma)
        for (Modality m : kAllModalities) rec.gamma_mean[static_cast<int>(m)] = gamma_column_mean(r, m);
      std::tie(lo, hi) = hdi(y, cfg.hdi_mass);
      rec.median = median_of(y);
    } else if (method.kind == FusionKind::BMA) {
      rec.excluded = singles_failed;
      const std::size_t n_total = static_cast<std::size_t>(nuts.n_chains) * (nuts.n_iter - nuts.n_warmup);
      y = bma_fuse(singles, n_total);
      std::tie(lo, hi) = hdi(y, cfg.hdi_mass);
      rec.median = median_of(y);
    } else {
      rec.excluded = singles_failed;
      const CiResult ci = ci_fuse(singles);
      const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * cfg.hdi_mass);
      lo = ci.mean - z * std::sqrt(ci.var);
      hi = ci.mean + z * std::sqrt(ci.var);
      rec.median = ci.mean;
    }
    rec.covered = lo <= y_true && y_true <= hi;
    rec.width = hi - lo;
    rec.abs_error = std::abs(rec.median - y_true);
    recs.push_back(rec);
  }
  return recs;
}

double median_or_nan(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  return v.empty() ? kNaN : median_of(v);
}

}  // namespace

std::vector<AblationRow> run_ablation(const ScenarioConfig& scenario, const std::string& scenario_name, int corrupted,
                                      const std::vector<FusionMethod>& methods, const AblationConfig& cfg) {
  if (cfg.n_replicates < 2) throw std::invalid_argument("run_ablation needs at least two replicates");
  if (methods.empty()) throw std::invalid_argument("run_ablation needs methods");
  scenario.validate();
  cfg.fit.nuts.validate();

  std::vector<std::vector<ReplicateRecord>> per_rep(cfg.n_replicates);
  std::vector<std::exception_ptr> errors(cfg.n_replicates);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int rep; (rep = next.fetch_add(1)) < cfg.n_replicates;) {
      try {
        per_rep[rep] = run_replicate(scenario, methods, cfg, rep);
      } catch (...) {
        errors[rep] = std::current_exception();
      }
    }
  };
  const int n_workers = std::clamp(cfg.threads, 1, cfg.n_replicates);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<AblationRow> rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    AblationRow row;
    row.scenario = scenario_name;
    row.method = methods[mi].name();
    std::vector<double> widths, errs;
    std::array<std::vector<double>, 4> gammas;
    double covered = 0.0;
    for (int rep = 0; rep < cfg.n_replicates; ++rep) {
      const ReplicateRecord& rec = per_rep[rep][mi];
      row.replicates.push_back(rec);
      if (rec.excluded) {
        ++row.n_excluded;
        continue;
      }
      ++row.n_used;
      covered += rec.covered ? 1.0 : 0.0;
      widths.push_back(rec.width);
      errs.push_back(rec.abs_error);
      for (int k = 0; k < 4; ++k) gammas[k].push_back(rec.gamma_mean[k]);
    }
    if (row.n_used > 0) {
      row.coverage = covered / row.n_used;
      row.median_width = median_of(widths);
      row.median_rmse = median_of(errs);
    } else {
      row.coverage = row.median_width = row.median_rmse = kNaN;
    }
    for (int k = 0; k < 4; ++k) row.median_gamma[k] = median_or_nan(gammas[k]);
    row.median_gamma_corrupted = corrupted >= 0 ? row.median_gamma[corrupted] : kNaN;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_ablation(ScenarioPreset scenario, const std::vector<FusionMethod>& methods,
                                      const AblationConfig& cfg) {
  return run_ablation(preset(scenario), preset_name(scenario), corrupted_modality(scenario), methods, cfg);
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "scenario,method,coverage,median_width_kt,median_rmse_kt,median_gamma_corrupted,"
        "median_gamma_seismic,median_gamma_crater,median_gamma_sar,median_gamma_vlm,n_used,n_excluded\n";
  for (const AblationRow& r : rows) {
    os << r.scenario << ',' << r.method << ',' << r.coverage << ',' << r.median_width << ',' << r.median_rmse << ','
       << r.median_gamma_corrupted;
    for (double g : r.median_gamma) os << ',' << g;
    os << ',' << r.n_used << ',' << r.n_excluded << '\n';
  }
  return os.str();
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const AblationRow& row) {
  nlohmann::json g = nlohmann::json::object();
  for (Modality m : kAllModalities) g[modality_name(m)] = num(row.median_gamma[static_cast<int>(m)]);
  nlohmann::json reps = nlohmann::json::array();
  for (const ReplicateRecord& r : row.replicates)
    reps.push_back({{"replicate", r.replicate},
                    {"excluded", r.excluded},
                    {"covered", r.covered},
                    {"width_kt", r.width},
                    {"median_kt", r.median},
                    {"abs_error_kt", r.abs_error}});
  return {{"scenario", row.scenario},
          {"method", row.method},
          {"coverage", num(row.coverage)},
          {"median_width_kt", num(row.median_width)},
          {"median_rmse_kt", num(row.median_rmse)},
          {"median_gamma_corrupted", num(row.median_gamma_corrupted)},
          {"median_gamma", g},
          {"n_used", row.n_used},
          {"n_excluded", row.n_excluded},
          {"replicates", reps}};
}

// ---- Dirichlet concentration sweep ----

double AlphaRow::dispersion() const {
  const auto [mn, mx] = std::minmax_element(gamma_mean.begin(), gamma_mean.end());
  return *mx - *mn;
}

double AlphaSweepResult::relative_range() const {
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (const AlphaRow& r : rows) {
    mn = std::min(mn, r.median_yield);
    mx = std::max(mx, r.median_yield);
  }
  return (mx - mn) / mn;
}

bool AlphaSweepResult::dispersion_monotone() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].dispersion() > rows[i - 1].dispersion()) return false;
  return true;
}

bool AlphaSweepResult::ranking_stable() const {
  auto order = [](const std::vector<double>& g) {
    std::vector<int> idx(g.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return g[a] > g[b]; });
    return idx;
  };
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (order(rows[i].gamma_mean) != order(rows[0].gamma_mean)) return false;
  return true;
}

AlphaSweepResult alpha_sweep(const Dataset& data, const std::vector<double>& alphas, const FitConfig& cfg) {
  if (alphas.empty()) throw std::invalid_argument("alpha_sweep needs alphas");
  for (double a : alphas)
    if (!(a > 0.0)) throw std::invalid_argument("alphas must be positive");
  std::vector<double> sorted = alphas;
  std::sort(sorted.begin(), sorted.end());

  AlphaSweepResult out;
  for (Modality m : kAllModalities)
    if (data.has(m)) out.modalities.push_back(m);

  FitConfig base = cfg;
  base.prior.dirichlet_alpha = 1.0;
  NutsConfig base_nuts = cfg.nuts;
  base_nuts.seed = chain_seed(cfg.nuts.seed, 7919);
  const std::vector<double> y_base = log_yield_draws(fit(data, FusionMethod::dirichlet(), base, base_nuts));

  for (double a : sorted) {
    FitConfig fc = cfg;
    fc.prior.dirichlet_alpha = a;
    const NutsResult r = fit(data, FusionMethod::dirichlet(), fc, fc.nuts);
    const std::vector<double> y = yield_draws(r);
    AlphaRow row;
    row.alpha = a;
    row.median_yield = median_of(y);
    std::tie(row.hdi_lo, row.hdi_hi) = hdi(y, 0.95);
    if (out.modalities.size() > 1)
      for (Modality m : out.modalities) row.gamma_mean.push_back(gamma_column_mean(r, m));
    else
      row.gamma_mean.push_back(1.0);
    std::vector<double> ly = y;
    for (double& v : ly) v = std::log(v);
    row.kl_vs_baseline = kl_divergence_kde(ly, y_base);
    out.rows.push_back(row);
  }
  return out;
}

nlohmann::json to_json(const AlphaSweepResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AlphaRow& row : r.rows) {
    nlohmann::json g = nlohmann::json::object();
    for (std::size_t i = 0; i < r.modalities.size(); ++i) g[modality_name(r.modalities[i])] = row.gamma_mean[i];
    rows.push_back({{"alpha", row.alpha},
                    {"median_yield_kt", row.median_yield},
                    {"hdi_95", {row.hdi_lo, row.hdi_hi}},
                    {"gamma_mean", g},
                    {"gamma_dispersion", row.dispersion()},
                    {"kl_vs_alpha1", row.kl_vs_baseline}});
  }
  return {{"rows", rows},
          {"relative_range_median_yield", r.relative_range()},
          {"dispersion_monotone", r.dispersion_monotone()},
          {"ranking_stable", r.ranking_stable()}};
}

nlohmann::json to_json(const LooKlResult& r) {
  nlohmann::json kl = nlohmann::json::object(), g = nlohmann::json::object();
  for (std::size_t i = 0; i < r.modalities.size(); ++i) {
    kl[modality_name(r.modalities[i])] = r.kl[i];
    g[modality_name(r.modalities[i])] = r.gamma_mean[i];
  }
  return {{"kl_nats", kl}, {"gamma_mean", g}, {"spearman", num(r.spearman)}};
}

nlohmann::json to_json(const PpcResult& r, bool with_replicates) {
  nlohmann::json j = {{"modality", modality_name(r.modality)},
                      {"discrepancy", r.discrepancy},
                      {"S", r.t_obs.size()},
                      {"p_bayes", r.p_bayes},
                      {"mid_p", r.mid_p},
                      {"se", r.se}};
  if (with_replicates) {
    j["t_obs"] = r.t_obs;
    j["t_rep"] = r.t_rep;
  }
  return j;
}

}  // namespace yf
