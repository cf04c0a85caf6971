#pragma once

// Posterior predictive checks, leave-one-modality-out KL, post-hoc fusers,
// the fusion ablation harness and the Dirichlet concentration sweep.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "yieldfusion/nuts.hpp"
#include "yieldfusion/posterior.hpp"
#include "yieldfusion/synth.hpp"

namespace yf {

struct FitConfig {
  NutsConfig nuts;
  PriorConfig prior;
  MagnitudeLink link;
};

// ---- posterior predictive checks ----

struct PpcResult {
  Modality modality = Modality::Seismic;
  std::string discrepancy;
  std::vector<double> t_obs;  // realized discrepancy per posterior draw
  std::vector<double> t_rep;  // replicated discrepancy per posterior draw
  double p_bayes = 0.0;       // mean 1{T_rep >= T_obs}
  double mid_p = 0.0;         // ties counted half
  double se = 0.0;            // sqrt(mid_p (1 - mid_p) / S)
};

const char* discrepancy_name(Modality m);
// Fills p_bayes, mid_p and se from t_obs and t_rep.
void ppc_pvalues(PpcResult& r);
// Uses S draws spread evenly over the pooled post-warmup draws.
PpcResult ppc(const NutsResult& fit, const JointDensity& density, Modality m, int s = 1000,
              std::uint64_t seed = 1);

// ---- KL and leave-one-out ----

struct LooKlResult {
  std::vector<Modality> modalities;
  std::vector<double> kl;          // KL(p_full || p_-k) in nats
  std::vector<double> gamma_mean;  // posterior-mean trust weight in the full fit
  double spearman = 0.0;
};

LooKlResult loo_kl(const Dataset& data, const FitConfig& cfg);
// Spearman step only, for precomputed vectors.
LooKlResult loo_kl_from(std::vector<Modality> mods, std::vector<double> kl, std::vector<double> gamma_mean);

// ---- single-modality fits and post-hoc fusers ----

struct SingleModalityFit {
  Modality modality = Modality::Seismic;
  std::vector<double> yield_draws;
  double lppd = 0.0;     // sum over observations
  double p_waic = 0.0;   // sum of pointwise posterior variances
  double elpd_mean = 0.0;  // per-observation mean of lppd_i - var_i
  bool diagnostic_failure = false;
  double elpd() const { return lppd - p_waic; }
  double waic() const { return -2.0 * elpd(); }
};

// Pointwise WAIC terms from an S x n matrix of log-likelihood values.
struct WaicTerms {
  std::vector<double> lppd;
  std::vector<double> var;
};
WaicTerms waic_terms(const std::vector<std::vector<double>>& loglik_by_draw);

SingleModalityFit fit_single_modality(const Dataset& data, Modality m, const FitConfig& cfg);
std::vector<SingleModalityFit> fit_all_single(const Dataset& data, const FitConfig& cfg);

// Softmax of the four per-observation mean ELPDs.
std::array<double, 4> softmax_weights(const std::array<double, 4>& elpd_mean);
std::array<double, 4> fixed_gamma_weights(const std::vector<SingleModalityFit>& fits);
std::array<double, 4> fixed_gamma_weights(const Dataset& data, const FitConfig& cfg);

// Evidence-weighted pooling of single-modality yield draws.
std::vector<double> bma_fuse(const std::vector<SingleModalityFit>& fits, std::size_t n_total);

struct CiResult {
  double mean = 0.0;
  double var = 0.0;
  std::array<double, 4> omega{};
};
CiResult ci_fuse(const std::vector<SingleModalityFit>& fits);

// ---- ablation ----

struct ReplicateRecord {
  int replicate = 0;
  bool excluded = false;
  bool covered = false;
  double width = 0.0;
  double abs_error = 0.0;
  double median = 0.0;
  std::array<double, 4> gamma_mean{};  // DirichletGamma only, NaN otherwise
};

struct AblationRow {
  std::string scenario;
  std::string method;
  double coverage = 0.0;
  double median_width = 0.0;
  double median_rmse = 0.0;
  double median_gamma_corrupted = 0.0;  // NaN when undefined
  std::array<double, 4> median_gamma{};
  int n_used = 0;
  int n_excluded = 0;
  std::vector<ReplicateRecord> replicates;
};

// Modality corrupted by a preset, or -1 for none.
int corrupted_modality(ScenarioPreset p);

struct AblationConfig {
  FitConfig fit;
  int n_replicates = 20;
  std::uint64_t seed = 1;
  int threads = 1;  // replicate-level workers
  double hdi_mass = 0.95;
};

std::vector<AblationRow> run_ablation(ScenarioPreset scenario, const std::vector<FusionMethod>& methods,
                                      const AblationConfig& cfg);
// Same harness with an explicit generator configuration (seed overwritten per replicate).
std::vector<AblationRow> run_ablation(const ScenarioConfig& scenario, const std::string& scenario_name,
                                      int corrupted, const std::vector<FusionMethod>& methods,
                                      const AblationConfig& cfg);
std::string ablation_csv(const std::vector<AblationRow>& rows);
nlohmann::json to_json(const AblationRow& row);

// ---- Dirichlet concentration sweep ----

struct AlphaRow {
  double alpha = 0.0;
  double median_yield = 0.0;
  double hdi_lo = 0.0;
  double hdi_hi = 0.0;
  std::vector<double> gamma_mean;  // over present modalities
  double kl_vs_baseline = 0.0;
  double dispersion() const;       // max - min of gamma_mean
};

struct AlphaSweepResult {
  std::vector<Modality> modalities;
  std::vector<AlphaRow> rows;
  double relative_range() const;   // (max - min) / min of the median yields
  bool dispersion_monotone() const;
  bool ranking_stable() const;
};

AlphaSweepResult alpha_sweep(const Dataset& data, const std::vector<double>& alphas, const FitConfig& cfg);
nlohmann::json to_json(const AlphaSweepResult& r);
nlohmann::json to_json(const LooKlResult& r);
nlohmann::json to_json(const PpcResult& r, bool with_replicates = false);

}  // namespace yf
