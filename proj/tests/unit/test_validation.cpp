#include "doctest.h"

#include <cmath>
#include <random>

#include "yieldfusion/stats.hpp"
#include "yieldfusion/validation.hpp"

using namespace yf;

namespace {

FitConfig small_fit() {
  FitConfig f;
  f.nuts.n_chains = 2;
  f.nuts.n_iter = 600;
  f.nuts.n_warmup = 300;
  f.nuts.seed = 3;
  return f;
}

SingleModalityFit fake_fit(Modality m, double mu, double sd, double elpd, std::uint64_t seed, int n = 4000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(mu, sd);
  SingleModalityFit f;
  f.modality = m;
  for (int i = 0; i < n; ++i) f.yield_draws.push_back(nd(rng));
  f.lppd = elpd;
  f.p_waic = 0.0;
  return f;
}

}  // namespace

TEST_CASE("mid-p conventions") {
  PpcResult r;
  r.t_obs.assign(100, 1.0);
  r.t_rep.assign(100, 2.0);
  ppc_pvalues(r);
  CHECK(r.p_bayes == 1.0);
  CHECK(r.mid_p == 1.0);
  CHECK(r.se == 0.0);
  r.t_rep.assign(100, 1.0);
  ppc_pvalues(r);
  CHECK(r.mid_p == 0.5);
  CHECK(r.p_bayes == 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < 100; ++i) {
    r.t_obs[i] = nd(rng);
    r.t_rep[i] = nd(rng);
  }
  ppc_pvalues(r);
  CHECK(std::abs(r.p_bayes - r.mid_p) <= 1.0 / 200.0);
  CHECK(r.se == doctest::Approx(std::sqrt(r.mid_p * (1 - r.mid_p) / 100.0)));
  r.t_rep.pop_back();
  CHECK_THROWS(ppc_pvalues(r));
}

TEST_CASE("posterior predictive checks on a well-specified fit") {
  const Dataset ds = generate(preset(ScenarioPreset::BaseClean));
  const FitConfig fc = small_fit();
  const JointDensity d(ds, FusionMethod::dirichlet(), fc.prior, fc.link);
  const NutsResult fit = run_nuts(d, fc.nuts);
  for (Modality m : kAllModalities) {
    const PpcResult r = ppc(fit, d, m, 400, 11);
    CHECK(r.t_obs.size() == 400);
    CHECK(r.p_bayes >= 0.0);
    CHECK(r.p_bayes <= 1.0);
    CHECK(r.mid_p <= r.p_bayes);
    if (m == Modality::Seismic) {
      CHECK(r.p_bayes > 0.05);
      CHECK(r.p_bayes < 0.95);
    }
  }
  const JointDensity seis(ds.only(Modality::Seismic), FusionMethod::plain());
  const NutsResult f2 = run_nuts(seis, fc.nuts);
  CHECK_THROWS(ppc(f2, seis, Modality::Sar, 100));
}

TEST_CASE("kl estimator and spearman mechanism") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<double> p(10000), q(10000);
  for (double& v : p) v = nd(rng);
  for (double& v : q) v = nd(rng) + 1.0;
  CHECK(std::abs(kl_divergence_kde(p, q) - 0.5) < 0.05);
  CHECK(kl_divergence_kde(p, p) < 1e-3);
  CHECK(kl_divergence_kde(p, p) >= 0.0);
  const LooKlResult r = loo_kl_from(std::vector<Modality>(kAllModalities.begin(), kAllModalities.end()),
                                    {0.130, 0.087, 0.180, 0.342}, {0.278, 0.340, 0.219, 0.163});
  CHECK(r.spearman == doctest::Approx(-1.0));
  CHECK_THROWS(loo_kl_from({Modality::Seismic}, {0.1, 0.2}, {0.5}));
  CHECK_THROWS(loo_kl(beirut_summary_dataset().only(Modality::Crater), small_fit()));
}

TEST_CASE("leave-one-out on the two-modality summary data") {
  const LooKlResult r = loo_kl(beirut_summary_dataset(), small_fit());
  REQUIRE(r.kl.size() == 2);
  for (double k : r.kl) CHECK(k >= 0.0);
  CHECK(r.gamma_mean[0] + r.gamma_mean[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.spearman) == doctest::Approx(1.0));
}

TEST_CASE("softmax weights") {
  const auto w = softmax_weights({1.5, 1.5, 1.5, 1.5});
  for (double v : w) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  const auto w2 = softmax_weights({0.0, 0.0, 0.0, -1e3});
  CHECK(w2[3] < 1e-300);
  CHECK(w2[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 20.0);
  for (int i = 0; i < 100; ++i) {
    const auto w3 = softmax_weights({nd(rng), nd(rng), nd(rng), nd(rng)});
    CHECK(std::abs(w3[0] + w3[1] + w3[2] + w3[3] - 1.0) < 1e-12);
  }
}

TEST_CASE("waic terms") {
  const std::vector<std::vector<double>> constant(50, std::vector<double>{-1.0, -2.0});
  const WaicTerms w = waic_terms(constant);
  CHECK(w.lppd[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(w.lppd[1] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(w.var[0] == 0.0);
  const std::vector<std::vector<double>> two = {{0.0}, {std::log(3.0)}};
  const WaicTerms w2 = waic_terms(two);
  CHECK(w2.lppd[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(w2.var[0] == doctest::Approx(0.5 * std::log(3.0) * std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("single-modality fits feed the fixed weights") {
  const Dataset ds = generate(preset(ScenarioPreset::BaseClean));
  const std::vector<SingleModalityFit> fits = fit_all_single(ds, small_fit());
  REQUIRE(fits.size() == 4);
  for (const SingleModalityFit& f : fits) {
    CHECK(f.p_waic >= 0.0);
    CHECK(std::isfinite(f.elpd_mean));
    CHECK(f.yield_draws.size() == 600);
  }
  const auto w = fixed_gamma_weights(fits);
  CHECK(std::abs(w[0] + w[1] + w[2] + w[3] - 1.0) < 1e-12);
  CHECK_THROWS(fixed_gamma_weights(beirut_summary_dataset(), small_fit()));
}

TEST_CASE("evidence-weighted pooling") {
  std::vector<SingleModalityFit> fits;
  for (Modality m : kAllModalities) fits.push_back(fake_fit(m, 0.3 + 0.1 * static_cast<int>(m), 0.005, -10.0, 7));
  const auto pooled = bma_fuse(fits, 4000);
  CHECK(pooled.size() == 4000);
  for (int i = 0; i < 4; ++i) {
    const std::vector<double> part(pooled.begin() + 1000 * i, pooled.begin() + 1000 * (i + 1));
    CHECK(mean_of(part) == doctest::Approx(0.3 + 0.1 * i).epsilon(0.02));
  }
  fits[2].lppd = 40.0;
  const auto dom = bma_fuse(fits, 4001);
  CHECK(dom.size() == 4001);
  int from_sar = 0;
  for (double v : dom) from_sar += std::abs(v - 0.5) < 0.04;
  CHECK(from_sar == 4001);
  fits[1].lppd = -9.0;
  CHECK(bma_fuse(fits, 777).size() == 777);
}

TEST_CASE("covariance intersection") {
  std::vector<SingleModalityFit> fits;
  for (Modality m : kAllModalities) fits.push_back(fake_fit(m, 0.3, 0.1, 0.0, 1 + static_cast<int>(m), 200000));
  const CiResult r = ci_fuse(fits);
  CHECK(r.mean == doctest::Approx(0.3).epsilon(0.01));
  CHECK(r.var == doctest::Approx(0.01).epsilon(0.02));
  std::vector<SingleModalityFit> mixed;
  mixed.push_back(fake_fit(Modality::Seismic, 0.2, 0.05, 0.0, 3));
  mixed.push_back(fake_fit(Modality::Crater, 0.5, 0.1, 0.0, 4));
  mixed.push_back(fake_fit(Modality::Sar, 0.9, 1e6, 0.0, 5));
  const CiResult m = ci_fuse(mixed);
  CHECK(m.mean > 0.2);
  CHECK(m.mean < 0.5);
  CHECK(m.omega[2] < 1e-12);
  SingleModalityFit flat;
  flat.yield_draws.assign(10, 0.3);
  CHECK_THROWS(ci_fuse({flat}));
}

TEST_CASE("ablation harness is reproducible") {
  AblationConfig cfg;
  cfg.fit = small_fit();
  cfg.fit.nuts.n_iter = 400;
  cfg.fit.nuts.n_warmup = 200;
  cfg.n_replicates = 2;
  cfg.seed = 5;
  const std::vector<FusionMethod> methods = {FusionMethod::dirichlet(), FusionMethod::single(),
                                             FusionMethod::fixed({0.25, 0.25, 0.25, 0.25}), FusionMethod::bma(),
                                             FusionMethod::ci()};
  const auto a = run_ablation(ScenarioPreset::SarBiased, methods, cfg);
  cfg.threads = 2;
  const auto b = run_ablation(ScenarioPreset::SarBiased, methods, cfg);
  REQUIRE(a.size() == 5);
  CHECK(ablation_csv(a) == ablation_csv(b));
  for (const AblationRow& r : a) {
    CHECK(r.coverage >= 0.0);
    CHECK(r.coverage <= 1.0);
    CHECK(r.median_width > 0.0);
    CHECK(r.n_used + r.n_excluded == 2);
  }
  CHECK(std::isfinite(a[0].median_gamma_corrupted));
  CHECK(std::isnan(a[1].median_gamma_corrupted));
  CHECK(a[0].scenario == "sar_biased");
  CHECK_THROWS(run_ablation(ScenarioPreset::BaseClean, methods, AblationConfig{cfg.fit, 1}));
}

TEST_CASE("concentration sweep") {
  const Dataset ds = beirut_summary_dataset();
  FitConfig fc = small_fit();
  fc.nuts.n_chains = 4;
  fc.nuts.n_iter = 1500;
  fc.nuts.n_warmup = 500;
  const AlphaSweepResult r = alpha_sweep(ds, {5.0, 0.5, 1.0}, fc);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].alpha == 0.5);
  CHECK(r.rows[2].alpha == 5.0);
  CHECK(r.rows[1].kl_vs_baseline < 0.02);
  for (const AlphaRow& row : r.rows) {
    CHECK(row.gamma_mean.size() == 2);
    CHECK(row.hdi_lo < row.hdi_hi);
  }
  CHECK_THROWS(alpha_sweep(ds, {0.0}, small_fit()));
}
