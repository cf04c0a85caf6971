#include "doctest.h"

#include <cmath>
#include <numbers>

#include "yieldfusion/stats.hpp"
#include "yieldfusion/likelihoods.hpp"
#include "yieldfusion/synth.hpp"

using namespace yf;

TEST_CASE("presets expand to their scenario rows") {
  const ScenarioConfig base = preset(ScenarioPreset::BaseClean);
  CHECK(base.y_true_kt == 0.30);
  CHECK(base.n_sar == 120);
  CHECK(base.n_vlm == 160);
  CHECK(base.nu_gen == 8.0);
  CHECK(base.delta_bias_dex == 0.0);
  CHECK(base.sigma_sar_gen == 40.0);
  CHECK(base.eta_mislabel == 0.0);
  CHECK(base.rho == 0.0);
  CHECK(base.sigma_m_gen == 0.10);
  CHECK(base.sigma_c_gen == 0.05);
  CHECK(base.r_min == 300.0);
  CHECK(base.r_max == 6000.0);
  CHECK(base.p50_gen == 60.0);
  CHECK(base.k_gen == 2.0);
  CHECK(base.sdex_gen == 0.15);
  CHECK(preset(ScenarioPreset::SarHeavyTail).nu_gen == 2.5);
  CHECK(preset(ScenarioPreset::SarBiased).delta_bias_dex == 0.35);
  CHECK(preset(ScenarioPreset::VlmNoisy).eta_mislabel == 0.10);
  CHECK(preset(ScenarioPreset::Dependence06).rho == 0.6);
  for (ScenarioPreset p : kAllPresets) CHECK(parse_preset(preset_name(p)) == p);
  CHECK_THROWS(parse_preset("clean"));
}

TEST_CASE("config validation") {
  ScenarioConfig c;
  c.rho = 1.0;
  CHECK_THROWS(c.validate());
  c = ScenarioConfig{};
  c.nu_gen = 2.0;
  CHECK_THROWS(c.validate());
  c = ScenarioConfig{};
  c.n_sar = 0;
  CHECK_THROWS(c.validate());
  c = ScenarioConfig{};
  CHECK_THROWS(c.apply_json({{"rhoo", 0.1}}));
  c.apply_json({{"rho", 0.3}, {"links", "table"}});
  CHECK(c.rho == 0.3);
  CHECK(c.seismic_a == 3.0);
}

TEST_CASE("default links coincide with the inference links") {
  ScenarioConfig c = preset(ScenarioPreset::BaseClean);
  c.sigma_m_gen = 0.0;
  c.sigma_c_gen = 0.0;
  const Dataset ds = generate(c);
  CHECK(ds.seismic->mw_obs == doctest::Approx(magnitude_from_yield(0.30)).epsilon(1e-12));
  CHECK(std::log10(ds.crater->width_m) == doctest::Approx(crater_mu_log10(0.30)).epsilon(1e-12));
}

TEST_CASE("noise-free generator with the alternative constants") {
  ScenarioConfig c;
  c.use_table_links();
  c.sigma_m_gen = 0.0;
  c.sigma_c_gen = 0.0;
  c.sigma_sar_gen = 0.0;
  c.eta_mislabel = 0.0;
  c.sdex_gen = 0.01;
  const Dataset ds = generate(c);
  CHECK(ds.seismic->mw_obs == doctest::Approx(3.0 * std::log10(0.30) - 1.2).epsilon(1e-12));
  CHECK(ds.seismic->mw_obs == doctest::Approx(-2.7686).epsilon(1e-4));
  CHECK(std::log10(ds.crater->width_m) == doctest::Approx(0.6771).epsilon(1e-4));
  CHECK(ds.crater->width_m == ds.crater->length_m);
  CHECK(ds.crater->width_m == doctest::Approx(4.75).epsilon(1e-3));
  for (const SarBox& b : ds.sar)
    CHECK(b.damage_pct == doctest::Approx(sar_vulnerability_mu(b.range_m, 0.30, 60.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("counts, ranges and determinism") {
  const ScenarioConfig c = preset(ScenarioPreset::BaseClean);
  const Dataset a = generate(c);
  const Dataset b = generate(c);
  CHECK(a.n_sar() == 120);
  CHECK(a.n_vlm() == 160);
  CHECK(dataset_to_json(a) == dataset_to_json(b));
  for (const SarBox& s : a.sar) {
    CHECK(s.range_m >= 300.0);
    CHECK(s.range_m <= 6000.0);
  }
  ScenarioConfig c2 = c;
  c2.seed = 2;
  CHECK(dataset_to_json(generate(c2)) != dataset_to_json(a));
}

TEST_CASE("mislabel mixing stays on the simplex") {
  for (double eta : {0.0, 0.1, 0.5, 1.0}) {
    ScenarioConfig c;
    c.eta_mislabel = eta;
    const Dataset ds = generate(c);
    for (const VlmRecord& r : ds.vlm) {
      double s = 0.0;
      for (double q : r.pmf) {
        CHECK(q >= 0.0);
        s += q;
        if (eta == 1.0) CHECK(q == 1.0 / 9.0);
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("shared shock correlation") {
  ScenarioConfig c = preset(ScenarioPreset::Dependence06);
  c.n_sar = 1;
  c.n_vlm = 1;
  std::vector<double> s, k, r;
  for (int i = 0; i < 10000; ++i) {
    c.seed = 1000 + i;
    Innovations inn;
    generate(c, &inn);
    s.push_back(inn.seismic);
    k.push_back(inn.crater);
    r.push_back(inn.sar[0]);
  }
  auto corr = [](const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
    return sxy / (x.size() - 1) / std::sqrt(variance_of(x) * variance_of(y));
  };
  CHECK(std::abs(corr(s, k) - 0.6) < 0.05);
  CHECK(std::abs(corr(s, r) - 0.6) < 0.05);
  CHECK(std::abs(corr(k, r) - 0.6) < 0.05);
  // Marginal scale of the SAR innovation is that of the Student-t draw.
  CHECK(variance_of(r) == doctest::Approx(8.0 / 6.0).epsilon(0.08));
}

TEST_CASE("pressure bias raises generated damage") {
  ScenarioConfig base;
  base.n_sar = 1;
  base.n_vlm = 1;
  base.r_min = 1000.0;
  base.r_max = 1000.0 * (1 + 1e-12);
  ScenarioConfig biased = base;
  biased.delta_bias_dex = 0.35;
  double sum_b = 0.0, sum_u = 0.0;
  for (int i = 0; i < 1000; ++i) {
    base.seed = biased.seed = 50 + i;
    const double u = generate(base).sar[0].damage_pct;
    const double b = generate(biased).sar[0].damage_pct;
    CHECK(b > u);
    sum_b += b;
    sum_u += u;
  }
  CHECK(sum_b > sum_u);
}
