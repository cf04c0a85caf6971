#include "yieldfusion/synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "yieldfusion/likelihoods.hpp"

namespace yf {

void ScenarioConfig::use_table_links() {
  seismic_a = 3.0;
  seismic_b = -1.2;
  crater_c = 1.0;
  crater_d = 1.2;
}

void ScenarioConfig::validate() const {
  if (!(y_true_kt > 0.0)) throw std::invalid_argument("y_true_kt must be positive");
  if (n_sar < 1 || n_vlm < 1) throw std::invalid_argument("n_sar and n_vlm must be positive");
  if (!(nu_gen > 2.0)) throw std::invalid_argument("nu_gen must exceed 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0, 1)");
  if (!(eta_mislabel >= 0.0 && eta_mislabel <= 1.0)) throw std::invalid_argument("eta_mislabel must be in [0, 1]");
  if (!(sigma_m_gen >= 0.0 && sigma_c_gen >= 0.0 && sigma_sar_gen >= 0.0))
    throw std::invalid_argument("generator noise scales must be nonnegative");
  if (!(sdex_gen > 0.0)) throw std::invalid_argument("sdex_gen must be positive");
  if (!(r_min > 0.0 && r_max > r_min)) throw std::invalid_argument("need 0 < r_min < r_max");
  if (!(p50_gen > 0.0)) throw std::invalid_argument("p50_gen must be positive");
}

void ScenarioConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "y_true_kt") y_true_kt = v.get<double>();
    else if (key == "n_sar") n_sar = v.get<int>();
    else if (key == "nu_gen") nu_gen = v.get<double>();
    else if (key == "delta_bias_dex") delta_bias_dex = v.get<double>();
    else if (key == "sigma_sar_gen") sigma_sar_gen = v.get<double>();
    else if (key == "n_vlm") n_vlm = v.get<int>();
    else if (key == "eta_mislabel") eta_mislabel = v.get<double>();
    else if (key == "rho") rho = v.get<double>();
    else if (key == "seismic_a") seismic_a = v.get<double>();
    else if (key == "seismic_b") seismic_b = v.get<double>();
    else if (key == "sigma_m_gen") sigma_m_gen = v.get<double>();
    else if (key == "crater_c") crater_c = v.get<double>();
    else if (key == "crater_d") crater_d = v.get<double>();
    else if (key == "sigma_c_gen") sigma_c_gen = v.get<double>();
    else if (key == "r_min") r_min = v.get<double>();
    else if (key == "r_max") r_max = v.get<double>();
    else if (key == "p50_gen") p50_gen = v.get<double>();
    else if (key == "k_gen") k_gen = v.get<double>();
    else if (key == "sdex_gen") sdex_gen = v.get<double>();
    else if (key == "seed") seed = v.get<std::uint64_t>();
    else if (key == "links") {
      const std::string s = v.get<std::string>();
      if (s == "table")
        use_table_links();
      else if (s != "inference")
        throw std::invalid_argument("links must be 'inference' or 'table'");
    } else
      throw std::invalid_argument("unknown scenario key '" + key + "'");
  }
}

nlohmann::json ScenarioConfig::to_json() const {
  return {{"y_true_kt", y_true_kt},     {"n_sar", n_sar},
          {"nu_gen", nu_gen},           {"delta_bias_dex", delta_bias_dex},
          {"sigma_sar_gen", sigma_sar_gen}, {"n_vlm", n_vlm},
          {"eta_mislabel", eta_mislabel}, {"rho", rho},
          {"seismic_a", seismic_a},     {"seismic_b", seismic_b},
          {"sigma_m_gen", sigma_m_gen}, {"crater_c", crater_c},
          {"crater_d", crater_d},       {"sigma_c_gen", sigma_c_gen},
          {"r_min", r_min},             {"r_max", r_max},
          {"p50_gen", p50_gen},         {"k_gen", k_gen},
          {"sdex_gen", sdex_gen},       {"seed", seed}};
}

ScenarioConfig preset(ScenarioPreset p) {
  ScenarioConfig c;
  switch (p) {
    case ScenarioPreset::BaseClean:
      break;
    case ScenarioPreset::SarHeavyTail:
      c.nu_gen = 2.5;
      break;
    case ScenarioPreset::SarBiased:
      c.delta_bias_dex = 0.35;
      break;
    case ScenarioPreset::VlmNoisy:
      c.eta_mislabel = 0.10;
      break;
    case ScenarioPreset::Dependence06:
      c.rho = 0.6;
      break;
  }
  return c;
}

const char* preset_name(ScenarioPreset p) {
  switch (p) {
    case ScenarioPreset::BaseClean:
      return "base_clean";
    case ScenarioPreset::SarHeavyTail:
      return "sar_heavy_tail";
    case ScenarioPreset::SarBiased:
      return "sar_biased";
    case ScenarioPreset::VlmNoisy:
      return "vlm_noisy";
    case ScenarioPreset::Dependence06:
      return "dependence_06";
  }
  return "unknown";
}

ScenarioPreset parse_preset(const std::string& name) {
  for (ScenarioPreset p : kAllPresets)
    if (name == preset_name(p)) return p;
  throw std::invalid_argument("unknown preset '" + name +
                              "' (expected base_clean, sar_heavy_tail, sar_biased, vlm_noisy, dependence_06)");
}

namespace {

double draw_range(std::mt19937_64& rng, const ScenarioConfig& cfg) {
  std::uniform_real_distribution<double> u(std::log(cfg.r_min), std::log(cfg.r_max));
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double r = std::exp(u(rng));
    if (kb_regime(scaled_distance_en(r, cfg.y_true_kt)) >= 0) return r;
  }
  throw std::runtime_error("could not draw a range inside the KB fit range after 100 attempts");
}

}  // namespace

Dataset generate(const ScenarioConfig& cfg, Innovations* innovations) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::student_t_distribution<double> student(cfg.nu_gen);

  // Shared shock loaded so that the pairwise correlation of the seismic,
  // crater and SAR innovations equals rho.
  const double z_shared = normal(rng);
  const double load = std::sqrt(cfg.rho);
  const double own = std::sqrt(1.0 - cfg.rho);
  const double t_sd = std::sqrt(cfg.nu_gen / (cfg.nu_gen - 2.0));

  Innovations inn;
  inn.seismic = own * normal(rng) + load * z_shared;
  inn.crater = own * normal(rng) + load * z_shared;

  Dataset ds;
  const double log10_y = std::log10(cfg.y_true_kt);
  ds.seismic = SeismicObs{cfg.seismic_a * log10_y + cfg.seismic_b + cfg.sigma_m_gen * inn.seismic};
  const double d = std::pow(10.0, cfg.crater_c * log10_y + cfg.crater_d + cfg.sigma_c_gen * inn.crater);
  ds.crater = CraterObs{d, d};

  const double scale = cfg.sigma_sar_gen / 100.0;
  ds.sar.reserve(cfg.n_sar);
  inn.sar.reserve(cfg.n_sar);
  for (int i = 0; i < cfg.n_sar; ++i) {
    const double r = draw_range(rng, cfg);
    const double p_kpa = psi_to_kpa(kb_incident_overpressure(r, cfg.y_true_kt));
    const double z_mu = cfg.k_gen * (std::log10(p_kpa) + cfg.delta_bias_dex - std::log10(cfg.p50_gen));
    const double e = own * student(rng) + load * t_sd * z_shared;
    inn.sar.push_back(e);
    const double z = z_mu + scale * e;
    ds.sar.push_back({r, 100.0 / (1.0 + std::exp(-z))});
  }

  ds.vlm.reserve(cfg.n_vlm);
  for (int i = 0; i < cfg.n_vlm; ++i) {
    VlmRecord rec;
    rec.range_m = draw_range(rng, cfg);
    const auto pi = vlm_bin_probs(kb_incident_overpressure(rec.range_m, cfg.y_true_kt), cfg.sdex_gen);
    for (int k = 0; k < 9; ++k) rec.pmf[k] = (1.0 - cfg.eta_mislabel) * pi[k] + cfg.eta_mislabel / 9.0;
    ds.vlm.push_back(rec);
  }

  ds.meta = {{"generator", cfg.to_json()}};
  if (innovations != nullptr) *innovations = std::move(inn);
  return ds;
}

}  // namespace yf
