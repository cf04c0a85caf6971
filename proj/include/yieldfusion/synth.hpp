#pragma once

// Synthetic four-modality datasets for the stress scenarios.

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "yieldfusion/dataset.hpp"
#include "yieldfusion/physics.hpp"

namespace yf {

enum class ScenarioPreset { BaseClean, SarHeavyTail, SarBiased, VlmNoisy, Dependence06 };

struct ScenarioConfig {
  double y_true_kt = 0.30;
  int n_sar = 120;
  double nu_gen = 8.0;
  double delta_bias_dex = 0.0;
  double sigma_sar_gen = 40.0;
  int n_vlm = 160;
  double eta_mislabel = 0.0;
  double rho = 0.0;
  // Affine generator links: mw = a log10 Y + b, log10 D = c log10 Y + d.
  // Defaults reproduce the inference links exactly.
  double seismic_a = std::numbers::ln10 / MagnitudeLink{}.beta;
  double seismic_b = -MagnitudeLink{}.alpha / MagnitudeLink{}.beta;
  double sigma_m_gen = 0.10;
  double crater_c = 1.0 / 3.0;
  double crater_d = 2.0;
  double sigma_c_gen = 0.05;
  double r_min = 300.0;
  double r_max = 6000.0;
  double p50_gen = 60.0;
  double k_gen = 2.0;
  double sdex_gen = 0.15;
  std::uint64_t seed = 1;

  // Switches to the alternative constants (a, b) = (3.0, -1.2), (c, d) = (1.0, 1.2).
  void use_table_links();
  void validate() const;
  void apply_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ScenarioConfig preset(ScenarioPreset p);
ScenarioPreset parse_preset(const std::string& name);
const char* preset_name(ScenarioPreset p);
inline constexpr ScenarioPreset kAllPresets[] = {ScenarioPreset::BaseClean, ScenarioPreset::SarHeavyTail,
                                                 ScenarioPreset::SarBiased, ScenarioPreset::VlmNoisy,
                                                 ScenarioPreset::Dependence06};

// Standardized residual innovations drawn for one dataset, before scaling.
struct Innovations {
  double seismic = 0.0;
  double crater = 0.0;
  std::vector<double> sar;
};

// Draws a dataset. The result is not passed through load-time validation so
// that out-of-plausibility magnitudes from unusual links are representable.
Dataset generate(const ScenarioConfig& cfg, Innovations* innovations = nullptr);

}  // namespace yf
