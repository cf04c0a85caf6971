#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace yf {

enum class Modality { Seismic = 0, Crater = 1, Sar = 2, Vlm = 3 };
inline constexpr int kNumModalities = 4;
inline constexpr std::array<Modality, 4> kAllModalities = {Modality::Seismic, Modality::Crater,
                                                           Modality::Sar, Modality::Vlm};

const char* modality_name(Modality m);
Modality parse_modality(const std::string& name);

struct SeismicObs {
  double mw_obs = 0.0;
};

struct CraterObs {
  double width_m = 0.0;
  double length_m = 0.0;
};

struct SarBox {
  double range_m = 0.0;
  double damage_pct = 0.0;
};

struct VlmRecord {
  double range_m = 0.0;
  std::array<double, 9> pmf{};
};

inline constexpr double kDamageClampLo = 0.5;
inline constexpr double kDamageClampHi = 99.5;

struct Dataset {
  std::optional<SeismicObs> seismic;
  std::optional<CraterObs> crater;
  std::vector<SarBox> sar;
  std::vector<VlmRecord> vlm;
  nlohmann::json meta = nlohmann::json::object();

  bool has(Modality m) const;
  int n_modalities() const;
  std::size_t n_sar() const { return sar.size(); }
  std::size_t n_vlm() const { return vlm.size(); }
  // Copy with one modality removed.
  Dataset without(Modality m) const;
  // Copy holding only one modality.
  Dataset only(Modality m) const;
};

// Schema or invariant violation in dataset input.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validates invariants and applies the two documented repairs (VLM PMF
// renormalization and SAR damage clamping). Throws SchemaError.
void validate_dataset(Dataset& ds);

Dataset dataset_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const Dataset& ds);

Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

// Seismic magnitude and crater axes of the August 2020 Beirut explosion.
Dataset beirut_summary_dataset();

}  // namespace yf
