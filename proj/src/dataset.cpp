#include "yieldfusion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace yf {

using nlohmann::json;

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Seismic:
      return "seismic";
    case Modality::Crater:
      return "crater";
    case Modality::Sar:
      return "sar";
    case Modality::Vlm:
      return "vlm";
  }
  return "unknown";
}

Modality parse_modality(const std::string& name) {
  for (Modality m : kAllModalities)
    if (name == modality_name(m)) return m;
  throw std::invalid_argument("unknown modality '" + name + "' (expected seismic, crater, sar, vlm)");
}

bool Dataset::has(Modality m) const {
  switch (m) {
    case Modality::Seismic:
      return seismic.has_value();
    case Modality::Crater:
      return crater.has_value();
    case Modality::Sar:
      return !sar.empty();
    case Modality::Vlm:
      return !vlm.empty();
  }
  return false;
}

int Dataset::n_modalities() const {
  int n = 0;
  for (Modality m : kAllModalities) n += has(m) ? 1 : 0;
  return n;
}

Dataset Dataset::without(Modality m) const {
  Dataset d = *this;
  switch (m) {
    case Modality::Seismic:
      d.seismic.reset();
      break;
    case Modality::Crater:
      d.crater.reset();
      break;
    case Modality::Sar:
      d.sar.clear();
      break;
    case Modality::Vlm:
      d.vlm.clear();
      break;
  }
  return d;
}

Dataset Dataset::only(Modality m) const {
  Dataset d;
  d.meta = meta;
  switch (m) {
    case Modality::Seismic:
      d.seismic = seismic;
      break;
    case Modality::Crater:
      d.crater = crater;
      break;
    case Modality::Sar:
      d.sar = sar;
      break;
    case Modality::Vlm:
      d.vlm = vlm;
      break;
  }
  return d;
}

namespace {

void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) throw SchemaError("field '" + field + "' must be a finite number");
}

}  // namespace

void validate_dataset(Dataset& ds) {
  if (ds.seismic) {
    const double mw = ds.seismic->mw_obs;
    require_finite(mw, "seismic.mw_obs");
    if (!(mw > 0.0 && mw < 10.0)) throw SchemaError("field 'seismic.mw_obs' outside (0, 10)");
  }
  if (ds.crater) {
    require_finite(ds.crater->width_m, "crater.width_m");
    require_finite(ds.crater->length_m, "crater.length_m");
    if (!(ds.crater->width_m > 0.0)) throw SchemaError("field 'crater.width_m' must be > 0");
    if (!(ds.crater->length_m > 0.0)) throw SchemaError("field 'crater.length_m' must be > 0");
    if (ds.crater->width_m > ds.crater->length_m)
      throw SchemaError("field 'crater.width_m' exceeds 'crater.length_m'");
  }
  for (std::size_t i = 0; i < ds.sar.size(); ++i) {
    SarBox& b = ds.sar[i];
    const std::string at = "sar[" + std::to_string(i) + "]";
    require_finite(b.range_m, at + ".range_m");
    require_finite(b.damage_pct, at + ".damage_pct");
    if (!(b.range_m > 0.0)) throw SchemaError("field '" + at + ".range_m' must be > 0");
    if (b.damage_pct < 0.0 || b.damage_pct > 100.0)
      throw SchemaError("field '" + at + ".damage_pct' outside [0, 100]");
    b.damage_pct = std::clamp(b.damage_pct, kDamageClampLo, kDamageClampHi);
  }
  for (std::size_t i = 0; i < ds.vlm.size(); ++i) {
    VlmRecord& r = ds.vlm[i];
    const std::string at = "vlm[" + std::to_string(i) + "]";
    require_finite(r.range_m, at + ".range_m");
    if (!(r.range_m > 0.0)) throw SchemaError("field '" + at + ".range_m' must be > 0");
    double s = 0.0;
    for (double q : r.pmf) {
      require_finite(q, at + ".pmf");
      if (q < 0.0) throw SchemaError("field '" + at + ".pmf' has a negative entry");
      s += q;
    }
    if (std::abs(s - 1.0) > 1e-6) throw SchemaError("field '" + at + ".pmf' does not sum to 1");
    for (double& q : r.pmf) q /= s;
  }
  if (ds.n_modalities() == 0) throw SchemaError("dataset has no modality");
}

namespace {

double get_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError("missing field '" + where + "." + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) throw SchemaError("field '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

Dataset dataset_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("dataset root must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "seismic" && k != "crater" && k != "sar" && k != "vlm" && k != "meta")
      throw SchemaError("unknown top-level field '" + k + "'");
  }
  Dataset ds;
  if (j.contains("seismic") && !j["seismic"].is_null())
    ds.seismic = SeismicObs{get_number(j["seismic"], "mw_obs", "seismic")};
  if (j.contains("crater") && !j["crater"].is_null())
    ds.crater = CraterObs{get_number(j["crater"], "width_m", "crater"),
                          get_number(j["crater"], "length_m", "crater")};
  if (j.contains("sar")) {
    if (!j["sar"].is_array()) throw SchemaError("field 'sar' must be an array");
    for (std::size_t i = 0; i < j["sar"].size(); ++i) {
      const std::string at = "sar[" + std::to_string(i) + "]";
      const json& b = j["sar"][i];
      ds.sar.push_back({get_number(b, "range_m", at), get_number(b, "damage_pct", at)});
    }
  }
  if (j.contains("vlm")) {
    if (!j["vlm"].is_array()) throw SchemaError("field 'vlm' must be an array");
    for (std::size_t i = 0; i < j["vlm"].size(); ++i) {
      const std::string at = "vlm[" + std::to_string(i) + "]";
      const json& r = j["vlm"][i];
      VlmRecord rec;
      rec.range_m = get_number(r, "range_m", at);
      if (!r.contains("pmf") || !r["pmf"].is_array() || r["pmf"].size() != 9)
        throw SchemaError("field '" + at + ".pmf' must be an array of 9 numbers");
      for (int k = 0; k < 9; ++k) {
        if (!r["pmf"][k].is_number()) throw SchemaError("field '" + at + ".pmf' must be numeric");
        rec.pmf[k] = r["pmf"][k].get<double>();
      }
      ds.vlm.push_back(rec);
    }
  }
  if (j.contains("meta")) ds.meta = j["meta"];
  validate_dataset(ds);
  return ds;
}

json dataset_to_json(const Dataset& ds) {
  json j = json::object();
  if (ds.seismic) j["seismic"] = {{"mw_obs", ds.seismic->mw_obs}};
  if (ds.crater) j["crater"] = {{"width_m", ds.crater->width_m}, {"length_m", ds.crater->length_m}};
  json sar = json::array();
  for (const SarBox& b : ds.sar) sar.push_back({{"range_m", b.range_m}, {"damage_pct", b.damage_pct}});
  j["sar"] = sar;
  json vlm = json::array();
  for (const VlmRecord& r : ds.vlm) vlm.push_back({{"range_m", r.range_m}, {"pmf", r.pmf}});
  j["vlm"] = vlm;
  j["meta"] = ds.meta;
  return j;
}

Dataset parse_dataset(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << "JSON parse error at line " << line << ", column " << col << ": " << e.what();
    throw SchemaError(msg.str());
  }
  return dataset_from_json(j);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
  out << std::setprecision(17) << dataset_to_json(ds).dump(2) << '\n';
}

Dataset beirut_summary_dataset() {
  Dataset ds;
  ds.seismic = SeismicObs{4.50};
  ds.crater = CraterObs{46.7, 108.1};
  ds.meta = {{"name", "beirut_summary"},
             {"epicenter", {{"lat", 33.9012}, {"lon", 35.5189}}},
             {"date", "2020-08-04"}};
  return ds;
}

}  // namespace yf
