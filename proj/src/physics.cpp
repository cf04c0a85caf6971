#include "yieldfusion/physics.hpp"

#include <cmath>
#include <sstream>

namespace yf {

namespace {

// ln(ft/m) - ln(lb/kg)/3 - ln(1e6)/3, the constant part of ln Z_en.
const double kLnZOffset =
    std::log(kMetresToFeet) - std::log(kKgToLb) / 3.0 - std::log(1.0e6) / 3.0;

}  // namespace

double scaled_distance_en(double range_m, double yield_kt) {
  const double w_kg = yield_kt * 1.0e6;
  const double z_si = range_m / std::cbrt(w_kg);
  return z_si * kMetresToFeet / std::cbrt(kKgToLb);
}

int kb_regime(double z_en) noexcept {
  if (!(z_en >= kKbTable[0].lo) || z_en > kKbTable[2].hi) return -1;
  if (z_en < kKbTable[0].hi) return 0;
  if (z_en < kKbTable[1].hi) return 1;
  return 2;
}

namespace {

void eval_row(const KbRow& row, double s, double& value, double& slope) {
  value = row.a + s * (row.b + s * (row.c + s * (row.d + s * row.e)));
  slope = row.b + s * (2.0 * row.c + s * (3.0 * row.d + s * 4.0 * row.e));
}

}  // namespace

double kb_incident_overpressure(double range_m, double yield_kt) {
  if (!(range_m > 0.0) || !(yield_kt > 0.0))
    throw std::invalid_argument("kb_incident_overpressure: range and yield must be positive");
  const double z = scaled_distance_en(range_m, yield_kt);
  const int k = kb_regime(z);
  if (k < 0) {
    std::ostringstream msg;
    msg << "scaled distance Z_en=" << z << " ft/lb^(1/3) outside KB range [0.5, 500]";
    throw RangeError(msg.str(), z);
  }
  double v = 0.0, slope = 0.0;
  eval_row(kKbTable[k], std::log(z), v, slope);
  return std::exp(v);
}

int kb_regime_log(double ln_range_m, double ln_yield_kt) noexcept {
  return kb_regime(std::exp(ln_range_m + kLnZOffset - ln_yield_kt / 3.0));
}

bool kb_log_overpressure(double ln_range_m, double ln_yield_kt, KbLog& out) noexcept {
  const double s = ln_range_m + kLnZOffset - ln_yield_kt / 3.0;
  const int k = kb_regime(std::exp(s));
  if (k < 0) return false;
  double v = 0.0, slope = 0.0;
  eval_row(kKbTable[k], s, v, slope);
  out.ln_p = v;
  out.dln_p_dln_y = -slope / 3.0;
  return true;
}

double psi_to_kpa(double p_psi) { return p_psi * kPsiToKpa; }

double crater_mu_log10(double yield_kt) { return (std::log10(yield_kt) + 6.0) / 3.0; }

double magnitude_from_yield(double yield_kt, const MagnitudeLink& link) {
  return (std::log(yield_kt) - link.alpha) / link.beta;
}

double yield_from_magnitude(double mw, const MagnitudeLink& link) {
  return std::exp(link.alpha + link.beta * mw);
}

double mw_from_log_moment(double log10_m0_nm) { return (2.0 / 3.0) * log10_m0_nm - 6.07; }

}  // namespace yf
