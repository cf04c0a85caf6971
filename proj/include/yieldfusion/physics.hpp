#pragma once

// Forward maps from yield to observables: Kingery-Bulmash incident
// overpressure for a hemispherical surface burst, crater scaling, the
// yield-magnitude regression and the moment-magnitude conversion.

#include <array>
#include <stdexcept>
#include <string>

namespace yf {

// One regime of the piecewise KB fit: ln P_psi = A + B s + C s^2 + D s^3 + E s^4
// with s = ln Z_en and Z_en in [lo, hi) (the last row is closed on the right).
struct KbRow {
  double lo;
  double hi;
  double a, b, c, d, e;
};

inline constexpr std::array<KbRow, 3> kKbTable = {{
    {0.5, 7.25, 6.914, -1.439, -0.282, -0.142, 0.069},
    {7.25, 60.0, 8.831, -3.700, 0.271, 0.073, -0.013},
    {60.0, 500.0, 5.424, -1.407, 0.0, 0.0, 0.0},
}};

inline constexpr double kPsiToKpa = 6.89476;
inline constexpr double kMetresToFeet = 3.28084;
inline constexpr double kKgToLb = 2.20462;

// ln Y = alpha + beta * Mw
struct MagnitudeLink {
  double alpha = -14.587;
  double beta = 3.004;
};

class RangeError : public std::domain_error {
 public:
  RangeError(const std::string& what, double z_en) : std::domain_error(what), z_en_(z_en) {}
  double z_en() const noexcept { return z_en_; }

 private:
  double z_en_;
};

// Scaled distance in ft/lb^(1/3) for a charge of yield_kt kilotons at range_m.
double scaled_distance_en(double range_m, double yield_kt);

// Index of the KB row that owns z_en, or -1 outside [0.5, 500].
int kb_regime(double z_en) noexcept;

// Peak incident overpressure in psi. Throws RangeError outside [0.5, 500].
double kb_incident_overpressure(double range_m, double yield_kt);

// Log-space evaluation used by the likelihoods. Returns false (and leaves the
// outputs untouched) when Z_en is outside the fitted range.
struct KbLog {
  double ln_p;         // ln P_psi
  double dln_p_dln_y;  // derivative with respect to ln yield at fixed range
};
bool kb_log_overpressure(double ln_range_m, double ln_yield_kt, KbLog& out) noexcept;
int kb_regime_log(double ln_range_m, double ln_yield_kt) noexcept;

double psi_to_kpa(double p_psi);

// Mean of log10 crater diameter in metres.
double crater_mu_log10(double yield_kt);

double magnitude_from_yield(double yield_kt, const MagnitudeLink& link = {});
double yield_from_magnitude(double mw, const MagnitudeLink& link = {});

// Moment magnitude from log10 of the scalar moment in N m.
double mw_from_log_moment(double log10_m0_nm);

}  // namespace yf
