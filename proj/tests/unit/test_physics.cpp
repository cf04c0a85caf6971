#include "doctest.h"

#include <cmath>
#include <random>
#include <tuple>

#include "yieldfusion/physics.hpp"

using namespace yf;

namespace {

// Independent evaluation straight from the coefficient rows.
double kb_oracle_at_z(double z, int row) {
  static const double c[3][5] = {{6.914, -1.439, -0.282, -0.142, 0.069},
                                 {8.831, -3.700, 0.271, 0.073, -0.013},
                                 {5.424, -1.407, 0.0, 0.0, 0.0}};
  const double s = std::log(z);
  double v = 0.0;
  for (int k = 4; k >= 0; --k) v = v * s + c[row][k];
  return std::exp(v);
}

double range_for_z(double z, double y) {
  return z * std::cbrt(y * 1e6) * std::cbrt(2.20462) / 3.28084;
}

}  // namespace

TEST_CASE("scaled distance of 1 km from 0.5 kt") {
  CHECK(scaled_distance_en(1000.0, 0.5) == doctest::Approx(31.7602419).epsilon(1e-8));
  CHECK(kb_incident_overpressure(1000.0, 0.5) == doctest::Approx(1.54707).epsilon(1e-4));
}

TEST_CASE("regime 3 two-term value at Z_en = 100") {
  const double r = range_for_z(100.0, 1.0);
  CHECK(kb_incident_overpressure(r, 1.0) == doctest::Approx(0.348027).epsilon(1e-5));
  CHECK(kb_incident_overpressure(r, 1.0) == doctest::Approx(kb_oracle_at_z(100.0, 2)).epsilon(1e-10));
}

TEST_CASE("regime boundaries are half-open") {
  CHECK(kb_regime(7.25) == 1);
  CHECK(kb_regime(7.2499999) == 0);
  CHECK(kb_regime(60.0) == 2);
  CHECK(kb_regime(0.5) == 0);
  CHECK(kb_regime(500.0) == 2);
  CHECK(kb_regime(0.4999) == -1);
  CHECK(kb_regime(500.0001) == -1);
}

TEST_CASE("out of range scaled distance raises with Z_en") {
  const double r = range_for_z(600.0, 1.0);
  CHECK_THROWS_AS(kb_incident_overpressure(r, 1.0), RangeError);
  try {
    kb_incident_overpressure(r, 1.0);
  } catch (const RangeError& e) {
    CHECK(e.z_en() == doctest::Approx(600.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(kb_incident_overpressure(range_for_z(0.3, 1.0), 1.0), RangeError);
}

TEST_CASE("junction jumps stay under ten percent") {
  for (auto [z, lo, hi] : {std::tuple{7.25, 0, 1}, std::tuple{60.0, 1, 2}}) {
    const double a = kb_oracle_at_z(z, lo);
    const double b = kb_oracle_at_z(z, hi);
    CHECK(std::abs(a - b) / b < 0.10);
    const double r = range_for_z(z, 1.0);
    CHECK(kb_incident_overpressure(r * (1 + 1e-9), 1.0) == doctest::Approx(b).epsilon(1e-6));
  }
}

TEST_CASE("overpressure decreases with range inside each regime") {
  std::mt19937_64 rng(11);
  const double bounds[3][2] = {{0.5, 7.25}, {7.25, 60.0}, {60.0, 500.0}};
  for (int k = 0; k < 3; ++k) {
    std::uniform_real_distribution<double> uz(std::log(bounds[k][0]), std::log(bounds[k][1]));
    std::uniform_real_distribution<double> uy(std::log(0.01), std::log(2.75));
    for (int i = 0; i < 1000; ++i) {
      double z1 = std::exp(uz(rng)), z2 = std::exp(uz(rng));
      if (z1 > z2) std::swap(z1, z2);
      if (z2 - z1 < 1e-9 * z2) continue;
      const double y = std::exp(uy(rng));
      CHECK(kb_incident_overpressure(range_for_z(z1, y), y) > kb_incident_overpressure(range_for_z(z2, y), y));
    }
  }
}

TEST_CASE("cube-root self-similarity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(400.0, 3000.0);
  for (int i = 0; i < 200; ++i) {
    const double r = ur(rng);
    const double y = 0.3;
    const double p = kb_incident_overpressure(r, y);
    for (double k : {0.1, 10.0}) {
      const double q = kb_incident_overpressure(r * std::cbrt(k), y * k);
      CHECK(std::abs(q - p) / p < 1e-12);
    }
  }
}

TEST_CASE("log form matches direct evaluation and its derivative") {
  for (double r : {150.0, 700.0, 2500.0, 9000.0}) {
    const double y = 0.4;
    KbLog kb{};
    REQUIRE(kb_log_overpressure(std::log(r), std::log(y), kb));
    CHECK(std::exp(kb.ln_p) == doctest::Approx(kb_incident_overpressure(r, y)).epsilon(1e-12));
    const double h = 1e-6;
    KbLog a{}, b{};
    kb_log_overpressure(std::log(r), std::log(y) + h, a);
    kb_log_overpressure(std::log(r), std::log(y) - h, b);
    CHECK(kb.dln_p_dln_y == doctest::Approx((a.ln_p - b.ln_p) / (2 * h)).epsilon(1e-7));
  }
  KbLog out{};
  CHECK_FALSE(kb_log_overpressure(std::log(1e6), std::log(0.3), out));
}

TEST_CASE("unit conversion") {
  CHECK(psi_to_kpa(0.0) == 0.0);
  CHECK(psi_to_kpa(1.0) == doctest::Approx(6.89476));
  CHECK(psi_to_kpa(10.0) == doctest::Approx(68.9476));
}

TEST_CASE("crater scaling") {
  CHECK(crater_mu_log10(1.0) == doctest::Approx(2.0));
  CHECK(crater_mu_log10(0.34) == doctest::Approx(1.8438263).epsilon(1e-7));
  CHECK(crater_mu_log10(2.75) == doctest::Approx(2.1464442).epsilon(1e-7));
  for (double y : {0.01, 0.3, 2.0}) CHECK(crater_mu_log10(8 * y) - crater_mu_log10(y) == doctest::Approx(std::log10(2.0)).epsilon(1e-14));
}

TEST_CASE("magnitude link") {
  CHECK(magnitude_from_yield(0.343) == doctest::Approx(4.49966).epsilon(1e-5));
  CHECK(yield_from_magnitude(4.50) == doctest::Approx(0.343352).epsilon(1e-5));
  CHECK(magnitude_from_yield(std::exp(-14.587)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(magnitude_from_yield(0.2) < magnitude_from_yield(0.4));
  for (double mw : {0.5, 3.0, 4.5, 6.2}) CHECK(std::abs(magnitude_from_yield(yield_from_magnitude(mw)) - mw) < 1e-12);
}

TEST_CASE("moment magnitude") {
  CHECK(mw_from_log_moment(15.85) == doctest::Approx(4.496667).epsilon(1e-6));
  CHECK(std::abs(mw_from_log_moment(9.105)) < 1e-12);
  CHECK(mw_from_log_moment(16.85) - mw_from_log_moment(15.85) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
}
