#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "yieldfusion/dataset.hpp"
#include "yieldfusion/sarprep.hpp"
#include "yieldfusion/stats.hpp"

using namespace yf;

namespace {

Raster random_raster(int rows, int cols, unsigned seed) {
  Raster r(rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.5, 0.1);
  std::bernoulli_distribution spike(0.03);
  for (double& v : r.values) v = spike(rng) ? 5.0 : nd(rng);
  return r;
}

// Damage fraction min(1, 100 / r) around the origin on a square raster of half-width `half` metres.
Raster inverse_r_field(double half, double pixel, double shift_x = 0.0, double shift_y = 0.0) {
  const int n = static_cast<int>(std::lround(2 * half / pixel));
  Raster r(n, n, pixel, -half + shift_x, -half + shift_y);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = std::hypot(r.x_of(j) - shift_x, r.y_of(i) - shift_y);
      r.at(i, j) = std::min(1.0, 100.0 / d);
    }
  return r;
}

}  // namespace

TEST_CASE("spikead leaves a constant raster unchanged") {
  Raster r(30, 25, 10.0, 0.0, 0.0, 0.42);
  const auto out = spikead({r}, SpikeAdConfig{});
  CHECK(out[0].values == r.values);
}

TEST_CASE("spikead replaces an isolated spike after one iteration") {
  Raster r(21, 21);
  r.at(10, 10) = 100.0;
  SpikeAdConfig cfg;
  cfg.iterations = 1;
  const auto out = spikead({r}, cfg);
  CHECK(out[0].at(10, 10) == 0.0);
  for (double v : out[0].values) CHECK(v == 0.0);
  Raster corner(15, 15);
  corner.at(0, 0) = 100.0;
  CHECK(spikead({corner}, cfg)[0].at(0, 0) == 0.0);
}

TEST_CASE("spikead leaves a checkerboard unchanged") {
  Raster r(24, 31);
  for (int i = 0; i < r.rows; ++i)
    for (int j = 0; j < r.cols; ++j) r.at(i, j) = (i + j) % 2;
  CHECK(spikead({r}, SpikeAdConfig{})[0].values == r.values);
  CHECK(spikead_changes({r}, SpikeAdConfig{}) == 0);
}

TEST_CASE("spikead converges to a fixed point that one more pass keeps") {
  SpikeAdConfig cfg;
  cfg.window = 5;
  cfg.iterations = 1;
  std::vector<Raster> cur{random_raster(40, 40, 3)};
  int it = 0;
  while (spikead_changes(cur, cfg) > 0 && it < 200) {
    cur = spikead(cur, cfg);
    ++it;
  }
  REQUIRE(it < 200);
  CHECK(spikead(cur, cfg)[0].values == cur[0].values);
}

TEST_CASE("spikead output stays within the input neighbourhood range") {
  const Raster in = random_raster(35, 29, 9);
  SpikeAdConfig cfg;
  cfg.iterations = 1;
  const Raster out = spikead({in}, cfg)[0];
  const int h = cfg.window / 2;
  for (int i = 0; i < in.rows; ++i)
    for (int j = 0; j < in.cols; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (int a = std::max(0, i - h); a <= std::min(in.rows - 1, i + h); ++a)
        for (int b = std::max(0, j - h); b <= std::min(in.cols - 1, j + h); ++b) {
          lo = std::min(lo, in.at(a, b));
          hi = std::max(hi, in.at(a, b));
        }
      CHECK(out.at(i, j) >= lo);
      CHECK(out.at(i, j) <= hi);
    }
  const Raster multi = spikead({in}, SpikeAdConfig{})[0];
  const auto [mn, mx] = std::minmax_element(in.values.begin(), in.values.end());
  for (double v : multi.values) CHECK((v >= *mn && v <= *mx));
}

TEST_CASE("temporal spikead works per pixel across the stack") {
  std::vector<Raster> stack(5, Raster(4, 4, 10.0, 0.0, 0.0, 0.3));
  stack[2].at(1, 1) = 0.9;
  stack[4].at(3, 0) = 0.31;
  SpikeAdConfig cfg;
  cfg.mode = SpikeMode::Temporal;
  const auto out = spikead(stack, cfg);
  CHECK(out[2].at(1, 1) == 0.3);
  CHECK(out[4].at(3, 0) == 0.3);
  CHECK(out[0].values == stack[0].values);
  CHECK_THROWS(spikead({stack[0], stack[1]}, cfg));
  std::vector<Raster> bad = stack;
  bad[1] = Raster(4, 5);
  CHECK_THROWS(spikead(bad, cfg));
}

TEST_CASE("spikead configuration is validated") {
  Raster r(5, 5);
  SpikeAdConfig cfg;
  cfg.window = 4;
  CHECK_THROWS(spikead({r}, cfg));
  cfg.window = 1;
  CHECK_THROWS(spikead({r}, cfg));
  cfg.window = 3;
  cfg.iterations = 0;
  CHECK_THROWS(spikead({r}, cfg));
}

TEST_CASE("composite is a scaled pixel-wise mean") {
  Raster a(2, 2), b(2, 2);
  a.values = {0.2, 0.4, 0.0, 0.8};
  b.values = {0.0, 0.4, 0.2, 0.4};
  const Raster c = composite({a, b});
  CHECK(c.values[0] == doctest::Approx(1.0 / 6.0));
  CHECK(c.values[1] == doctest::Approx(4.0 / 6.0));
  CHECK(c.values[3] == doctest::Approx(1.0));
}

TEST_CASE("raster text round trip and malformed input") {
  Raster r(2, 3, 12.5, -100.0, 40.0);
  r.values = {0.1, 0.2, 0.3, 0.4, 0.5, 1.0 / 3.0};
  const Raster back = parse_raster(format_raster(r));
  CHECK(back.same_grid(r));
  CHECK(back.values == r.values);
  CHECK_THROWS_AS(parse_raster("2 2 0 0 10\n1 2 3"), SchemaError);
  CHECK_THROWS_AS(parse_raster("2 2 0 0\n"), SchemaError);
  CHECK_THROWS_AS(parse_raster("1 2 0 0 10\n1 x"), SchemaError);
  CHECK_THROWS_AS(parse_raster("1 1 0 0 -1\n1"), SchemaError);
}

TEST_CASE("fully damaged raster gives 100 percent boxes") {
  Raster r(500, 500, 10.0, -2500.0, -2500.0, 1.0);
  const ZonalResult z = zonal_aggregate(r, ZonalConfig{});
  REQUIRE(!z.boxes.empty());
  for (const SarBox& b : z.boxes) CHECK(b.damage_pct == 100.0);
}

TEST_CASE("zero percentile keeps every full box inside the annuli") {
  Raster r(205, 233, 10.0, -1000.0, -1200.0, 0.5);
  ZonalConfig cfg;
  cfg.percentile = 0.0;
  const ZonalResult z = zonal_aggregate(r, cfg);
  int expected = 0;
  for (int bi = 0; bi < 20; ++bi)
    for (int bj = 0; bj < 23; ++bj) {
      const double d = std::hypot(-1000.0 + (bj + 0.5) * 100.0, -1200.0 + (bi + 0.5) * 100.0);
      if (d >= 200.0 && d <= 8000.0) ++expected;
    }
  CHECK(static_cast<int>(z.boxes.size()) == expected);
  int total = 0;
  for (int n : z.boxes_per_annulus) total += n;
  CHECK(total == expected);
}

TEST_CASE("output is ordered by annulus and ranges fall in their annulus") {
  const Raster r = inverse_r_field(3000.0, 10.0);
  const ZonalResult z = zonal_aggregate(r, ZonalConfig{});
  REQUIRE(z.boxes.size() == z.annulus.size());
  const double step = std::log(8000.0 / 200.0) / 15.0;
  for (std::size_t i = 0; i < z.boxes.size(); ++i) {
    if (i > 0) CHECK(z.annulus[i] >= z.annulus[i - 1]);
    const double lo = 200.0 * std::exp(step * z.annulus[i]);
    const double hi = 200.0 * std::exp(step * (z.annulus[i] + 1));
    CHECK(z.boxes[i].range_m >= lo * (1 - 1e-12));
    CHECK(z.boxes[i].range_m <= hi * (1 + 1e-12));
  }
  // Annuli beyond the raster extent are empty and counted.
  CHECK(z.empty_annuli > 0);
}

TEST_CASE("retained damage decays strictly across annuli on a 1/r field") {
  const Raster r = inverse_r_field(8100.0, 10.0);
  const ZonalResult z = zonal_aggregate(r, ZonalConfig{});
  CHECK(z.empty_annuli == 0);
  std::vector<std::vector<double>> per(15);
  for (std::size_t i = 0; i < z.boxes.size(); ++i) per[z.annulus[i]].push_back(z.boxes[i].damage_pct);
  double prev = INFINITY;
  for (const auto& v : per) {
    REQUIRE(!v.empty());
    const double m = quantile_of(v, 0.5);
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("zonal aggregation is translation invariant") {
  const Raster a = inverse_r_field(2000.0, 10.0);
  const Raster b = inverse_r_field(2000.0, 10.0, 3000.0, -1500.0);
  ZonalConfig ca, cb;
  cb.epicenter_x = 3000.0;
  cb.epicenter_y = -1500.0;
  const ZonalResult za = zonal_aggregate(a, ca);
  const ZonalResult zb = zonal_aggregate(b, cb);
  REQUIRE(za.boxes.size() == zb.boxes.size());
  CHECK(za.annulus == zb.annulus);
  for (std::size_t i = 0; i < za.boxes.size(); ++i) {
    CHECK(za.boxes[i].range_m == doctest::Approx(zb.boxes[i].range_m).epsilon(1e-9));
    CHECK(za.boxes[i].damage_pct == doctest::Approx(zb.boxes[i].damage_pct).epsilon(1e-9));
  }
}

TEST_CASE("zonal configuration is validated") {
  Raster r(20, 20);
  ZonalConfig cfg;
  cfg.percentile = 100.0;
  CHECK_THROWS(zonal_aggregate(r, cfg));
  cfg = ZonalConfig{};
  cfg.r_outer_m = 100.0;
  CHECK_THROWS(zonal_aggregate(r, cfg));
  cfg = ZonalConfig{};
  cfg.box = 0;
  CHECK_THROWS(zonal_aggregate(r, cfg));
}
