#pragma once

// Median/MAD despeckling of damage rasters and zonal aggregation of a damage
// map into range-binned SAR boxes.

#include <string>
#include <vector>

#include "yieldfusion/dataset.hpp"

namespace yf {

struct Raster {
  int rows = 0;
  int cols = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double pixel_size_m = 10.0;
  std::vector<double> values;  // row-major

  Raster() = default;
  Raster(int rows, int cols, double pixel_size_m = 10.0, double x0 = 0.0, double y0 = 0.0, double fill = 0.0);
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  // Centre of pixel (r, c) in map coordinates.
  double x_of(int c) const { return x0 + (c + 0.5) * pixel_size_m; }
  double y_of(int r) const { return y0 + (r + 0.5) * pixel_size_m; }
  bool same_grid(const Raster& o) const;
  void validate() const;
};

// Text format: header "rows cols x0 y0 pixel_size" then row-major values.
Raster parse_raster(const std::string& text);
std::string format_raster(const Raster& r);
Raster load_raster(const std::string& path);
void save_raster(const Raster& r, const std::string& path);

enum class SpikeMode { Spatial, Temporal };

struct SpikeAdConfig {
  int window = 11;
  double mad_threshold = 3.0;
  int iterations = 4;
  SpikeMode mode = SpikeMode::Spatial;

  void validate() const;
};

// Each iteration replaces pixels farther than mad_threshold * MAD from the
// neighbourhood median by that median. Neighbourhoods are read from the
// previous iteration. Spatial mode treats every raster on its own; temporal
// mode uses the same pixel across the co-registered stack.
std::vector<Raster> spikead(const std::vector<Raster>& stack, const SpikeAdConfig& cfg);
// Number of pixels one iteration would change.
std::size_t spikead_changes(const std::vector<Raster>& stack, const SpikeAdConfig& cfg);

// Pixel-wise mean of a stack scaled so that its maximum is 1.
Raster composite(const std::vector<Raster>& stack);

struct ZonalConfig {
  double epicenter_x = 0.0;
  double epicenter_y = 0.0;
  int box = 10;
  int n_annuli = 15;
  double r_inner_m = 200.0;
  double r_outer_m = 8000.0;
  double percentile = 95.0;

  void validate() const;
};

struct ZonalResult {
  std::vector<SarBox> boxes;           // ordered by (annulus, box row, box col)
  std::vector<int> annulus;            // annulus index of each emitted box
  std::vector<int> boxes_per_annulus;  // full boxes before thresholding
  int empty_annuli = 0;
};

// Raster values are damage fractions in [0, 1]; non-finite pixels are nodata.
ZonalResult zonal_aggregate(const Raster& damage, const ZonalConfig& cfg);

}  // namespace yf
