#include "yieldfusion/sarprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "yieldfusion/stats.hpp"

namespace yf {

Raster::Raster(int rows_, int cols_, double pixel_size, double x0_, double y0_, double fill)
    : rows(rows_), cols(cols_), x0(x0_), y0(y0_), pixel_size_m(pixel_size),
      values(static_cast<std::size_t>(std::max(rows_, 0)) * std::max(cols_, 0), fill) {
  validate();
}

bool Raster::same_grid(const Raster& o) const {
  return rows == o.rows && cols == o.cols && x0 == o.x0 && y0 == o.y0 && pixel_size_m == o.pixel_size_m;
}

void Raster::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("raster needs positive dimensions");
  if (!(pixel_size_m > 0.0)) throw std::invalid_argument("raster pixel size must be positive");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("raster value count does not match rows * cols");
}

Raster parse_raster(const std::string& text) {
  std::istringstream in(text);
  Raster r;
  if (!(in >> r.rows >> r.cols >> r.x0 >> r.y0 >> r.pixel_size_m))
    throw SchemaError("raster header must be 'rows cols x0 y0 pixel_size'");
  if (r.rows < 1 || r.cols < 1 || !(r.pixel_size_m > 0.0)) throw SchemaError("raster header has invalid values");
  r.values.reserve(static_cast<std::size_t>(r.rows) * r.cols);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      r.values.push_back(tok == "nan" || tok == "NaN" ? std::nan("") : std::stod(tok, &used));
      if (tok != "nan" && tok != "NaN" && used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw SchemaError("raster value '" + tok + "' is not a number");
    }
  }
  if (r.values.size() != static_cast<std::size_t>(r.rows) * r.cols)
    throw SchemaError("raster has " + std::to_string(r.values.size()) + " values, expected " +
                      std::to_string(static_cast<std::size_t>(r.rows) * r.cols));
  return r;
}

std::string format_raster(const Raster& r) {
  r.validate();
  std::ostringstream os;
  os << std::setprecision(17) << r.rows << ' ' << r.cols << ' ' << r.x0 << ' ' << r.y0 << ' ' << r.pixel_size_m
     << '\n';
  for (int i = 0; i < r.rows; ++i) {
    for (int j = 0; j < r.cols; ++j) os << (j ? " " : "") << r.at(i, j);
    os << '\n';
  }
  return os.str();
}

Raster load_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open raster '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_raster(ss.str());
}

void save_raster(const Raster& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write raster '" + path + "'");
  out << format_raster(r);
}

void SpikeAdConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("spikead window must be odd and >= 3");
  if (iterations < 1) throw std::invalid_argument("spikead iterations must be >= 1");
  if (!(mad_threshold > 0.0)) throw std::invalid_argument("spikead threshold must be positive");
}

namespace {

// Median of buf (reordered in place); average of the two middle values for even counts.
double median_inplace(std::vector<double>& buf) {
  const std::size_t n = buf.size();
  const std::size_t mid = n / 2;
  std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
  const double hi = buf[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(buf.begin(), buf.begin() + mid);
  return 0.5 * (lo + hi);
}

// Replacement value for v given its neighbourhood, or v itself.
double filter_value(double v, std::vector<double>& nb, double threshold) {
  if (nb.empty() || !std::isfinite(v)) return v;
  const double m = median_inplace(nb);
  for (double& x : nb) x = std::abs(x - m);
  const double mad = median_inplace(nb);
  return std::abs(v - m) > threshold * mad ? m : v;
}

std::vector<Raster> spatial_step(const std::vector<Raster>& stack, const SpikeAdConfig& cfg) {
  const int h = cfg.window / 2;
  std::vector<Raster> out = stack;
  std::vector<double> nb;
  for (std::size_t k = 0; k < stack.size(); ++k) {
    const Raster& in = stack[k];
    for (int i = 0; i < in.rows; ++i)
      for (int j = 0; j < in.cols; ++j) {
        nb.clear();
        for (int a = std::max(0, i - h); a <= std::min(in.rows - 1, i + h); ++a)
          for (int b = std::max(0, j - h); b <= std::min(in.cols - 1, j + h); ++b)
            if (std::isfinite(in.at(a, b))) nb.push_back(in.at(a, b));
        out[k].at(i, j) = filter_value(in.at(i, j), nb, cfg.mad_threshold);
      }
  }
  return out;
}

std::vector<Raster> temporal_step(const std::vector<Raster>& stack, const SpikeAdConfig& cfg) {
  std::vector<Raster> out = stack;
  std::vector<double> nb;
  const std::size_t n = stack[0].values.size();
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t k = 0; k < stack.size(); ++k) {
      nb.clear();
      for (const Raster& r : stack)
        if (std::isfinite(r.values[p])) nb.push_back(r.values[p]);
      out[k].values[p] = filter_value(stack[k].values[p], nb, cfg.mad_threshold);
    }
  return out;
}

void check_stack(const std::vector<Raster>& stack, const SpikeAdConfig& cfg) {
  cfg.validate();
  if (stack.empty()) throw std::invalid_argument("spikead needs at least one raster");
  for (const Raster& r : stack) r.validate();
  if (cfg.mode == SpikeMode::Temporal) {
    if (stack.size() < 3) throw std::invalid_argument("temporal spikead needs at least three rasters");
    for (const Raster& r : stack)
      if (!r.same_grid(stack[0])) throw std::invalid_argument("temporal spikead needs co-registered rasters");
  }
}

}  // namespace

std::vector<Raster> spikead(const std::vector<Raster>& stack, const SpikeAdConfig& cfg) {
  check_stack(stack, cfg);
  std::vector<Raster> cur = stack;
  for (int it = 0; it < cfg.iterations; ++it)
    cur = cfg.mode == SpikeMode::Spatial ? spatial_step(cur, cfg) : temporal_step(cur, cfg);
  return cur;
}

std::size_t spikead_changes(const std::vector<Raster>& stack, const SpikeAdConfig& cfg) {
  check_stack(stack, cfg);
  const std::vector<Raster> next = cfg.mode == SpikeMode::Spatial ? spatial_step(stack, cfg) : temporal_step(stack, cfg);
  std::size_t n = 0;
  for (std::size_t k = 0; k < stack.size(); ++k)
    for (std::size_t p = 0; p < stack[k].values.size(); ++p) {
      const double a = stack[k].values[p], b = next[k].values[p];
      if (!(a == b || (std::isnan(a) && std::isnan(b)))) ++n;
    }
  return n;
}

Raster composite(const std::vector<Raster>& stack) {
  if (stack.empty()) throw std::invalid_argument("composite needs at least one raster");
  Raster out = stack[0];
  for (const Raster& r : stack)
    if (!r.same_grid(stack[0])) throw std::invalid_argument("composite needs co-registered rasters");
  double mx = 0.0;
  for (std::size_t p = 0; p < out.values.size(); ++p) {
    double s = 0.0;
    for (const Raster& r : stack) s += r.values[p];
    out.values[p] = s / static_cast<double>(stack.size());
    if (std::isfinite(out.values[p])) mx = std::max(mx, out.values[p]);
  }
  if (mx > 0.0)
    for (double& v : out.values) v /= mx;
  return out;
}

void ZonalConfig::validate() const {
  if (box < 1) throw std::invalid_argument("box size must be positive");
  if (n_annuli < 1) throw std::invalid_argument("n_annuli must be positive");
  if (!(r_inner_m > 0.0 && r_outer_m > r_inner_m)) throw std::invalid_argument("need 0 < r_inner < r_outer");
  if (!(percentile >= 0.0 && percentile < 100.0)) throw std::invalid_argument("percentile must be in [0, 100)");
}

ZonalResult zonal_aggregate(const Raster& damage, const ZonalConfig& cfg) {
  damage.validate();
  cfg.validate();
  struct Box {
    int row, col;
    double range, pct;
  };
  std::vector<std::vector<Box>> annuli(cfg.n_annuli);
  const double l_in = std::log(cfg.r_inner_m);
  const double l_step = (std::log(cfg.r_outer_m) - l_in) / cfg.n_annuli;
  for (int bi = 0; (bi + 1) * cfg.box <= damage.rows; ++bi)
    for (int bj = 0; (bj + 1) * cfg.box <= damage.cols; ++bj) {
      double sum = 0.0;
      int count = 0;
      for (int i = bi * cfg.box; i < (bi + 1) * cfg.box; ++i)
        for (int j = bj * cfg.box; j < (bj + 1) * cfg.box; ++j)
          if (std::isfinite(damage.at(i, j))) {
            sum += damage.at(i, j);
            ++count;
          }
      if (count == 0) continue;
      const double cx = damage.x0 + (bj + 0.5) * cfg.box * damage.pixel_size_m;
      const double cy = damage.y0 + (bi + 0.5) * cfg.box * damage.pixel_size_m;
      const double r = std::hypot(cx - cfg.epicenter_x, cy - cfg.epicenter_y);
      if (r < cfg.r_inner_m || r > cfg.r_outer_m) continue;
      const int a = std::min(cfg.n_annuli - 1, static_cast<int>(std::floor((std::log(r) - l_in) / l_step)));
      annuli[a].push_back({bi, bj, r, 100.0 * sum / count});
    }

  ZonalResult out;
  for (int a = 0; a < cfg.n_annuli; ++a) {
    out.boxes_per_annulus.push_back(static_cast<int>(annuli[a].size()));
    if (annuli[a].empty()) {
      ++out.empty_annuli;
      continue;
    }
    std::vector<double> pct;
    for (const Box& b : annuli[a]) pct.push_back(b.pct);
    const double thr = cfg.percentile > 0.0 ? quantile_of(pct, cfg.percentile / 100.0) : -1.0;
    for (const Box& b : annuli[a])
      if (b.pct >= thr) {
        out.boxes.push_back({b.range, b.pct});
        out.annulus.push_back(a);
      }
  }
  return out;
}

}  // namespace yf
