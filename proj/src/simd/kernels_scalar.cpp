#include "yieldfusion/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace yf::simd {
namespace {

void student_t_scalar(StudentTBatch& b) {
  const double inv_s = 1.0 / b.scale;
  const double np1 = b.nu + 1.0;
  double sum_ds = 0.0;
  double sum_dnu = 0.0;
  for (std::size_t i = 0; i < b.n; ++i) {
    const double r = (b.z_obs[i] - b.z_mu[i]) * inv_s;
    const double t = r * r / b.nu;
    const double l1p = std::log1p(t);
    const double inv1pt = 1.0 / (1.0 + t);
    b.logpdf[i] = b.log_norm - 0.5 * np1 * l1p;
    b.dlogpdf_dmu[i] = np1 * r * inv_s / b.nu * inv1pt;
    sum_ds += np1 * t * inv_s * inv1pt;
    sum_dnu += -0.5 * l1p + 0.5 * np1 * t / b.nu * inv1pt;
  }
  b.sum_dscale = sum_ds;
  b.sum_dnu = sum_dnu;
}

void binning_scalar(BinningBatch& b) {
  double log_edge[kEdges];
  for (int e = 0; e < kEdges; ++e) log_edge[e] = std::log10(kEdgePsi[e]);
  // ln(1 - exp(-width/sigma)) for the seven bounded bins and its sigma-derivative.
  double c[kBins] = {};
  double dc[kBins] = {};
  for (int k = 1; k < kBins - 1; ++k) {
    const double w = (log_edge[k] - log_edge[k - 1]) / b.sigma;
    c[k] = std::log(-std::expm1(-w));
    dc[k] = -(w / b.sigma) / std::expm1(w);
  }
  const double inv_sigma = 1.0 / b.sigma;

  for (std::size_t i = 0; i < b.n; ++i) {
    const double l = b.log10_p[i];
    const double* q = b.q + i * kBins;
    double x[kEdges], sp[kEdges], spn[kEdges], s[kEdges];
    for (int e = 0; e < kEdges; ++e) {
      x[e] = (log_edge[e] - l) * inv_sigma;
      const double ex = std::exp(-std::abs(x[e]));
      const double l1p = std::log1p(ex);
      sp[e] = std::max(x[e], 0.0) + l1p;    // softplus(x)
      spn[e] = std::max(-x[e], 0.0) + l1p;  // softplus(-x)
      s[e] = x[e] >= 0.0 ? 1.0 / (1.0 + ex) : ex / (1.0 + ex);
    }
    double ell = 0.0;
    double dsig = 0.0;
    for (int k = 0; k < kBins; ++k) {
      double lp = c[k];
      if (k < kEdges) lp -= spn[k];
      if (k > 0) lp -= sp[k - 1];
      ell += q[k] * lp;
      dsig += q[k] * dc[k];
    }
    double g_sum = 0.0;
    double gx_sum = 0.0;
    for (int e = 0; e < kEdges; ++e) {
      const double g = q[e] * (1.0 - s[e]) - q[e + 1] * s[e];
      g_sum += g;
      gx_sum += g * x[e];
    }
    b.ell[i] = ell;
    b.dell_dlog10p[i] = -inv_sigma * g_sum;
    b.dell_dsigma[i] = -inv_sigma * gx_sum + dsig;
  }
}

void gauss_sum_scalar(const double* grid, std::size_t m, const double* x, std::size_t n,
                      double h, double* out) {
  const double inv_h = 1.0 / h;
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (grid[j] - x[i]) * inv_h;
      acc += std::exp(-0.5 * u * u);
    }
    out[j] = acc;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, &student_t_scalar, &binning_scalar,
                                 &gauss_sum_scalar};
  return table;
}

}  // namespace yf::simd
