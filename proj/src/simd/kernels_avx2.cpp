// AVX2 + FMA variants of the kernels in kernels_scalar.cpp.
// This translation unit is compiled with -mavx2 -mfma; nothing here may run
// unless cpu_has_avx2() is true.

#include "yieldfusion/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace yf::simd {
namespace {

using v4 = __m256d;

inline v4 set1(double x) { return _mm256_set1_pd(x); }

// Cephes-style exp: range reduction by ln2 followed by a Pade form on
// [-ln2/2, ln2/2]. Arguments are clamped to the finite double range.
inline v4 exp4(v4 x) {
  x = _mm256_min_pd(_mm256_max_pd(x, set1(-708.39)), set1(709.0));
  v4 fx = _mm256_round_pd(_mm256_mul_pd(x, set1(1.4426950408889634073599)),
                          _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, set1(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, set1(1.42860682030941723212E-6), x);
  const v4 xx = _mm256_mul_pd(x, x);
  v4 px = _mm256_fmadd_pd(set1(1.26177193074810590878E-4), xx, set1(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, set1(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  v4 qx = _mm256_fmadd_pd(set1(3.00198505138664455042E-6), xx, set1(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, set1(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, set1(2.00000000000000000009E0));
  v4 r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(set1(2.0), r, set1(1.0));
  // 2^fx through the exponent field.
  __m256i ki = _mm256_castpd_si256(_mm256_add_pd(fx, set1(6755399441055744.0)));
  ki = _mm256_add_epi64(ki, _mm256_set1_epi64x(1023));
  ki = _mm256_slli_epi64(ki, 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(ki));
}

// Natural log for strictly positive, normal arguments.
inline v4 log4(v4 x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i biased = _mm256_srli_epi64(bits, 52);
  const v4 e_biased = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(biased, _mm256_set1_epi64x(0x4330000000000000LL))),
      set1(4503599627370496.0));
  v4 e = _mm256_sub_pd(e_biased, set1(1022.0));
  const __m256i mant = _mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
      _mm256_set1_epi64x(0x3FE0000000000000LL));
  v4 m = _mm256_castsi256_pd(mant);  // [0.5, 1)

  const v4 small = _mm256_cmp_pd(m, set1(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, set1(1.0)));
  const v4 m2 = _mm256_add_pd(m, _mm256_and_pd(small, m));
  const v4 f = _mm256_sub_pd(m2, set1(1.0));

  const v4 z = _mm256_mul_pd(f, f);
  v4 p = _mm256_fmadd_pd(set1(1.01875663804580931796E-4), f, set1(4.97494994976747001425E-1));
  p = _mm256_fmadd_pd(p, f, set1(4.70579119878881725854E0));
  p = _mm256_fmadd_pd(p, f, set1(1.44989225341610930846E1));
  p = _mm256_fmadd_pd(p, f, set1(1.79368678507819816313E1));
  p = _mm256_fmadd_pd(p, f, set1(7.70838733755885391666E0));
  v4 q = _mm256_add_pd(f, set1(1.12873587189167450590E1));
  q = _mm256_fmadd_pd(q, f, set1(4.52279145837532221105E1));
  q = _mm256_fmadd_pd(q, f, set1(8.29875266912776603211E1));
  q = _mm256_fmadd_pd(q, f, set1(7.11544750618563894466E1));
  q = _mm256_fmadd_pd(q, f, set1(2.31251620126765340583E1));

  v4 y = _mm256_mul_pd(f, _mm256_div_pd(_mm256_mul_pd(z, p), q));
  y = _mm256_fnmadd_pd(e, set1(2.121944400546905827679E-4), y);
  y = _mm256_fnmadd_pd(set1(0.5), z, y);
  v4 r = _mm256_add_pd(f, y);
  return _mm256_fmadd_pd(e, set1(0.693359375), r);
}

// log1p for t > -1, accurate for small t via log(u) * t / (u - 1).
inline v4 log1p4(v4 t) {
  const v4 u = _mm256_add_pd(set1(1.0), t);
  const v4 d = _mm256_sub_pd(u, set1(1.0));
  const v4 exact = _mm256_cmp_pd(d, set1(0.0), _CMP_EQ_OQ);
  const v4 safe_d = _mm256_blendv_pd(d, set1(1.0), exact);
  const v4 r = _mm256_mul_pd(log4(u), _mm256_div_pd(t, safe_d));
  return _mm256_blendv_pd(r, t, exact);
}

inline v4 abs4(v4 x) { return _mm256_andnot_pd(set1(-0.0), x); }

inline double hsum(v4 v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void student_t_avx2(StudentTBatch& b) {
  const v4 inv_s = set1(1.0 / b.scale);
  const v4 nu = set1(b.nu);
  const v4 inv_nu = set1(1.0 / b.nu);
  const v4 np1 = set1(b.nu + 1.0);
  const v4 half_np1 = set1(0.5 * (b.nu + 1.0));
  const v4 norm = set1(b.log_norm);
  v4 acc_ds = _mm256_setzero_pd();
  v4 acc_dnu = _mm256_setzero_pd();
  (void)nu;

  std::size_t i = 0;
  auto body = [&](v4 zo, v4 zm, v4 mask, double* lp_out, double* dmu_out) {
    const v4 r = _mm256_mul_pd(_mm256_sub_pd(zo, zm), inv_s);
    const v4 t = _mm256_mul_pd(_mm256_mul_pd(r, r), inv_nu);
    const v4 l1p = log1p4(t);
    const v4 inv1pt = _mm256_div_pd(set1(1.0), _mm256_add_pd(set1(1.0), t));
    const v4 lp = _mm256_fnmadd_pd(half_np1, l1p, norm);
    const v4 dmu = _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(np1, r), _mm256_mul_pd(inv_s, inv_nu)), inv1pt);
    const v4 ds = _mm256_mul_pd(_mm256_mul_pd(np1, t), _mm256_mul_pd(inv_s, inv1pt));
    const v4 dnu = _mm256_fmadd_pd(set1(-0.5), l1p,
                                   _mm256_mul_pd(_mm256_mul_pd(half_np1, t), _mm256_mul_pd(inv_nu, inv1pt)));
    acc_ds = _mm256_add_pd(acc_ds, _mm256_and_pd(mask, ds));
    acc_dnu = _mm256_add_pd(acc_dnu, _mm256_and_pd(mask, dnu));
    _mm256_storeu_pd(lp_out, lp);
    _mm256_storeu_pd(dmu_out, dmu);
  };

  const v4 all = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
  for (; i + 4 <= b.n; i += 4) {
    body(_mm256_loadu_pd(b.z_obs + i), _mm256_loadu_pd(b.z_mu + i), all, b.logpdf + i,
         b.dlogpdf_dmu + i);
  }
  if (i < b.n) {
    std::array<double, 4> zo{}, zm{}, lp{}, dmu{};
    std::array<long long, 4> mk{};
    const std::size_t rem = b.n - i;
    for (std::size_t k = 0; k < rem; ++k) {
      zo[k] = b.z_obs[i + k];
      zm[k] = b.z_mu[i + k];
      mk[k] = -1;
    }
    const v4 mask = _mm256_castsi256_pd(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(mk.data())));
    body(_mm256_loadu_pd(zo.data()), _mm256_loadu_pd(zm.data()), mask, lp.data(), dmu.data());
    for (std::size_t k = 0; k < rem; ++k) {
      b.logpdf[i + k] = lp[k];
      b.dlogpdf_dmu[i + k] = dmu[k];
    }
  }
  b.sum_dscale = hsum(acc_ds);
  b.sum_dnu = hsum(acc_dnu);
}

void binning_avx2(BinningBatch& b) {
  double log_edge[kEdges];
  for (int e = 0; e < kEdges; ++e) log_edge[e] = std::log10(kEdgePsi[e]);
  double c[kBins] = {};
  double dc[kBins] = {};
  for (int k = 1; k < kBins - 1; ++k) {
    const double w = (log_edge[k] - log_edge[k - 1]) / b.sigma;
    c[k] = std::log(-std::expm1(-w));
    dc[k] = -(w / b.sigma) / std::expm1(w);
  }
  const double inv_sigma_s = 1.0 / b.sigma;
  const v4 inv_sigma = set1(inv_sigma_s);
  const v4 one = set1(1.0);
  const v4 zero = _mm256_setzero_pd();

  auto block = [&](const double* l4, const double* q4 /* [4 x 9] */, double* ell_out,
                   double* dl_out, double* ds_out) {
    const v4 l = _mm256_loadu_pd(l4);
    v4 q[kBins];
    for (int k = 0; k < kBins; ++k)
      q[k] = _mm256_set_pd(q4[3 * kBins + k], q4[2 * kBins + k], q4[kBins + k], q4[k]);
    v4 ell = zero;
    v4 dsig = zero;
    v4 g_sum = zero;
    v4 gx_sum = zero;
    v4 sp_prev = zero;
    for (int k = 0; k < kBins; ++k) {
      v4 lp = set1(c[k]);
      if (k < kEdges) {
        const v4 x = _mm256_mul_pd(_mm256_sub_pd(set1(log_edge[k]), l), inv_sigma);
        const v4 ex = exp4(_mm256_sub_pd(zero, abs4(x)));
        const v4 l1p = log1p4(ex);
        const v4 sp = _mm256_add_pd(_mm256_max_pd(x, zero), l1p);
        const v4 spn = _mm256_add_pd(_mm256_max_pd(_mm256_sub_pd(zero, x), zero), l1p);
        const v4 inv1pe = _mm256_div_pd(one, _mm256_add_pd(one, ex));
        const v4 pos = _mm256_cmp_pd(x, zero, _CMP_GE_OQ);
        const v4 s = _mm256_blendv_pd(_mm256_mul_pd(ex, inv1pe), inv1pe, pos);
        lp = _mm256_sub_pd(lp, spn);
        const v4 g = _mm256_sub_pd(_mm256_mul_pd(q[k], _mm256_sub_pd(one, s)),
                                   _mm256_mul_pd(q[k + 1], s));
        g_sum = _mm256_add_pd(g_sum, g);
        gx_sum = _mm256_fmadd_pd(g, x, gx_sum);
        if (k > 0) lp = _mm256_sub_pd(lp, sp_prev);
        sp_prev = sp;
      } else {
        lp = _mm256_sub_pd(lp, sp_prev);
      }
      ell = _mm256_fmadd_pd(q[k], lp, ell);
      dsig = _mm256_fmadd_pd(q[k], set1(dc[k]), dsig);
    }
    _mm256_storeu_pd(ell_out, ell);
    _mm256_storeu_pd(dl_out, _mm256_mul_pd(_mm256_sub_pd(zero, inv_sigma), g_sum));
    _mm256_storeu_pd(ds_out, _mm256_fmadd_pd(_mm256_sub_pd(zero, inv_sigma), gx_sum, dsig));
  };

  std::size_t i = 0;
  for (; i + 4 <= b.n; i += 4)
    block(b.log10_p + i, b.q + i * kBins, b.ell + i, b.dell_dlog10p + i, b.dell_dsigma + i);
  if (i < b.n) {
    const std::size_t rem = b.n - i;
    std::array<double, 4> l{}, ell{}, dl{}, ds{};
    std::array<double, 4 * kBins> q{};
    for (std::size_t k = 0; k < rem; ++k) {
      l[k] = b.log10_p[i + k];
      std::copy_n(b.q + (i + k) * kBins, kBins, q.data() + k * kBins);
    }
    for (std::size_t k = rem; k < 4; ++k) l[k] = l[0];
    block(l.data(), q.data(), ell.data(), dl.data(), ds.data());
    for (std::size_t k = 0; k < rem; ++k) {
      b.ell[i + k] = ell[k];
      b.dell_dlog10p[i + k] = dl[k];
      b.dell_dsigma[i + k] = ds[k];
    }
  }
}

void gauss_sum_avx2(const double* grid, std::size_t m, const double* x, std::size_t n, double h,
                    double* out) {
  const v4 neg_half_inv_h2 = set1(-0.5 / (h * h));
  const std::size_t n4 = n - n % 4;
  for (std::size_t j = 0; j < m; ++j) {
    const v4 g = set1(grid[j]);
    v4 acc0 = _mm256_setzero_pd();
    v4 acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n4; i += 8) {
      const v4 d0 = _mm256_sub_pd(g, _mm256_loadu_pd(x + i));
      const v4 d1 = _mm256_sub_pd(g, _mm256_loadu_pd(x + i + 4));
      acc0 = _mm256_add_pd(acc0, exp4(_mm256_mul_pd(_mm256_mul_pd(d0, d0), neg_half_inv_h2)));
      acc1 = _mm256_add_pd(acc1, exp4(_mm256_mul_pd(_mm256_mul_pd(d1, d1), neg_half_inv_h2)));
    }
    for (; i < n4; i += 4) {
      const v4 d0 = _mm256_sub_pd(g, _mm256_loadu_pd(x + i));
      acc0 = _mm256_add_pd(acc0, exp4(_mm256_mul_pd(_mm256_mul_pd(d0, d0), neg_half_inv_h2)));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
      const double u = (grid[j] - x[i]) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out[j] = acc;
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::Avx2, &student_t_avx2, &binning_avx2, &gauss_sum_avx2};
  return &table;
}

}  // namespace yf::simd
