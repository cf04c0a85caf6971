#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "yieldfusion/likelihoods.hpp"
#include "yieldfusion/simd/kernels.hpp"

using namespace yf;
using namespace yf::simd;

namespace {

const KernelTable* vector_table() {
  const KernelTable* t = avx2_kernels();
  return (t != nullptr && cpu_has_avx2()) ? t : nullptr;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("dispatch honours requests") {
  CHECK(set_active_isa(Isa::Scalar));
  CHECK(kernels().isa == Isa::Scalar);
  if (vector_table() != nullptr) {
    CHECK(set_active_isa(Isa::Avx2));
    CHECK(kernels().isa == Isa::Avx2);
  } else {
    CHECK_FALSE(set_active_isa(Isa::Avx2));
  }
  CHECK(isa_name(Isa::Avx2) == "avx2");
}

TEST_CASE("scalar binning matches direct log bin probabilities") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ul(-2.5, 1.8), us(0.02, 0.8);
  std::gamma_distribution<double> gd(0.7, 1.0);
  const std::size_t n = 37;
  std::vector<double> l(n), q(n * kBins), ell(n), dl(n), ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = ul(rng);
    double s = 0.0;
    for (int k = 0; k < kBins; ++k) s += (q[i * kBins + k] = gd(rng));
    for (int k = 0; k < kBins; ++k) q[i * kBins + k] /= s;
  }
  const double sigma = us(rng);
  BinningBatch b{l.data(), q.data(), n, sigma, ell.data(), dl.data(), ds.data()};
  scalar_kernels().binning(b);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = vlm_bin_probs(std::pow(10.0, l[i]), sigma);
    double ref = 0.0;
    for (int k = 0; k < kBins; ++k) ref += q[i * kBins + k] * std::log(pi[k]);
    CHECK(ell[i] == doctest::Approx(ref).epsilon(1e-9));
    // Derivatives against central differences of the reference.
    auto f = [&](double li, double si) {
      const auto p = vlm_bin_probs(std::pow(10.0, li), si);
      double v = 0.0;
      for (int k = 0; k < kBins; ++k) v += q[i * kBins + k] * std::log(p[k]);
      return v;
    };
    const double h = 1e-6;
    CHECK(dl[i] == doctest::Approx((f(l[i] + h, sigma) - f(l[i] - h, sigma)) / (2 * h)).epsilon(1e-5));
    CHECK(ds[i] == doctest::Approx((f(l[i], sigma + h) - f(l[i], sigma - h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const KernelTable* v = vector_table();
  if (v == nullptr) {
    MESSAGE("AVX2 variant unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const KernelTable& s = scalar_kernels();
  std::mt19937_64 rng(99);
  for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 31u, 120u, 161u}) {
    std::normal_distribution<double> nd(0.0, 2.5);
    std::vector<double> zo(n), zm(n), lp1(n), lp2(n), d1(n), d2(n);
    for (std::size_t i = 0; i < n; ++i) {
      zo[i] = nd(rng);
      zm[i] = nd(rng);
    }
    zo[0] = zm[0];  // exact centre exercises the log1p(0) path
    for (double nu : {2.1, 3.68, 30.0, 1e6}) {
      const double scale = 0.37;
      const double norm = student_t_log_norm(nu, scale);
      StudentTBatch a{zo.data(), zm.data(), n, scale, nu, norm, lp1.data(), d1.data()};
      StudentTBatch b{zo.data(), zm.data(), n, scale, nu, norm, lp2.data(), d2.data()};
      s.student_t(a);
      v->student_t(b);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(rel(lp2[i], lp1[i]) < 1e-13);
        CHECK(rel(d2[i], d1[i]) < 1e-13);
      }
      CHECK(rel(b.sum_dscale, a.sum_dscale) < 1e-12);
      CHECK(rel(b.sum_dnu, a.sum_dnu) < 1e-12);
    }

    std::uniform_real_distribution<double> ul(-3.0, 2.5);
    std::gamma_distribution<double> gd(0.5, 1.0);
    std::vector<double> l(n), q(n * kBins), e1(n), e2(n), g1(n), g2(n), h1(n), h2(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = ul(rng);
      double t = 0.0;
      for (int k = 0; k < kBins; ++k) t += (q[i * kBins + k] = gd(rng));
      for (int k = 0; k < kBins; ++k) q[i * kBins + k] /= t;
    }
    for (double sigma : {0.01, 0.15, 0.6}) {
      BinningBatch a{l.data(), q.data(), n, sigma, e1.data(), g1.data(), h1.data()};
      BinningBatch b{l.data(), q.data(), n, sigma, e2.data(), g2.data(), h2.data()};
      s.binning(a);
      v->binning(b);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(rel(e2[i], e1[i]) < 1e-12);
        CHECK(rel(g2[i], g1[i]) < 1e-12);
        CHECK(rel(h2[i], h1[i]) < 1e-12);
      }
    }

    std::vector<double> grid(53), o1(53), o2(53);
    for (std::size_t j = 0; j < grid.size(); ++j) grid[j] = -6.0 + 0.23 * j;
    s.gauss_sum(grid.data(), grid.size(), zo.data(), n, 0.4, o1.data());
    v->gauss_sum(grid.data(), grid.size(), zo.data(), n, 0.4, o2.data());
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(std::abs(o2[j] - o1[j]) <= 1e-13 * std::max(1.0, o1[j]));
  }
}

TEST_CASE("vector exp handles deep underflow in gauss sums") {
  const KernelTable* v = vector_table();
  if (v == nullptr) return;
  std::vector<double> x = {0.0, 1.0, 2.0, 3.0, 1e3, -1e3, 40.0, 41.0};
  std::vector<double> grid = {0.5, 500.0}, o(2), r(2);
  v->gauss_sum(grid.data(), 2, x.data(), x.size(), 0.5, o.data());
  scalar_kernels().gauss_sum(grid.data(), 2, x.data(), x.size(), 0.5, r.data());
  CHECK(o[0] == doctest::Approx(r[0]).epsilon(1e-13));
  CHECK(o[1] == doctest::Approx(r[1]).epsilon(1e-13));
}
