#pragma once

// Data-parallel inner loops of the likelihoods and the density estimators.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is chosen once at first use from the CPU
// feature flags; YF_SIMD=scalar in the environment forces the reference
// path. Both paths are checked against each other in tests/unit/test_kernels.

#include <cstddef>
#include <string_view>

namespace yf::simd {

enum class Isa { Scalar, Avx2 };

// Per-box Student-t terms on the logit scale. Inputs are the observed logits,
// the predicted location per box, the common scale and the degrees of
// freedom. Only the data-dependent part is computed here; `log_norm` is the
// per-box normalizing constant added to every `logpdf[i]`.
struct StudentTBatch {
  const double* z_obs;
  const double* z_mu;
  std::size_t n;
  double scale;
  double nu;
  double log_norm;
  double* logpdf;        // [n]
  double* dlogpdf_dmu;   // [n]
  // Outputs, sums over boxes of the data-dependent derivative parts.
  double sum_dscale = 0.0;  // sum of (nu+1) t / (s (1+t)), t = r^2/nu
  double sum_dnu = 0.0;     // sum of -0.5 log1p(t) + (nu+1) t / (2 nu (1+t))
};

// Soft logistic binning cross-entropy for a batch of records.
// log10_p[i] is log10 of the incident overpressure in psi; q is row-major
// [n x 9]. ell[i] = sum_k q_ik ln pi_ik, with derivatives with respect to
// log10_p[i] and to the spread sigma.
struct BinningBatch {
  const double* log10_p;
  const double* q;
  std::size_t n;
  double sigma;
  double* ell;          // [n]
  double* dell_dlog10p; // [n]
  double* dell_dsigma;  // [n]
};

using StudentTFn = void (*)(StudentTBatch&);
using BinningFn = void (*)(BinningBatch&);
// Unnormalized Gaussian kernel sums: out[j] = sum_i exp(-0.5 ((grid[j]-x[i])/h)^2).
using GaussSumFn = void (*)(const double* grid, std::size_t m, const double* x,
                            std::size_t n, double h, double* out);

struct KernelTable {
  Isa isa;
  StudentTFn student_t;
  BinningFn binning;
  GaussSumFn gauss_sum;
};

const KernelTable& scalar_kernels();
// Returns nullptr when the build has no AVX2 variant.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

// Active table. Selected on first call; override with set_active_isa().
const KernelTable& kernels();
// Returns false if the requested ISA is unavailable on this build/CPU.
bool set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

// Fixed binning constants shared by both implementations.
inline constexpr int kBins = 9;
inline constexpr int kEdges = 8;  // finite, positive interior edges
inline constexpr double kEdgePsi[kEdges] = {0.04, 0.16, 0.40, 1.10, 2.10, 3.10, 5.10, 10.0};

}  // namespace yf::simd
