#pragma once

// Prior densities of the joint inverse problem and the bijections between
// constrained parameters and the unconstrained sampling space.

#include <array>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "json.hpp"

namespace yf {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Normal(mu, sd) restricted to [lo, hi]; either bound may be infinite.
struct TruncatedNormal {
  double mu = 0.0;
  double sd = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool in_support(double x) const { return x >= lo && x <= hi; }
  double log_mass() const;  // ln(Phi(b) - Phi(a))
  double logpdf(double x) const;
  double dlogpdf(double x) const { return -(x - mu) / (sd * sd); }
  double quantile(double u) const;
  double mean() const;
  double stddev() const;
};

// Scalar hyperparameters in sampling order.
enum class Scalar { Yield = 0, SigmaM, SigmaC, P50, KSlope, SigmaSar, Nu, SigmaDex };
inline constexpr int kNumScalars = 8;
const char* scalar_name(Scalar s);

struct PriorConfig {
  // log10 Y ~ TN(mu, sigma, upper = log10 yield_upper_kt)
  double yield_mu_log10 = 0.0;
  double yield_sigma_log10 = 1.0;
  double yield_upper_kt = 2.75;
  TruncatedNormal sigma_m{0.13, 0.01, 0.05, 0.30};
  TruncatedNormal sigma_c{0.08, 0.02, 0.02, 0.15};
  double p50_median_kpa = 60.0;
  double p50_sdlog = 0.8;
  double k_scale = 3.0;
  TruncatedNormal sigma_sar{20.0, 10.0, 5.0, 60.0};
  double nu_shift = 2.0;
  double nu_mean = 5.0;
  TruncatedNormal sigma_dex{0.15, 0.05, 0.05, 0.60};
  double dirichlet_alpha = 1.0;
  double beta_a = 4.0;
  double beta_b = 2.0;

  TruncatedNormal yield_log10_prior() const;

  // Overrides keyed by parameter name, e.g. {"yield_kt": {"sigma": 0.5}, "sigma_m": {"mu": 0.12}}.
  void apply_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ParamVector {
  double yield_kt = 0.3;
  double sigma_m = 0.13;
  double sigma_c = 0.08;
  double p50_kpa = 60.0;
  double k_slope = 2.0;
  double sigma_sar = 20.0;
  double nu = 7.0;
  double sigma_dex = 0.15;
  std::array<double, 4> gamma{0.25, 0.25, 0.25, 0.25};

  double scalar(Scalar s) const;
  double& scalar(Scalar s);
};

// Log prior density of one scalar at its constrained value (density with
// respect to that value; the yield term is a density over Y in kt). Returns
// -inf outside the support. If dlp is non-null it receives d/dx.
double scalar_log_prior(Scalar s, double x, const PriorConfig& cfg, double* dlp = nullptr);

double dirichlet_log_prior(const double* gamma, int m, double alpha, double* dlp_dgamma = nullptr);
double beta_log_prior(double b, double a_shape, double b_shape, double* dlp = nullptr);

// Sum of all nine prior terms with a four-component Dirichlet on gamma.
double log_prior(const ParamVector& p, const PriorConfig& cfg);

// Map from an unconstrained real u to a constrained scalar x.
struct Bijector {
  enum class Kind { ScaledLogit, Log, ShiftedLog };
  Kind kind = Kind::Log;
  double lo = 0.0;
  double hi = 1.0;

  struct Eval {
    double x;
    double log_jac;    // ln |dx/du|
    double dx_du;
    double dlogjac_du;
  };
  Eval forward(double u) const;
  double inverse(double x) const;
};

Bijector bijector_for(Scalar s, const PriorConfig& cfg);
inline Bijector unit_interval_bijector() { return {Bijector::Kind::ScaledLogit, 0.0, 1.0}; }

// Stick-breaking map from m-1 reals to the open m-simplex; returns ln|J|.
double stick_breaking_forward(const double* y, int m, double* gamma);
void stick_breaking_inverse(const double* gamma, int m, double* y);
// Gradient of f(gamma(y)) + ln|J(y)| with respect to y given df/dgamma.
void stick_breaking_gradient(const double* y, int m, const double* df_dgamma, double* out);

// Full 11-coordinate transform: 8 scalars then 3 stick-breaking coordinates.
inline constexpr int kFullDim = 11;
std::array<double, kFullDim> to_unconstrained(const ParamVector& p, const PriorConfig& cfg);
std::pair<ParamVector, double> from_unconstrained(const std::array<double, kFullDim>& u,
                                                  const PriorConfig& cfg);

// Independent draw of one scalar from its prior by inverse CDF.
double sample_scalar_prior(Scalar s, const PriorConfig& cfg, std::mt19937_64& rng);
ParamVector sample_prior(const PriorConfig& cfg, std::mt19937_64& rng);

// Uniform on the open interval (0, 1).
double open_uniform(std::mt19937_64& rng);

}  // namespace yf
