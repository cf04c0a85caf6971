#pragma once

#include <array>
#include <vector>

#include "yieldfusion/dataset.hpp"
#include "yieldfusion/physics.hpp"

namespace yf {

struct ModalityLogLik {
  double value = 0.0;
  std::vector<double> per_observation;
};

// Bin edges of the nine VLM damage classes in psi (outer edges 0 and inf).
inline constexpr std::array<double, 9> kVlmBinPsi = {0.0, 0.095, 0.28, 0.705, 1.55,
                                                     2.55, 4.05, 6.05, 8.0};

ModalityLogLik seismic_loglik(const SeismicObs& obs, double yield_kt, double sigma_m,
                              const MagnitudeLink& link = {});
ModalityLogLik crater_loglik(const CraterObs& obs, double yield_kt, double sigma_c);

// Expected damage percentage from the logistic vulnerability curve.
double sar_vulnerability_mu(double range_m, double yield_kt, double p50_kpa, double k_slope);
ModalityLogLik sar_loglik(const std::vector<SarBox>& boxes, double yield_kt, double p50_kpa,
                          double k_slope, double sigma_sar, double nu);

std::array<double, 9> vlm_bin_probs(double p_psi, double sigma_dex);
double entropy_bits(const std::array<double, 9>& pmf);
// 1/(1+H2) divided by the median over records, clipped to [0.25, 4].
std::vector<double> vlm_weights(const std::vector<VlmRecord>& records);
ModalityLogLik vlm_loglik(const std::vector<VlmRecord>& records, double yield_kt, double sigma_dex);
double vlm_expected_psi(const std::array<double, 9>& pmf);

// ln of the Student-t density at its centre for scale s and dof nu.
double student_t_log_norm(double nu, double scale);
// Logit of a damage percentage after clamping to [0.5, 99.5].
double damage_logit(double damage_pct);

// Gradient-carrying evaluators. Derivatives are with respect to ln Y and the
// natural hyperparameters. Non-finite results signal an out-of-range KB
// evaluation (value -inf).
double seismic_term(double mw_obs, double ln_y, double sigma_m, const MagnitudeLink& link,
                    double* d_ln_y, double* d_sigma);
double crater_term(const CraterObs& obs, double ln_y, double sigma_c, double* d_ln_y,
                   double* d_sigma);

class SarLikelihood {
 public:
  SarLikelihood() = default;
  explicit SarLikelihood(const std::vector<SarBox>& boxes);

  struct Grad {
    double ln_y = 0.0;
    double ln_p50 = 0.0;
    double k = 0.0;
    double sigma_sar = 0.0;
    double nu = 0.0;
  };
  // Mean Student-t log density over boxes. pointwise, when non-null, receives
  // the per-box log densities.
  double eval(double ln_y, double ln_p50, double k, double sigma_sar, double nu, Grad* grad,
              std::vector<double>* pointwise = nullptr) const;
  std::size_t size() const { return z_obs_.size(); }
  // KB regime index per box at this yield (-1 if outside the fit range).
  void regimes(double ln_y, std::vector<int>& out) const;

 private:
  std::vector<double> ln_r_;
  std::vector<double> z_obs_;
};

class VlmLikelihood {
 public:
  VlmLikelihood() = default;
  explicit VlmLikelihood(const std::vector<VlmRecord>& records);

  struct Grad {
    double ln_y = 0.0;
    double sigma_dex = 0.0;
  };
  // Weighted mean cross-entropy. pointwise receives the per-record l_i.
  double eval(double ln_y, double sigma_dex, Grad* grad,
              std::vector<double>* pointwise = nullptr) const;
  std::size_t size() const { return ln_r_.size(); }
  const std::vector<double>& weights() const { return w_; }
  void regimes(double ln_y, std::vector<int>& out) const;

 private:
  std::vector<double> ln_r_;
  std::vector<double> q_;  // row-major [n x 9]
  std::vector<double> w_;  // normalized weights, summing to 1
};

}  // namespace yf
