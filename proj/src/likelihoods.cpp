#include "yieldfusion/likelihoods.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "yieldfusion/priors.hpp"
#include "yieldfusion/simd/kernels.hpp"

namespace yf {

namespace {

constexpr double kLn10 = std::numbers::ln10;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kLog10PsiToKpa = std::log10(kPsiToKpa);

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Scratch {
  std::vector<double> a, b, c, d, e;
  void resize(std::size_t n) {
    a.resize(n);
    b.resize(n);
    c.resize(n);
    d.resize(n);
    e.resize(n);
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

double student_t_log_norm(double nu, double scale) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         std::log(scale);
}

double damage_logit(double damage_pct) {
  const double p = std::clamp(damage_pct, kDamageClampLo, kDamageClampHi) / 100.0;
  return std::log(p) - std::log1p(-p);
}

double seismic_term(double mw_obs, double ln_y, double sigma_m, const MagnitudeLink& link,
                    double* d_ln_y, double* d_sigma) {
  const double mw_pred = (ln_y - link.alpha) / link.beta;
  const double r = (mw_obs - mw_pred) / sigma_m;
  if (d_ln_y != nullptr) *d_ln_y = r / (sigma_m * link.beta);
  if (d_sigma != nullptr) *d_sigma = (r * r - 1.0) / sigma_m;
  return -kLogSqrt2Pi - std::log(sigma_m) - 0.5 * r * r;
}

double crater_term(const CraterObs& obs, double ln_y, double sigma_c, double* d_ln_y,
                   double* d_sigma) {
  const double mu = (ln_y / kLn10 + 6.0) / 3.0;
  const double r1 = (std::log10(obs.width_m) - mu) / sigma_c;
  const double r2 = (std::log10(obs.length_m) - mu) / sigma_c;
  if (d_ln_y != nullptr) *d_ln_y = (r1 + r2) / sigma_c / (3.0 * kLn10);
  if (d_sigma != nullptr) *d_sigma = (r1 * r1 + r2 * r2 - 2.0) / sigma_c;
  return 2.0 * (-kLogSqrt2Pi - std::log(sigma_c)) - 0.5 * (r1 * r1 + r2 * r2);
}

ModalityLogLik seismic_loglik(const SeismicObs& obs, double yield_kt, double sigma_m,
                              const MagnitudeLink& link) {
  const double v = seismic_term(obs.mw_obs, std::log(yield_kt), sigma_m, link, nullptr, nullptr);
  return {v, {v}};
}

ModalityLogLik crater_loglik(const CraterObs& obs, double yield_kt, double sigma_c) {
  const double mu = crater_mu_log10(yield_kt);
  ModalityLogLik out;
  for (double d : {obs.width_m, obs.length_m}) {
    const double r = (std::log10(d) - mu) / sigma_c;
    out.per_observation.push_back(-kLogSqrt2Pi - std::log(sigma_c) - 0.5 * r * r);
  }
  out.value = out.per_observation[0] + out.per_observation[1];
  return out;
}

double sar_vulnerability_mu(double range_m, double yield_kt, double p50_kpa, double k_slope) {
  const double p_kpa = psi_to_kpa(kb_incident_overpressure(range_m, yield_kt));
  const double x = k_slope * (std::log10(p_kpa) - std::log10(p50_kpa));
  return 100.0 / (1.0 + std::exp(-x));
}

SarLikelihood::SarLikelihood(const std::vector<SarBox>& boxes) {
  ln_r_.reserve(boxes.size());
  z_obs_.reserve(boxes.size());
  for (const SarBox& b : boxes) {
    ln_r_.push_back(std::log(b.range_m));
    z_obs_.push_back(damage_logit(b.damage_pct));
  }
}

void SarLikelihood::regimes(double ln_y, std::vector<int>& out) const {
  out.clear();
  for (double lr : ln_r_) out.push_back(kb_regime_log(lr, ln_y));
}

double SarLikelihood::eval(double ln_y, double ln_p50, double k, double sigma_sar, double nu,
                           Grad* grad, std::vector<double>* pointwise) const {
  const std::size_t n = z_obs_.size();
  if (n == 0) throw std::invalid_argument("sar likelihood with no boxes");
  Scratch& s = scratch();
  s.resize(n);
  double* z_mu = s.a.data();
  double* dz_dlny = s.b.data();
  double* lp = s.c.data();
  double* dmu = s.d.data();
  double* dz_dk = s.e.data();
  const double log10_p50 = ln_p50 / kLn10;
  for (std::size_t i = 0; i < n; ++i) {
    KbLog kb{};
    if (!kb_log_overpressure(ln_r_[i], ln_y, kb)) return kNegInf;
    const double diff = kb.ln_p / kLn10 + kLog10PsiToKpa - log10_p50;
    dz_dk[i] = diff;
    z_mu[i] = k * diff;
    dz_dlny[i] = k * kb.dln_p_dln_y / kLn10;
  }
  const double scale = sigma_sar / 100.0;
  simd::StudentTBatch batch{z_obs_.data(), z_mu, n, scale, nu, student_t_log_norm(nu, scale), lp, dmu};
  simd::kernels().student_t(batch);

  double sum = 0.0;
  double g_lny = 0.0;
  double g_k = 0.0;
  double g_mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += lp[i];
    g_lny += dmu[i] * dz_dlny[i];
    g_k += dmu[i] * dz_dk[i];
    g_mu += dmu[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad != nullptr) {
    grad->ln_y = g_lny * inv_n;
    grad->k = g_k * inv_n;
    grad->ln_p50 = -g_mu * inv_n * k / kLn10;
    grad->sigma_sar = (batch.sum_dscale * inv_n - 1.0 / scale) / 100.0;
    const double dnorm = 0.5 * boost::math::digamma(0.5 * (nu + 1.0)) -
                         0.5 * boost::math::digamma(0.5 * nu) - 0.5 / nu;
    grad->nu = dnorm + batch.sum_dnu * inv_n;
  }
  if (pointwise != nullptr) pointwise->assign(lp, lp + n);
  return sum * inv_n;
}

ModalityLogLik sar_loglik(const std::vector<SarBox>& boxes, double yield_kt, double p50_kpa,
                          double k_slope, double sigma_sar, double nu) {
  if (boxes.empty()) throw std::invalid_argument("sar_loglik: empty box list");
  if (!(nu > 2.0)) throw std::invalid_argument("sar_loglik: nu must exceed 2");
  SarLikelihood lik(boxes);
  ModalityLogLik out;
  out.value = lik.eval(std::log(yield_kt), std::log(p50_kpa), k_slope, sigma_sar, nu, nullptr,
                       &out.per_observation);
  if (!std::isfinite(out.value)) out.per_observation.assign(boxes.size(), kNegInf);
  return out;
}

std::array<double, 9> vlm_bin_probs(double p_psi, double sigma_dex) {
  const double l = std::log10(p_psi);
  const double inf = std::numeric_limits<double>::infinity();
  double x[simd::kEdges + 2];
  x[0] = -inf;
  for (int k = 0; k < simd::kEdges; ++k) x[k + 1] = (std::log10(simd::kEdgePsi[k]) - l) / sigma_dex;
  x[simd::kEdges + 1] = inf;
  // sigma(b) - sigma(a) = sigma(b) sigma(-a) (1 - e^(a-b)), free of cancellation in both tails.
  auto sig = [](double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); };
  std::array<double, 9> pi{};
  for (int k = 0; k < 9; ++k) {
    const double a = x[k];
    const double b = x[k + 1];
    const double tail = std::isinf(a) || std::isinf(b) ? 1.0 : -std::expm1(a - b);
    pi[k] = sig(b) * sig(-a) * tail;
  }
  return pi;
}

double entropy_bits(const std::array<double, 9>& pmf) {
  double h = 0.0;
  for (double q : pmf)
    if (q > 0.0) h -= q * std::log2(q);
  return h;
}

std::vector<double> vlm_weights(const std::vector<VlmRecord>& records) {
  std::vector<double> w;
  w.reserve(records.size());
  for (const VlmRecord& r : records) w.push_back(1.0 / (1.0 + entropy_bits(r.pmf)));
  if (w.empty()) return w;
  const double med = median_of(w);
  for (double& v : w) v = std::clamp(v / med, 0.25, 4.0);
  return w;
}

VlmLikelihood::VlmLikelihood(const std::vector<VlmRecord>& records) {
  w_ = vlm_weights(records);
  double total = 0.0;
  for (double v : w_) total += v;
  for (double& v : w_) v /= total;
  for (const VlmRecord& r : records) {
    ln_r_.push_back(std::log(r.range_m));
    q_.insert(q_.end(), r.pmf.begin(), r.pmf.end());
  }
}

void VlmLikelihood::regimes(double ln_y, std::vector<int>& out) const {
  out.clear();
  for (double lr : ln_r_) out.push_back(kb_regime_log(lr, ln_y));
}

double VlmLikelihood::eval(double ln_y, double sigma_dex, Grad* grad,
                           std::vector<double>* pointwise) const {
  const std::size_t n = ln_r_.size();
  if (n == 0) throw std::invalid_argument("vlm likelihood with no records");
  Scratch& s = scratch();
  s.resize(n);
  double* l10p = s.a.data();
  double* dl_dlny = s.b.data();
  double* ell = s.c.data();
  double* dell = s.d.data();
  double* dsig = s.e.data();
  for (std::size_t i = 0; i < n; ++i) {
    KbLog kb{};
    if (!kb_log_overpressure(ln_r_[i], ln_y, kb)) return kNegInf;
    l10p[i] = kb.ln_p / kLn10;
    dl_dlny[i] = kb.dln_p_dln_y / kLn10;
  }
  simd::BinningBatch batch{l10p, q_.data(), n, sigma_dex, ell, dell, dsig};
  simd::kernels().binning(batch);
  double v = 0.0, g_lny = 0.0, g_sig = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v += w_[i] * ell[i];
    g_lny += w_[i] * dell[i] * dl_dlny[i];
    g_sig += w_[i] * dsig[i];
  }
  if (grad != nullptr) {
    grad->ln_y = g_lny;
    grad->sigma_dex = g_sig;
  }
  if (pointwise != nullptr) pointwise->assign(ell, ell + n);
  return v;
}

ModalityLogLik vlm_loglik(const std::vector<VlmRecord>& records, double yield_kt, double sigma_dex) {
  if (records.empty()) throw std::invalid_argument("vlm_loglik: empty record list");
  VlmLikelihood lik(records);
  ModalityLogLik out;
  out.value = lik.eval(std::log(yield_kt), sigma_dex, nullptr, &out.per_observation);
  if (!std::isfinite(out.value)) out.per_observation.assign(records.size(), kNegInf);
  return out;
}

double vlm_expected_psi(const std::array<double, 9>& pmf) {
  double e = 0.0;
  for (int k = 0; k < 9; ++k) e += pmf[k] * kVlmBinPsi[k];
  return e;
}

}  // namespace yf
