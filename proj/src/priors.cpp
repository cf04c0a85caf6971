#include "yieldfusion/priors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace yf {

namespace {

constexpr double kLn10 = std::numbers::ln10;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double phi(double x) {
  if (!std::isfinite(x)) return 0.0;
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

double big_phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double normal_quantile(double p) {
  p = std::clamp(p, 1e-300, 1.0 - 1e-16);
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace

double TruncatedNormal::log_mass() const {
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  // Use the upper tail when both bounds sit above the mean.
  if (a > 0.0) return std::log(big_phi(-a) - big_phi(-b));
  return std::log(big_phi(b) - big_phi(a));
}

double TruncatedNormal::logpdf(double x) const {
  if (!in_support(x)) return kNegInf;
  const double z = (x - mu) / sd;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sd) - log_mass();
}

double TruncatedNormal::quantile(double u) const {
  const double pa = big_phi((lo - mu) / sd);
  const double pb = big_phi((hi - mu) / sd);
  const double x = mu + sd * normal_quantile(pa + u * (pb - pa));
  return std::clamp(x, lo, hi);
}

double TruncatedNormal::mean() const {
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  const double z = std::exp(log_mass());
  return mu + sd * (phi(a) - phi(b)) / z;
}

double TruncatedNormal::stddev() const {
  const double a = (lo - mu) / sd;
  const double b = (hi - mu) / sd;
  const double z = std::exp(log_mass());
  const double aphi = std::isfinite(a) ? a * phi(a) : 0.0;
  const double bphi = std::isfinite(b) ? b * phi(b) : 0.0;
  const double d = (phi(a) - phi(b)) / z;
  return sd * std::sqrt(1.0 + (aphi - bphi) / z - d * d);
}

const char* scalar_name(Scalar s) {
  switch (s) {
    case Scalar::Yield:
      return "yield_kt";
    case Scalar::SigmaM:
      return "sigma_m";
    case Scalar::SigmaC:
      return "sigma_c";
    case Scalar::P50:
      return "p50_kpa";
    case Scalar::KSlope:
      return "k_slope";
    case Scalar::SigmaSar:
      return "sigma_sar";
    case Scalar::Nu:
      return "nu";
    case Scalar::SigmaDex:
      return "sigma_dex";
  }
  return "unknown";
}

TruncatedNormal PriorConfig::yield_log10_prior() const {
  return {yield_mu_log10, yield_sigma_log10, -std::numeric_limits<double>::infinity(),
          std::log10(yield_upper_kt)};
}

namespace {

void read_tn(const nlohmann::json& j, TruncatedNormal& tn) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const double v = it.value().get<double>();
    if (it.key() == "mu")
      tn.mu = v;
    else if (it.key() == "sd")
      tn.sd = v;
    else if (it.key() == "lo")
      tn.lo = v;
    else if (it.key() == "hi")
      tn.hi = v;
    else
      throw std::invalid_argument("unknown prior field '" + it.key() + "'");
  }
  if (!(tn.sd > 0.0) || !(tn.lo < tn.hi)) throw std::invalid_argument("invalid truncated normal prior");
}

nlohmann::json tn_json(const TruncatedNormal& tn) {
  return {{"mu", tn.mu}, {"sd", tn.sd}, {"lo", tn.lo}, {"hi", tn.hi}};
}

template <class F>
void each_field(const nlohmann::json& j, F&& f) {
  if (!j.is_object()) throw std::invalid_argument("prior override must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number())
      throw std::invalid_argument("prior field '" + it.key() + "' must be a number");
    f(it.key(), it.value().get<double>());
  }
}

}  // namespace

void PriorConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("prior config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const nlohmann::json& v = it.value();
    auto bad = [&](const std::string& f) {
      throw std::invalid_argument("unknown field '" + f + "' in prior '" + key + "'");
    };
    if (key == "yield_kt") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "mu_log10")
          yield_mu_log10 = x;
        else if (f == "sigma_log10" || f == "sigma")
          yield_sigma_log10 = x;
        else if (f == "upper")
          yield_upper_kt = x;
        else
          bad(f);
      });
    } else if (key == "sigma_m") {
      read_tn(v, sigma_m);
    } else if (key == "sigma_c") {
      read_tn(v, sigma_c);
    } else if (key == "sigma_sar") {
      read_tn(v, sigma_sar);
    } else if (key == "sigma_dex") {
      read_tn(v, sigma_dex);
    } else if (key == "p50_kpa") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "median")
          p50_median_kpa = x;
        else if (f == "sdlog")
          p50_sdlog = x;
        else
          bad(f);
      });
    } else if (key == "k_slope") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "scale")
          k_scale = x;
        else
          bad(f);
      });
    } else if (key == "nu") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "shift")
          nu_shift = x;
        else if (f == "mean")
          nu_mean = x;
        else
          bad(f);
      });
    } else if (key == "gamma") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "alpha")
          dirichlet_alpha = x;
        else
          bad(f);
      });
    } else if (key == "beta") {
      each_field(v, [&](const std::string& f, double x) {
        if (f == "a")
          beta_a = x;
        else if (f == "b")
          beta_b = x;
        else
          bad(f);
      });
    } else {
      throw std::invalid_argument("unknown prior '" + key + "'");
    }
  }
  if (!(yield_sigma_log10 > 0.0) || !(yield_upper_kt > 0.0) || !(p50_median_kpa > 0.0) ||
      !(p50_sdlog > 0.0) || !(k_scale > 0.0) || !(nu_mean > 0.0) || !(dirichlet_alpha > 0.0) ||
      !(beta_a > 0.0) || !(beta_b > 0.0))
    throw std::invalid_argument("prior scale parameters must be positive");
}

nlohmann::json PriorConfig::to_json() const {
  return {{"yield_kt",
           {{"mu_log10", yield_mu_log10}, {"sigma_log10", yield_sigma_log10}, {"upper", yield_upper_kt}}},
          {"sigma_m", tn_json(sigma_m)},
          {"sigma_c", tn_json(sigma_c)},
          {"p50_kpa", {{"median", p50_median_kpa}, {"sdlog", p50_sdlog}}},
          {"k_slope", {{"scale", k_scale}}},
          {"sigma_sar", tn_json(sigma_sar)},
          {"nu", {{"shift", nu_shift}, {"mean", nu_mean}}},
          {"sigma_dex", tn_json(sigma_dex)},
          {"gamma", {{"alpha", dirichlet_alpha}}},
          {"beta", {{"a", beta_a}, {"b", beta_b}}}};
}

double ParamVector::scalar(Scalar s) const { return const_cast<ParamVector*>(this)->scalar(s); }

double& ParamVector::scalar(Scalar s) {
  switch (s) {
    case Scalar::Yield:
      return yield_kt;
    case Scalar::SigmaM:
      return sigma_m;
    case Scalar::SigmaC:
      return sigma_c;
    case Scalar::P50:
      return p50_kpa;
    case Scalar::KSlope:
      return k_slope;
    case Scalar::SigmaSar:
      return sigma_sar;
    case Scalar::Nu:
      return nu;
    case Scalar::SigmaDex:
      return sigma_dex;
  }
  throw std::logic_error("bad scalar index");
}

double scalar_log_prior(Scalar s, double x, const PriorConfig& cfg, double* dlp) {
  if (!std::isfinite(x)) return kNegInf;
  double lp = kNegInf;
  double d = 0.0;
  switch (s) {
    case Scalar::Yield: {
      if (!(x > 0.0) || x > cfg.yield_upper_kt) return kNegInf;
      const TruncatedNormal tn = cfg.yield_log10_prior();
      const double l = std::log10(x);
      lp = tn.logpdf(std::min(l, tn.hi)) - std::log(x * kLn10);
      d = tn.dlogpdf(l) / (x * kLn10) - 1.0 / x;
      break;
    }
    case Scalar::SigmaM:
      lp = cfg.sigma_m.logpdf(x);
      d = cfg.sigma_m.dlogpdf(x);
      break;
    case Scalar::SigmaC:
      lp = cfg.sigma_c.logpdf(x);
      d = cfg.sigma_c.dlogpdf(x);
      break;
    case Scalar::SigmaSar:
      lp = cfg.sigma_sar.logpdf(x);
      d = cfg.sigma_sar.dlogpdf(x);
      break;
    case Scalar::SigmaDex:
      lp = cfg.sigma_dex.logpdf(x);
      d = cfg.sigma_dex.dlogpdf(x);
      break;
    case Scalar::P50: {
      if (!(x > 0.0)) return kNegInf;
      const double s2 = cfg.p50_sdlog * cfg.p50_sdlog;
      const double r = std::log(x) - std::log(cfg.p50_median_kpa);
      lp = -std::log(x) - std::log(cfg.p50_sdlog) - kLogSqrt2Pi - 0.5 * r * r / s2;
      d = (-1.0 - r / s2) / x;
      break;
    }
    case Scalar::KSlope: {
      if (!(x >= 0.0)) return kNegInf;
      const double sc = cfg.k_scale;
      lp = 0.5 * std::log(2.0 / std::numbers::pi) - std::log(sc) - 0.5 * x * x / (sc * sc);
      d = -x / (sc * sc);
      break;
    }
    case Scalar::Nu: {
      if (!(x > cfg.nu_shift)) return kNegInf;
      const double rate = 1.0 / cfg.nu_mean;
      lp = std::log(rate) - rate * (x - cfg.nu_shift);
      d = -rate;
      break;
    }
  }
  if (dlp != nullptr) *dlp = d;
  return lp;
}

double dirichlet_log_prior(const double* gamma, int m, double alpha, double* dlp_dgamma) {
  double sum = 0.0;
  double lp = std::lgamma(m * alpha) - m * std::lgamma(alpha);
  for (int i = 0; i < m; ++i) {
    if (!(gamma[i] > 0.0) || !(gamma[i] < 1.0 || m == 1)) return kNegInf;
    sum += gamma[i];
    lp += (alpha - 1.0) * std::log(gamma[i]);
    if (dlp_dgamma != nullptr) dlp_dgamma[i] = (alpha - 1.0) / gamma[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) return kNegInf;
  return lp;
}

double beta_log_prior(double b, double a_shape, double b_shape, double* dlp) {
  if (!(b > 0.0 && b < 1.0)) return kNegInf;
  if (dlp != nullptr) *dlp = (a_shape - 1.0) / b - (b_shape - 1.0) / (1.0 - b);
  return std::lgamma(a_shape + b_shape) - std::lgamma(a_shape) - std::lgamma(b_shape) +
         (a_shape - 1.0) * std::log(b) + (b_shape - 1.0) * std::log1p(-b);
}

double log_prior(const ParamVector& p, const PriorConfig& cfg) {
  double lp = 0.0;
  for (int i = 0; i < kNumScalars; ++i) {
    const Scalar s = static_cast<Scalar>(i);
    lp += scalar_log_prior(s, p.scalar(s), cfg);
  }
  lp += dirichlet_log_prior(p.gamma.data(), 4, cfg.dirichlet_alpha);
  return lp;
}

Bijector::Eval Bijector::forward(double u) const {
  Eval e{};
  switch (kind) {
    case Kind::ScaledLogit: {
      const double s = sigmoid(u);
      const double w = hi - lo;
      e.x = lo + w * s;
      e.log_jac = std::log(w) - softplus(-u) - softplus(u);
      e.dx_du = w * s * (1.0 - s);
      e.dlogjac_du = 1.0 - 2.0 * s;
      break;
    }
    case Kind::Log:
      e.x = std::exp(u);
      e.log_jac = u;
      e.dx_du = e.x;
      e.dlogjac_du = 1.0;
      break;
    case Kind::ShiftedLog:
      e.x = lo + std::exp(u);
      e.log_jac = u;
      e.dx_du = std::exp(u);
      e.dlogjac_du = 1.0;
      break;
  }
  return e;
}

double Bijector::inverse(double x) const {
  switch (kind) {
    case Kind::ScaledLogit:
      return std::log(x - lo) - std::log(hi - x);
    case Kind::Log:
      return std::log(x);
    case Kind::ShiftedLog:
      return std::log(x - lo);
  }
  return 0.0;
}

Bijector bijector_for(Scalar s, const PriorConfig& cfg) {
  using K = Bijector::Kind;
  switch (s) {
    case Scalar::Yield:
      return {K::ScaledLogit, 0.0, cfg.yield_upper_kt};
    case Scalar::SigmaM:
      return {K::ScaledLogit, cfg.sigma_m.lo, cfg.sigma_m.hi};
    case Scalar::SigmaC:
      return {K::ScaledLogit, cfg.sigma_c.lo, cfg.sigma_c.hi};
    case Scalar::SigmaSar:
      return {K::ScaledLogit, cfg.sigma_sar.lo, cfg.sigma_sar.hi};
    case Scalar::SigmaDex:
      return {K::ScaledLogit, cfg.sigma_dex.lo, cfg.sigma_dex.hi};
    case Scalar::P50:
    case Scalar::KSlope:
      return {K::Log, 0.0, 0.0};
    case Scalar::Nu:
      return {K::ShiftedLog, cfg.nu_shift, 0.0};
  }
  throw std::logic_error("bad scalar index");
}

double stick_breaking_forward(const double* y, int m, double* gamma) {
  double stick = 1.0;
  double log_jac = 0.0;
  for (int k = 0; k < m - 1; ++k) {
    const double z = sigmoid(y[k]);
    gamma[k] = stick * z;
    log_jac += std::log(stick) - softplus(-y[k]) - softplus(y[k]);
    stick *= 1.0 - z;
  }
  gamma[m - 1] = stick;
  return log_jac;
}

void stick_breaking_inverse(const double* gamma, int m, double* y) {
  double stick = 1.0;
  for (int k = 0; k < m - 1; ++k) {
    const double z = gamma[k] / stick;
    y[k] = std::log(z) - std::log1p(-z);
    stick -= gamma[k];
  }
}

void stick_breaking_gradient(const double* y, int m, const double* df_dgamma, double* out) {
  double z[4];
  double stick[5];
  stick[0] = 1.0;
  for (int k = 0; k < m - 1; ++k) {
    z[k] = sigmoid(y[k]);
    stick[k + 1] = stick[k] * (1.0 - z[k]);
  }
  double g_next = df_dgamma[m - 1];  // adjoint of stick[k+1]
  for (int k = m - 2; k >= 0; --k) {
    const double dz = (df_dgamma[k] - g_next) * stick[k];
    out[k] = dz * z[k] * (1.0 - z[k]) + (1.0 - 2.0 * z[k]);
    g_next = df_dgamma[k] * z[k] + g_next * (1.0 - z[k]) + 1.0 / stick[k];
  }
}

std::array<double, kFullDim> to_unconstrained(const ParamVector& p, const PriorConfig& cfg) {
  std::array<double, kFullDim> u{};
  for (int i = 0; i < kNumScalars; ++i) {
    const Scalar s = static_cast<Scalar>(i);
    const double x = p.scalar(s);
    if (!std::isfinite(x)) throw std::invalid_argument("to_unconstrained: non-finite parameter");
    u[i] = bijector_for(s, cfg).inverse(x);
  }
  stick_breaking_inverse(p.gamma.data(), 4, u.data() + kNumScalars);
  for (double v : u)
    if (!std::isfinite(v)) throw std::invalid_argument("to_unconstrained: parameter outside support");
  return u;
}

std::pair<ParamVector, double> from_unconstrained(const std::array<double, kFullDim>& u,
                                                  const PriorConfig& cfg) {
  for (double v : u)
    if (!std::isfinite(v)) throw std::invalid_argument("from_unconstrained: non-finite input");
  ParamVector p;
  double log_jac = 0.0;
  for (int i = 0; i < kNumScalars; ++i) {
    const Scalar s = static_cast<Scalar>(i);
    const Bijector::Eval e = bijector_for(s, cfg).forward(u[i]);
    p.scalar(s) = e.x;
    log_jac += e.log_jac;
  }
  log_jac += stick_breaking_forward(u.data() + kNumScalars, 4, p.gamma.data());
  return {p, log_jac};
}

double open_uniform(std::mt19937_64& rng) {
  // 53 random bits mapped to the midpoints of a 2^-53 grid.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double sample_scalar_prior(Scalar s, const PriorConfig& cfg, std::mt19937_64& rng) {
  const double u = open_uniform(rng);
  switch (s) {
    case Scalar::Yield:
      return std::min(std::pow(10.0, cfg.yield_log10_prior().quantile(u)), cfg.yield_upper_kt);
    case Scalar::SigmaM:
      return cfg.sigma_m.quantile(u);
    case Scalar::SigmaC:
      return cfg.sigma_c.quantile(u);
    case Scalar::SigmaSar:
      return cfg.sigma_sar.quantile(u);
    case Scalar::SigmaDex:
      return cfg.sigma_dex.quantile(u);
    case Scalar::P50:
      return cfg.p50_median_kpa * std::exp(cfg.p50_sdlog * normal_quantile(u));
    case Scalar::KSlope:
      return cfg.k_scale * normal_quantile(0.5 + 0.5 * u);
    case Scalar::Nu:
      return cfg.nu_shift - cfg.nu_mean * std::log(u);
  }
  throw std::logic_error("bad scalar index");
}

ParamVector sample_prior(const PriorConfig& cfg, std::mt19937_64& rng) {
  ParamVector p;
  for (int i = 0; i < kNumScalars; ++i) {
    const Scalar s = static_cast<Scalar>(i);
    p.scalar(s) = sample_scalar_prior(s, cfg, rng);
  }
  std::gamma_distribution<double> g(cfg.dirichlet_alpha, 1.0);
  double total = 0.0;
  for (double& v : p.gamma) {
    v = std::max(g(rng), 1e-300);
    total += v;
  }
  for (double& v : p.gamma) v /= total;
  return p;
}

}  // namespace yf
