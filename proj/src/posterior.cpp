#include "yieldfusion/posterior.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace yf {

namespace {

constexpr double kLn10 = std::numbers::ln10;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

FusionMethod FusionMethod::fixed(const std::array<double, 4>& w) {
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw std::invalid_argument("fixed weights must be nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("fixed weights must sum to 1");
  return {FusionKind::FixedGamma, w};
}

std::string FusionMethod::name() const {
  switch (kind) {
    case FusionKind::PlainProduct:
      return "plain";
    case FusionKind::SingleTemperature:
      return "single";
    case FusionKind::FixedGamma:
      return "fixed";
    case FusionKind::DirichletGamma:
      return "dirichlet";
    case FusionKind::BMA:
      return "bma";
    case FusionKind::CovarianceIntersection:
      return "ci";
  }
  return "unknown";
}

FusionMethod parse_method(const std::string& name) {
  if (name == "plain") return FusionMethod::plain();
  if (name == "single") return FusionMethod::single();
  if (name == "fixed") return {FusionKind::FixedGamma, {0.25, 0.25, 0.25, 0.25}};
  if (name == "dirichlet") return FusionMethod::dirichlet();
  if (name == "bma") return FusionMethod::bma();
  if (name == "ci") return FusionMethod::ci();
  throw std::invalid_argument("unknown fusion method '" + name +
                              "' (expected plain, single, fixed, dirichlet, bma, ci)");
}

JointDensity::JointDensity(Dataset data, FusionMethod method, PriorConfig prior, MagnitudeLink link)
    : data_(std::move(data)), method_(method), prior_(prior), link_(link) {
  if (!method_.is_joint())
    throw UnsupportedMethod("fusion method '" + method_.name() +
                            "' is a post-hoc fuser of single-modality fits, not a joint density");
  if (method_.kind == FusionKind::FixedGamma) method_ = FusionMethod::fixed(method_.weights);
  for (Modality m : kAllModalities) {
    present_[static_cast<int>(m)] = data_.has(m);
    if (data_.has(m)) mods_.push_back(m);
  }
  if (mods_.empty()) throw std::invalid_argument("joint density needs at least one modality");

  auto add = [&](Scalar s) { slots_.push_back({s, bijector_for(s, prior_)}); };
  if (present(Modality::Seismic)) add(Scalar::SigmaM);
  if (present(Modality::Crater)) add(Scalar::SigmaC);
  if (present(Modality::Sar)) {
    add(Scalar::P50);
    add(Scalar::KSlope);
    add(Scalar::SigmaSar);
    add(Scalar::Nu);
    sar_ = SarLikelihood(data_.sar);
  }
  if (present(Modality::Vlm)) {
    add(Scalar::SigmaDex);
    vlm_ = VlmLikelihood(data_.vlm);
  }
  weight_offset_ = 1 + static_cast<int>(slots_.size());
  if (method_.kind == FusionKind::DirichletGamma)
    n_weight_coords_ = static_cast<int>(mods_.size()) - 1;
  else if (method_.kind == FusionKind::SingleTemperature)
    n_weight_coords_ = 1;
  dim_ = weight_offset_ + n_weight_coords_;

  columns_.push_back(scalar_name(Scalar::Yield));
  for (const Slot& s : slots_) columns_.push_back(scalar_name(s.scalar));
  if (method_.kind == FusionKind::DirichletGamma)
    for (Modality m : mods_) columns_.push_back(std::string("gamma_") + modality_name(m));
  if (method_.kind == FusionKind::SingleTemperature) columns_.push_back("beta");
}

double JointDensity::log_density(const std::vector<double>& u, std::vector<double>* grad) const {
  if (static_cast<int>(u.size()) != dim_) throw std::invalid_argument("log_density: wrong dimension");
  if (grad != nullptr) grad->assign(dim_, 0.0);
  return log_density(u.data(), grad != nullptr ? grad->data() : nullptr);
}

double JointDensity::log_density(const double* u, double* grad) const {
  for (int i = 0; i < dim_; ++i)
    if (!std::isfinite(u[i])) return kNegInf;

  // Yield, handled in log space so tiny yields stay representable.
  const double s0 = sigmoid(u[0]);
  const double ln_upper = std::log(prior_.yield_upper_kt);
  const double ln_y = ln_upper - softplus(-u[0]);
  const TruncatedNormal ytn = prior_.yield_log10_prior();
  const double l10 = std::min(ln_y / kLn10, ytn.hi);
  double total = ytn.logpdf(l10) - ln_y - std::log(kLn10);
  total += ln_upper - softplus(-u[0]) - softplus(u[0]);
  double g_lny = ytn.dlogpdf(l10) / kLn10 - 1.0;

  // Hyperparameters.
  double x[kNumScalars] = {};
  double gx[kNumScalars] = {};
  double dxdu[kNumScalars] = {};
  double dlj[kNumScalars] = {};
  for (std::size_t j = 0; j < slots_.size(); ++j) {
    const int si = static_cast<int>(slots_[j].scalar);
    const Bijector::Eval e = slots_[j].bij.forward(u[1 + j]);
    x[si] = e.x;
    dxdu[si] = e.dx_du;
    dlj[si] = e.dlogjac_du;
    double d = 0.0;
    const double lp = scalar_log_prior(slots_[j].scalar, e.x, prior_, &d);
    if (!std::isfinite(lp)) return kNegInf;
    total += lp + e.log_jac;
    gx[si] = d;
  }

  // Likelihood exponents.
  std::array<double, 4> t{};
  std::array<double, 4> gamma_present{};
  const int m = static_cast<int>(mods_.size());
  double beta = 0.0;
  Bijector::Eval beta_eval{};
  switch (method_.kind) {
    case FusionKind::PlainProduct:
      for (Modality md : mods_) t[static_cast<int>(md)] = 1.0;
      break;
    case FusionKind::FixedGamma:
      for (Modality md : mods_) t[static_cast<int>(md)] = method_.weights[static_cast<int>(md)];
      break;
    case FusionKind::SingleTemperature: {
      beta_eval = unit_interval_bijector().forward(u[weight_offset_]);
      beta = beta_eval.x;
      const double lp = beta_log_prior(beta, prior_.beta_a, prior_.beta_b);
      if (!std::isfinite(lp)) return kNegInf;
      total += lp + beta_eval.log_jac;
      for (Modality md : mods_) t[static_cast<int>(md)] = beta;
      break;
    }
    case FusionKind::DirichletGamma: {
      if (m == 1) {
        gamma_present[0] = 1.0;
      } else {
        total += stick_breaking_forward(u + weight_offset_, m, gamma_present.data());
        const double lp = dirichlet_log_prior(gamma_present.data(), m, prior_.dirichlet_alpha);
        if (!std::isfinite(lp)) return kNegInf;
        total += lp;
      }
      for (int i = 0; i < m; ++i) t[static_cast<int>(mods_[i])] = gamma_present[i];
      break;
    }
    default:
      throw UnsupportedMethod("unsupported fusion method");
  }

  // Likelihoods.
  std::array<double, 4> lik{};
  if (present(Modality::Seismic)) {
    double dl = 0.0, ds = 0.0;
    const double v = seismic_term(data_.seismic->mw_obs, ln_y, x[static_cast<int>(Scalar::SigmaM)], link_,
                                  &dl, &ds);
    const double tw = t[0];
    lik[0] = v;
    g_lny += tw * dl;
    gx[static_cast<int>(Scalar::SigmaM)] += tw * ds;
  }
  if (present(Modality::Crater)) {
    double dl = 0.0, ds = 0.0;
    const double v = crater_term(*data_.crater, ln_y, x[static_cast<int>(Scalar::SigmaC)], &dl, &ds);
    const double tw = t[1];
    lik[1] = v;
    g_lny += tw * dl;
    gx[static_cast<int>(Scalar::SigmaC)] += tw * ds;
  }
  if (present(Modality::Sar)) {
    SarLikelihood::Grad g;
    const double p50 = x[static_cast<int>(Scalar::P50)];
    const double v = sar_.eval(ln_y, std::log(p50), x[static_cast<int>(Scalar::KSlope)],
                               x[static_cast<int>(Scalar::SigmaSar)], x[static_cast<int>(Scalar::Nu)],
                               grad != nullptr ? &g : nullptr);
    if (!std::isfinite(v)) return kNegInf;
    const double tw = t[2];
    lik[2] = v;
    g_lny += tw * g.ln_y;
    gx[static_cast<int>(Scalar::P50)] += tw * g.ln_p50 / p50;
    gx[static_cast<int>(Scalar::KSlope)] += tw * g.k;
    gx[static_cast<int>(Scalar::SigmaSar)] += tw * g.sigma_sar;
    gx[static_cast<int>(Scalar::Nu)] += tw * g.nu;
  }
  if (present(Modality::Vlm)) {
    VlmLikelihood::Grad g;
    const double v = vlm_.eval(ln_y, x[static_cast<int>(Scalar::SigmaDex)], grad != nullptr ? &g : nullptr);
    if (!std::isfinite(v)) return kNegInf;
    const double tw = t[3];
    lik[3] = v;
    g_lny += tw * g.ln_y;
    gx[static_cast<int>(Scalar::SigmaDex)] += tw * g.sigma_dex;
  }
  for (Modality md : mods_) total += t[static_cast<int>(md)] * lik[static_cast<int>(md)];
  if (!std::isfinite(total)) return kNegInf;

  if (grad != nullptr) {
    grad[0] = g_lny * (1.0 - s0) + (1.0 - 2.0 * s0);
    for (std::size_t j = 0; j < slots_.size(); ++j) {
      const int si = static_cast<int>(slots_[j].scalar);
      grad[1 + j] = gx[si] * dxdu[si] + dlj[si];
    }
    if (method_.kind == FusionKind::SingleTemperature) {
      double dprior = 0.0;
      beta_log_prior(beta, prior_.beta_a, prior_.beta_b, &dprior);
      double sum_l = 0.0;
      for (Modality md : mods_) sum_l += lik[static_cast<int>(md)];
      grad[weight_offset_] = (sum_l + dprior) * beta_eval.dx_du + beta_eval.dlogjac_du;
    } else if (method_.kind == FusionKind::DirichletGamma && m > 1) {
      double df[4] = {};
      dirichlet_log_prior(gamma_present.data(), m, prior_.dirichlet_alpha, df);
      for (int i = 0; i < m; ++i) df[i] += lik[static_cast<int>(mods_[i])];
      stick_breaking_gradient(u + weight_offset_, m, df, grad + weight_offset_);
    }
  }
  return total;
}

ParamVector JointDensity::constrain(const double* u) const {
  ParamVector p;
  for (int i = 0; i < kNumScalars; ++i) p.scalar(static_cast<Scalar>(i)) = kNaN;
  p.yield_kt = std::exp(std::log(prior_.yield_upper_kt) - softplus(-u[0]));
  for (std::size_t j = 0; j < slots_.size(); ++j) p.scalar(slots_[j].scalar) = slots_[j].bij.forward(u[1 + j]).x;
  p.gamma = {0.0, 0.0, 0.0, 0.0};
  const int m = static_cast<int>(mods_.size());
  switch (method_.kind) {
    case FusionKind::PlainProduct:
      for (Modality md : mods_) p.gamma[static_cast<int>(md)] = 1.0;
      break;
    case FusionKind::FixedGamma:
      for (Modality md : mods_) p.gamma[static_cast<int>(md)] = method_.weights[static_cast<int>(md)];
      break;
    case FusionKind::SingleTemperature: {
      const double b = sigmoid(u[weight_offset_]);
      for (Modality md : mods_) p.gamma[static_cast<int>(md)] = b;
      break;
    }
    case FusionKind::DirichletGamma: {
      std::array<double, 4> g{1.0, 0.0, 0.0, 0.0};
      if (m > 1) stick_breaking_forward(u + weight_offset_, m, g.data());
      for (int i = 0; i < m; ++i) p.gamma[static_cast<int>(mods_[i])] = g[i];
      break;
    }
    default:
      break;
  }
  return p;
}

double JointDensity::temperature(const double* u) const {
  if (method_.kind != FusionKind::SingleTemperature) return kNaN;
  return sigmoid(u[weight_offset_]);
}

std::vector<double> JointDensity::unconstrain(const ParamVector& p, double beta) const {
  std::vector<double> u(dim_, 0.0);
  u[0] = bijector_for(Scalar::Yield, prior_).inverse(p.yield_kt);
  for (std::size_t j = 0; j < slots_.size(); ++j) u[1 + j] = slots_[j].bij.inverse(p.scalar(slots_[j].scalar));
  const int m = static_cast<int>(mods_.size());
  if (method_.kind == FusionKind::DirichletGamma && m > 1) {
    double g[4] = {};
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      g[i] = p.gamma[static_cast<int>(mods_[i])];
      s += g[i];
    }
    for (int i = 0; i < m; ++i) g[i] /= s;
    stick_breaking_inverse(g, m, u.data() + weight_offset_);
  } else if (method_.kind == FusionKind::SingleTemperature) {
    u[weight_offset_] = unit_interval_bijector().inverse(beta);
  }
  return u;
}

std::vector<double> JointDensity::columns(const double* u) const {
  const ParamVector p = constrain(u);
  std::vector<double> c;
  c.reserve(columns_.size());
  c.push_back(p.yield_kt);
  for (const Slot& s : slots_) c.push_back(p.scalar(s.scalar));
  if (method_.kind == FusionKind::DirichletGamma)
    for (Modality md : mods_) c.push_back(p.gamma[static_cast<int>(md)]);
  if (method_.kind == FusionKind::SingleTemperature) c.push_back(temperature(u));
  return c;
}

int JointDensity::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> JointDensity::initial_point(std::mt19937_64& rng, int max_tries) const {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    ParamVector p = sample_prior(prior_, rng);
    double beta = 0.5;
    if (method_.kind == FusionKind::SingleTemperature) {
      std::gamma_distribution<double> ga(prior_.beta_a, 1.0), gb(prior_.beta_b, 1.0);
      const double a = ga(rng);
      const double b = gb(rng);
      beta = a / (a + b);
    }
    if (!(p.yield_kt > 0.0) || p.yield_kt >= prior_.yield_upper_kt) continue;
    const std::vector<double> u = unconstrain(p, beta);
    bool finite = true;
    for (double v : u) finite = finite && std::isfinite(v);
    if (!finite) continue;
    if (std::isfinite(log_density(u.data(), nullptr))) return u;
  }
  throw std::runtime_error("could not draw an initial point with finite density");
}

ModalityValues JointDensity::loglik_values(const ParamVector& p) const {
  ModalityValues out;
  const double ln_y = std::log(p.yield_kt);
  if (present(Modality::Seismic)) {
    out.present[0] = true;
    out.value[0] = seismic_term(data_.seismic->mw_obs, ln_y, p.sigma_m, link_, nullptr, nullptr);
  }
  if (present(Modality::Crater)) {
    out.present[1] = true;
    out.value[1] = crater_term(*data_.crater, ln_y, p.sigma_c, nullptr, nullptr);
  }
  if (present(Modality::Sar)) {
    out.present[2] = true;
    out.value[2] = sar_.eval(ln_y, std::log(p.p50_kpa), p.k_slope, p.sigma_sar, p.nu, nullptr);
  }
  if (present(Modality::Vlm)) {
    out.present[3] = true;
    out.value[3] = vlm_.eval(ln_y, p.sigma_dex, nullptr);
  }
  return out;
}

std::vector<double> JointDensity::pointwise_loglik(Modality m, const ParamVector& p) const {
  if (!present(m)) throw std::invalid_argument(std::string("modality absent: ") + modality_name(m));
  const double ln_y = std::log(p.yield_kt);
  std::vector<double> out;
  switch (m) {
    case Modality::Seismic:
      out.push_back(seismic_term(data_.seismic->mw_obs, ln_y, p.sigma_m, link_, nullptr, nullptr));
      break;
    case Modality::Crater:
      out = crater_loglik(*data_.crater, p.yield_kt, p.sigma_c).per_observation;
      break;
    case Modality::Sar:
      if (!std::isfinite(sar_.eval(ln_y, std::log(p.p50_kpa), p.k_slope, p.sigma_sar, p.nu, nullptr, &out)))
        out.assign(sar_.size(), kNegInf);
      break;
    case Modality::Vlm:
      if (!std::isfinite(vlm_.eval(ln_y, p.sigma_dex, nullptr, &out))) out.assign(vlm_.size(), kNegInf);
      break;
  }
  return out;
}

std::vector<int> JointDensity::regime_signature(const double* u) const {
  const double ln_y = std::log(prior_.yield_upper_kt) - softplus(-u[0]);
  std::vector<int> sig, tmp;
  if (present(Modality::Sar)) {
    sar_.regimes(ln_y, tmp);
    sig.insert(sig.end(), tmp.begin(), tmp.end());
  }
  if (present(Modality::Vlm)) {
    vlm_.regimes(ln_y, tmp);
    sig.insert(sig.end(), tmp.begin(), tmp.end());
  }
  return sig;
}

double gradient_check(const JointDensity& density, int n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("gradient_check: n_points must be >= 1");
  std::mt19937_64 rng(seed);
  const int d = density.dim();
  const double h = 1e-3;
  static constexpr double kW[3] = {45.0, -9.0, 1.0};
  double worst = 0.0;
  int accepted = 0;
  int attempts = 0;
  std::vector<double> grad(d), v(d);
  while (accepted < n_points) {
    if (++attempts > 100 * n_points) throw std::runtime_error("gradient_check: too many rejected points");
    std::vector<double> u = density.initial_point(rng);
    if (!std::isfinite(density.log_density(u.data(), grad.data()))) continue;
    // The KB fit is piecewise; a stencil straddling a regime junction is not a
    // valid finite-difference probe.
    const std::vector<int> sig = density.regime_signature(u.data());
    v = u;
    v[0] = u[0] - 3.0 * h;
    bool smooth = density.regime_signature(v.data()) == sig;
    v[0] = u[0] + 3.0 * h;
    smooth = smooth && density.regime_signature(v.data()) == sig;
    if (!smooth) continue;

    bool ok = true;
    double local = 0.0;
    for (int i = 0; i < d && ok; ++i) {
      double fd = 0.0;
      for (int k = 1; k <= 3 && ok; ++k) {
        v = u;
        v[i] = u[i] + k * h;
        const double fp = density.log_density(v.data(), nullptr);
        v[i] = u[i] - k * h;
        const double fm = density.log_density(v.data(), nullptr);
        ok = std::isfinite(fp) && std::isfinite(fm);
        fd += kW[k - 1] * (fp - fm);
      }
      fd /= 60.0 * h;
      local = std::max(local, std::abs(grad[i] - fd) / std::max(std::abs(grad[i]), 1.0));
    }
    if (!ok) continue;
    worst = std::max(worst, local);
    ++accepted;
  }
  return worst;
}

}  // namespace yf
