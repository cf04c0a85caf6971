#pragma once

// Joint log-density over the unconstrained sampling space for each fusion
// rule. The sampled vector holds, in order: the yield, the hyperparameters
// of the present modalities, then the weight coordinates of the method
// (stick-breaking coordinates for Dirichlet weights, a logit temperature for
// a single shared exponent, nothing otherwise).

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "yieldfusion/dataset.hpp"
#include "yieldfusion/likelihoods.hpp"
#include "yieldfusion/physics.hpp"
#include "yieldfusion/priors.hpp"

namespace yf {

enum class FusionKind { PlainProduct, SingleTemperature, FixedGamma, DirichletGamma, BMA, CovarianceIntersection };

struct FusionMethod {
  FusionKind kind = FusionKind::DirichletGamma;
  std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25};  // FixedGamma only

  static FusionMethod plain() { return {FusionKind::PlainProduct, {}}; }
  static FusionMethod single() { return {FusionKind::SingleTemperature, {}}; }
  static FusionMethod dirichlet() { return {FusionKind::DirichletGamma, {}}; }
  static FusionMethod fixed(const std::array<double, 4>& w);
  static FusionMethod bma() { return {FusionKind::BMA, {}}; }
  static FusionMethod ci() { return {FusionKind::CovarianceIntersection, {}}; }

  bool is_joint() const { return kind != FusionKind::BMA && kind != FusionKind::CovarianceIntersection; }
  std::string name() const;
};

// Accepts plain, single, fixed, dirichlet, bma, ci.
FusionMethod parse_method(const std::string& name);

class UnsupportedMethod : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per-modality log-likelihood values at one parameter point.
struct ModalityValues {
  std::array<double, 4> value{};
  std::array<bool, 4> present{};
};

class JointDensity {
 public:
  JointDensity(Dataset data, FusionMethod method, PriorConfig prior = {}, MagnitudeLink link = {});

  int dim() const { return dim_; }
  const Dataset& dataset() const { return data_; }
  const FusionMethod& method() const { return method_; }
  const PriorConfig& prior() const { return prior_; }
  const MagnitudeLink& link() const { return link_; }
  bool present(Modality m) const { return present_[static_cast<int>(m)]; }
  const std::vector<Modality>& modalities() const { return mods_; }

  // Log density and (optionally) its gradient; grad must hold dim() entries.
  double log_density(const double* u, double* grad) const;
  double log_density(const std::vector<double>& u, std::vector<double>* grad) const;

  // Constrained parameters at u. gamma holds the effective likelihood
  // exponents of the method (zero for absent modalities).
  ParamVector constrain(const double* u) const;
  double temperature(const double* u) const;  // SingleTemperature only
  // Inverse of constrain for the sampled coordinates; gamma is read only for
  // DirichletGamma (restricted to present modalities and renormalized) and
  // beta only for SingleTemperature.
  std::vector<double> unconstrain(const ParamVector& p, double beta = 0.7) const;

  // Names of the constrained output columns and their values at u.
  const std::vector<std::string>& column_names() const { return columns_; }
  std::vector<double> columns(const double* u) const;
  int column_index(const std::string& name) const;  // -1 if absent

  // Prior draw mapped to the sampling space, redrawn until the density is finite.
  std::vector<double> initial_point(std::mt19937_64& rng, int max_tries = 1000) const;

  // Untempered log-likelihood of each modality.
  ModalityValues loglik_values(const ParamVector& p) const;
  // Pointwise log-likelihoods of one modality (for WAIC).
  std::vector<double> pointwise_loglik(Modality m, const ParamVector& p) const;

  // KB regime index of every ranged observation at yield coordinate u[0].
  std::vector<int> regime_signature(const double* u) const;

 private:
  struct Slot {
    Scalar scalar;
    Bijector bij;
  };
  Dataset data_;
  FusionMethod method_;
  PriorConfig prior_;
  MagnitudeLink link_;
  std::array<bool, 4> present_{};
  std::vector<Modality> mods_;
  std::vector<Slot> slots_;  // excluding yield
  int weight_offset_ = 0;
  int n_weight_coords_ = 0;
  int dim_ = 0;
  SarLikelihood sar_;
  VlmLikelihood vlm_;
  std::vector<std::string> columns_;
};

// Worst relative gradient error |g_a - g_fd| / max(|g_a|, 1) over n_points
// random prior points, using 7-point central differences.
double gradient_check(const JointDensity& density, int n_points, std::uint64_t seed = 1);

}  // namespace yf
