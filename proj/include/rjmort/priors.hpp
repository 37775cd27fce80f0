#pragma once

#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "rjmort/model_family.hpp"

namespace rjmort {

// Prior on every free coordinate: flat (improper, contributes 0) or an
// independent N(0, tau^2).
struct ParamPrior {
  enum class Kind { kFlat, kGaussian };
  Kind kind = Kind::kFlat;
  double tau = 10.0;

  static ParamPrior flat() { return {}; }
  static ParamPrior gaussian(double tau) { return {Kind::kGaussian, tau}; }

  double log_density(const Eigen::VectorXd& free) const;
  void add_gradient(const Eigen::VectorXd& free, Eigen::VectorXd& grad) const;
  void add_hessian(Eigen::MatrixXd& hess) const;
};

// Unnormalised prior mass over configurations as a function of the model
// dimension n_k: uniform, exp(-n_k) (AIC-like) or 1/n_k (BIC-like).
struct ModelPrior {
  enum class Kind { kUniform, kAic, kBic };
  Kind kind = Kind::kUniform;

  double log_mass(int dimension) const;
  std::string_view name() const;
  static ModelPrior parse(std::string_view text);  // throws ConfigError
};

// Log parameter-prior density of a full state in the given configuration.
double log_param_prior(const ModelFamily& family, const ParamPrior& prior,
                       const ModelConfig& config, const ParamState& params);

// Normalised prior probability of every catalogue configuration.
std::map<ModelConfig, double> model_prior_probabilities(const ModelFamily& family,
                                                        const ModelPrior& prior);

}  // namespace rjmort
