#include "rjmort/priors.hpp"

#include <cmath>
#include <numbers>

#include "rjmort/errors.hpp"

namespace rjmort {

double ParamPrior::log_density(const Eigen::VectorXd& free) const {
  if (kind == Kind::kFlat) return 0.0;
  const double n = static_cast<double>(free.size());
  return -0.5 * free.squaredNorm() / (tau * tau) -
         n * (std::log(tau) + 0.5 * std::log(2.0 * std::numbers::pi));
}

void ParamPrior::add_gradient(const Eigen::VectorXd& free, Eigen::VectorXd& grad) const {
  if (kind == Kind::kGaussian) grad -= free / (tau * tau);
}

void ParamPrior::add_hessian(Eigen::MatrixXd& hess) const {
  if (kind == Kind::kGaussian) hess.diagonal().array() -= 1.0 / (tau * tau);
}

double ModelPrior::log_mass(int dimension) const {
  switch (kind) {
    case Kind::kUniform: return 0.0;
    case Kind::kAic: return -static_cast<double>(dimension);
    case Kind::kBic: return -std::log(static_cast<double>(dimension));
  }
  return 0.0;
}

std::string_view ModelPrior::name() const {
  switch (kind) {
    case Kind::kUniform: return "uniform";
    case Kind::kAic: return "aic";
    case Kind::kBic: return "bic";
  }
  return "?";
}

ModelPrior ModelPrior::parse(std::string_view text) {
  if (text == "uniform") return {Kind::kUniform};
  if (text == "aic") return {Kind::kAic};
  if (text == "bic") return {Kind::kBic};
  throw ConfigError("unknown model prior '" + std::string(text) + "'");
}

double log_param_prior(const ModelFamily& family, const ParamPrior& prior,
                       const ModelConfig& config, const ParamState& params) {
  if (prior.kind == ParamPrior::Kind::kFlat) return 0.0;
  double lp = 0.0;
  for (BlockId b : family.blocks(config)) {
    lp += prior.log_density(family.embedding(config, b).extract(params.get(b)));
  }
  return lp;
}

std::map<ModelConfig, double> model_prior_probabilities(const ModelFamily& family,
                                                        const ModelPrior& prior) {
  std::map<ModelConfig, double> out;
  double top = -INFINITY;
  for (const auto& c : family.catalog()) {
    out[c] = prior.log_mass(family.dimension(c));
    top = std::max(top, out[c]);
  }
  double z = 0.0;
  for (auto& [c, v] : out) z += (v = std::exp(v - top));
  for (auto& [c, v] : out) v /= z;
  return out;
}

}  // namespace rjmort
