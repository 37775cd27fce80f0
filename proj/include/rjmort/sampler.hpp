#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rjmort/laplace.hpp"
#include "rjmort/model_family.hpp"
#include "rjmort/priors.hpp"

namespace rjmort {

// Log full conditional of a group of blocks in one configuration, over the
// group's free coordinates, with every other block held at `base`.
class GroupObjective final : public Objective {
 public:
  GroupObjective(const ModelFamily& family, const ModelConfig& config, ParamState base,
                 std::vector<BlockId> group, const ParamPrior& prior);

  int dim() const override { return dim_; }
  double value(const Eigen::VectorXd& x) const override;
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                  Eigen::MatrixXd* hess) const override;
  bool has_hessian() const override { return true; }

  ParamState state_at(const Eigen::VectorXd& x) const;

 private:
  const ModelFamily& family_;
  ModelConfig config_;
  std::vector<BlockId> group_;
  const ParamPrior& prior_;
  std::vector<int> offset_;
  int dim_ = 0;
  mutable ParamState scratch_;
};

struct MoveStats {
  long proposed = 0;
  long accepted = 0;
  long laplace_failures = 0;
  long singular = 0;
};

struct Diagnostics {
  std::map<std::string, MoveStats> moves;  // "mh:<blocks>" or an RJ move id
  void merge(const Diagnostics& other);
};

struct ChainState {
  ModelConfig config;
  ParamState params;
  double loglik = 0.0;
  long iteration = 0;
  std::mt19937_64 rng;
};

struct SamplerSettings {
  ParamPrior param_prior;
  ModelPrior model_prior;
  LaplaceOptions laplace;
  int settle_passes = 3;  // conditional-mode passes before the first sweep
  // Chance of attempting each indicator's move in a sweep. Below 1 the
  // kernel is lazy, which keeps it aperiodic when every move is accepted
  // (prior-only targets with exact Gaussian proposals).
  double model_step_prob = 1.0;
};

// Result of evaluating one RJ proposal without committing it.
struct RjProposal {
  ModelConfig config;
  ParamState params;
  double loglik = 0.0;
  double log_alpha = 0.0;
};

class Sampler {
 public:
  Sampler(const ModelFamily& family, SamplerSettings settings);

  const ModelFamily& family() const { return family_; }
  const SamplerSettings& settings() const { return settings_; }

  ChainState init(const ModelConfig& config, std::uint64_t seed) const;
  ChainState init(const ModelConfig& config, ParamState params, std::uint64_t seed) const;

  double log_target(const ModelConfig& config, const ParamState& params, double loglik) const;

  // Independence MH on a group's full conditional; returns true on acceptance.
  bool mh_update(ChainState& state, const std::vector<BlockId>& group,
                 Diagnostics& diag) const;
  // Draws and scores one proposal for `plan`; nullopt when a Laplace fit
  // fails or a bridge is singular.
  std::optional<RjProposal> propose(const ChainState& state, const MovePlan& plan,
                                    std::mt19937_64& rng, Diagnostics& diag) const;
  bool rj_move(ChainState& state, const MovePlan& plan, Diagnostics& diag) const;
  void gibbs_sweep(ChainState& state, Diagnostics& diag) const;

  // The move from plan.target back to plan.source.
  const MovePlan& reverse_of(const MovePlan& plan) const;

 private:
  // Laplace fit of plan.added in plan.add_context. `entered` is the source
  // state after enter_drop_context; the result is nullopt on failure.
  struct AddFit {
    ParamState rest;
    LaplaceResult fit;
  };
  std::optional<AddFit> fit_added(const MovePlan& plan, const ParamState& entered) const;

  const ModelFamily& family_;
  SamplerSettings settings_;
  std::map<ModelConfig, double> log_model_prior_;
  std::map<std::pair<ModelConfig, int>, std::vector<MovePlan>> moves_;
};

}  // namespace rjmort
