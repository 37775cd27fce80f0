#pragma once

#include <Eigen/Dense>

#include "rjmort/model_family.hpp"

namespace rjmort {

// Two-model toy: a common level `a` (config 1) versus a per-age level a_x
// (config 2) on X ages and T years, cells x + X * t. The add move writes
// a_x = a + eps_x with sum(eps) = 0; the reverse takes a = mean(a_x).
class LevelToyFamily final : public ModelFamily {
 public:
  // deaths and exposures are X x T.
  LevelToyFamily(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposures);

  std::string_view name() const override { return "level-toy"; }
  int arity() const override { return 1; }
  int X() const { return X_; }

  std::vector<ModelConfig> catalog() const override;
  ModelConfig simplest() const override;
  static ModelConfig config(int delta);

  ConstraintSet constraints(const ModelConfig& config) const override;
  std::vector<BlockId> blocks(const ModelConfig& config) const override;
  int raw_size(BlockId block) const override;

  Eigen::VectorXd predict(const ModelConfig& config, const ParamState& params) const override;
  BlockDesign design(const ModelConfig& config, const ParamState& params,
                     BlockId block) const override;

  std::vector<SweepStep> sweep_plan() const override;
  std::vector<std::vector<BlockId>> term_groups(const ModelConfig& config,
                                                int term) const override;
  std::vector<MovePlan> moves(const ModelConfig& source, int delta_index) const override;

  Transformed enter_drop_context(const MovePlan& plan, ParamState params) const override;
  Transformed leave_add_context(const MovePlan& plan, ParamState params) const override;

  ParamState initial_params(const ModelConfig& config) const override;

 private:
  int X_ = 0;
  int T_ = 0;
  double log_det_ = 0.0;  // log |det| of (a, eps free) -> a_x
};

}  // namespace rjmort
