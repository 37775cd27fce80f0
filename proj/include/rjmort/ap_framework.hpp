#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rjmort/model_family.hpp"

namespace rjmort {

struct ApDataset {
  std::vector<int> ages;
  std::vector<int> years;
  Eigen::MatrixXd deaths;     // X x T
  Eigen::MatrixXd exposures;  // X x T

  int X() const { return static_cast<int>(ages.size()); }
  int T() const { return static_cast<int>(years.size()); }
  int C() const { return X() + T() - 1; }

  // Throws DataError on shape, sign or structural-missing violations.
  void validate() const;
  // Cells flattened with index x + X * t.
  CellData cells() const;
};

bool is_canonical_ap(const ModelConfig& config);
std::vector<ModelConfig> ap_catalog();

ConstraintSet constraint_set_ap(const ModelConfig& config);
int model_dimension_ap(const ModelConfig& config, int X, int T);
Eigen::MatrixXd predict_eta_ap(const ModelConfig& config, const ParamState& params, int X,
                               int T);
Eigen::VectorXd loglik_gradient_block(const ApDataset& data, const ModelConfig& config,
                                      const ParamState& params, BlockId block);

// k2_t (1 + b_x) == k_t (1 + bbar * btilde_x) with btilde_1 = -1.
struct Bridge {
  Eigen::VectorXd k;
  double bbar = 0.0;
  Eigen::VectorXd btilde;
};

Bridge bridge_reparam(const Eigen::VectorXd& k2, const Eigen::VectorXd& b_x);
// Returns (k2, b_x).
std::pair<Eigen::VectorXd, Eigen::VectorXd> unbridge(const Bridge& bridge);

// Least-squares (a, b) for values v_x ~ a + b (x - xbar).
std::pair<double, double> fit_linear_age(const Eigen::VectorXd& v);

class ApFamily final : public ModelFamily {
 public:
  explicit ApFamily(const ApDataset& data);

  std::string_view name() const override { return "ap"; }
  int arity() const override { return 4; }
  int X() const { return X_; }
  int T() const { return T_; }
  int C() const { return X_ + T_ - 1; }

  std::vector<ModelConfig> catalog() const override { return ap_catalog(); }
  ModelConfig simplest() const override { return ap_config(2, 1, 1, 1); }
  static ModelConfig bridged(ModelConfig c);

  ConstraintSet constraints(const ModelConfig& config) const override;
  std::vector<BlockId> blocks(const ModelConfig& config) const override;
  int raw_size(BlockId block) const override;

  Eigen::VectorXd predict(const ModelConfig& config, const ParamState& params) const override;
  BlockDesign design(const ModelConfig& config, const ParamState& params,
                     BlockId block) const override;
  std::optional<Eigen::VectorXd> cross(const ModelConfig& config, const ParamState& params,
                                       BlockId a, BlockId b) const override;

  std::vector<SweepStep> sweep_plan() const override;
  std::vector<std::vector<BlockId>> term_groups(const ModelConfig& config,
                                                int term) const override;
  std::vector<MovePlan> moves(const ModelConfig& source, int delta_index) const override;

  Transformed enter_drop_context(const MovePlan& plan, ParamState params) const override;
  ParamState relabel(const MovePlan& plan, ParamState rest) const override;
  Transformed leave_add_context(const MovePlan& plan, ParamState params) const override;
  std::optional<Eigen::VectorXd> warm_start(const MovePlan& plan, const ParamState& source,
                                            const ParamState& rest,
                                            BlockId block) const override;

  ParamState initial_params(const ModelConfig& config) const override;

 private:
  // Interaction profile f3(x) multiplying k2 (or the 1 + f3 factor when delta2 = 2).
  double f3(const ModelConfig& c, const ParamState& p, int x) const;

  int X_ = 0;
  int T_ = 0;
  Eigen::VectorXd xc_;     // x - xbar
  Eigen::VectorXd crude_;  // crude log-rate per age
};

}  // namespace rjmort
