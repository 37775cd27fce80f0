#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rjmort/model_family.hpp"

namespace rjmort {

// Age x year x product data, stored flat with cell index x + X * (t + T * p).
struct AppDataset {
  std::vector<int> ages;
  std::vector<int> years;
  std::vector<std::string> products;
  Eigen::VectorXd deaths;
  Eigen::VectorXd exposures;

  int X() const { return static_cast<int>(ages.size()); }
  int T() const { return static_cast<int>(years.size()); }
  int P() const { return static_cast<int>(products.size()); }
  int C() const { return X() + T() - 1; }
  int cell(int x, int t, int p) const { return x + X() * (t + T() * p); }

  void validate() const;
  CellData cells() const;
};

bool is_valid_app(const ModelConfig& config);
std::vector<ModelConfig> app_catalog();

// P and C enter through SumTo(c2, P) and the last-cohort pin.
ConstraintSet constraint_set_app(const ModelConfig& config, int X, int T, int P);
int model_dimension_app(const ModelConfig& config, int X, int T, int P);
// Flat vector in the AppDataset cell order.
Eigen::VectorXd predict_eta_app(const ModelConfig& config, const ParamState& params, int X,
                                int T, int P);

// a_{x,p} = a_x + c1_p + ctilde_{x,p}, where ctilde is the doubly-centred
// table carried by its (X-1)(P-1) free values. Result is X x P, column-major.
Eigen::VectorXd expand_a_nested(const Eigen::VectorXd& a_x, const Eigen::VectorXd& c1,
                                const Eigen::VectorXd& ctilde_free);

struct NestedA {
  Eigen::VectorXd a_x;
  Eigen::VectorXd c1;
  Eigen::VectorXd ctilde_free;
};
NestedA extract_a_nested(const Eigen::VectorXd& a_xp, int X, int P);

class AppFamily final : public ModelFamily {
 public:
  explicit AppFamily(const AppDataset& data);

  std::string_view name() const override { return "app"; }
  int arity() const override { return 3; }
  int X() const { return X_; }
  int T() const { return T_; }
  int P() const { return P_; }

  std::vector<ModelConfig> catalog() const override { return app_catalog(); }
  ModelConfig simplest() const override { return app_config(1, 1, 1); }
  static ModelConfig nested(ModelConfig c);

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
  Transformed leave_add_context(const MovePlan& plan, ParamState params) const override;
  std::optional<Eigen::VectorXd> warm_start(const MovePlan& plan, const ParamState& source,
                                            const ParamState& rest,
                                            BlockId block) const override;

  ParamState initial_params(const ModelConfig& config) const override;

  // log |det| of (a_x, c1 free, ctilde free) -> a_xp.
  double nested_log_det() const { return nested_log_det_; }

 protected:
  BlockEmbedding make_embedding(const ModelConfig& config, BlockId block) const override;

 private:
  int X_ = 0;
  int T_ = 0;
  int P_ = 0;
  Eigen::VectorXd tc_;         // t - tbar
  Eigen::VectorXd crude_x_;    // crude log-rate per age
  Eigen::VectorXd crude_xp_;   // crude log-rate per (age, product)
  double nested_log_det_ = 0.0;
};

}  // namespace rjmort
