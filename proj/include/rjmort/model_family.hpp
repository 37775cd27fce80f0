#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rjmort/blocks.hpp"
#include "rjmort/constraints.hpp"
#include "rjmort/poisson.hpp"

namespace rjmort {

// Every block enters the linear predictor with at most one raw entry per
// cell: eta_i = (rest)_i + coef_i * raw[index_i]. index_i == -1 means cell i
// does not depend on the block.
struct BlockDesign {
  std::vector<int> index;
  Eigen::VectorXd coef;
};

enum class MoveType { kAdd, kRemove, kSwap };

std::string_view move_type_name(MoveType type);

// One directed trans-dimensional move. The reverse-move auxiliary variables
// are the `dropped` blocks, whose proposal density is evaluated in
// `drop_context`; the forward auxiliary variables are the `added` blocks,
// drawn from a Laplace proposal in `add_context`.
struct MovePlan {
  std::string id;
  int delta_index = 0;
  MoveType type = MoveType::kAdd;
  ModelConfig source;
  ModelConfig target;
  ModelConfig drop_context;
  ModelConfig add_context;
  std::vector<BlockId> dropped;
  std::vector<BlockId> added;
};

struct SweepStep {
  enum class Kind { kParams, kModel };
  Kind kind = Kind::kParams;
  int index = 0;  // term index for kParams, indicator index for kModel
};

struct Transformed {
  ParamState params;
  double log_jacobian = 0.0;
};

// A model family: catalogue of configurations over a fixed dataset, the
// linear-predictor structure of each configuration, and the move catalogue.
// Instances are immutable and shared between chains.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual std::string_view name() const = 0;
  virtual int arity() const = 0;
  const CellData& cells() const { return cells_; }

  virtual std::vector<ModelConfig> catalog() const = 0;
  virtual ModelConfig simplest() const = 0;
  bool in_catalog(const ModelConfig& config) const;

  virtual ConstraintSet constraints(const ModelConfig& config) const = 0;
  virtual std::vector<BlockId> blocks(const ModelConfig& config) const = 0;
  virtual int raw_size(BlockId block) const = 0;

  const BlockEmbedding& embedding(const ModelConfig& config, BlockId block) const;
  int dimension(const ModelConfig& config) const;
  int free_size(const ModelConfig& config, const std::vector<BlockId>& group) const;

  virtual Eigen::VectorXd predict(const ModelConfig& config, const ParamState& params) const = 0;
  virtual BlockDesign design(const ModelConfig& config, const ParamState& params,
                             BlockId block) const = 0;
  // Per-cell d^2 eta_i / d raw_a[index_a(i)] d raw_b[index_b(i)], or nullopt
  // when the two blocks never multiply each other in this configuration.
  virtual std::optional<Eigen::VectorXd> cross(const ModelConfig& config,
                                               const ParamState& params, BlockId a,
                                               BlockId b) const;

  virtual std::vector<SweepStep> sweep_plan() const = 0;
  virtual std::vector<std::vector<BlockId>> term_groups(const ModelConfig& config,
                                                        int term) const = 0;

  // Legal moves for one indicator from `source`; the sampler picks one
  // uniformly so q(source -> target) = 1 / moves(source, i).size().
  virtual std::vector<MovePlan> moves(const ModelConfig& source, int delta_index) const = 0;
  std::vector<MovePlan> all_moves() const;

  virtual Transformed enter_drop_context(const MovePlan& plan, ParamState params) const;
  virtual ParamState relabel(const MovePlan& plan, ParamState rest) const;
  virtual Transformed leave_add_context(const MovePlan& plan, ParamState params) const;
  virtual std::optional<Eigen::VectorXd> warm_start(const MovePlan& plan,
                                                    const ParamState& source,
                                                    const ParamState& rest,
                                                    BlockId block) const;

  virtual ParamState initial_params(const ModelConfig& config) const = 0;

  // Gradient of the log-likelihood with respect to a block's free coordinates.
  Eigen::VectorXd loglik_gradient(const ModelConfig& config, const ParamState& params,
                                  BlockId block) const;
  double loglik(const ModelConfig& config, const ParamState& params) const {
    return cells_.loglik(predict(config, params));
  }

  Eigen::VectorXd gather_free(const ModelConfig& config, const ParamState& params,
                              const std::vector<BlockId>& group) const;
  void scatter_free(const ModelConfig& config, ParamState& params,
                    const std::vector<BlockId>& group, const Eigen::VectorXd& free) const;

 protected:
  explicit ModelFamily(CellData cells) : cells_(std::move(cells)) {}

  // Subclasses call this at the end of construction with every canonical
  // configuration and every move context they use.
  void build_embeddings(const std::vector<ModelConfig>& configs);
  virtual BlockEmbedding make_embedding(const ModelConfig& config, BlockId block) const;

  MovePlan make_plan(std::string id, int delta_index, MoveType type, ModelConfig source,
                     ModelConfig target, std::vector<BlockId> dropped,
                     std::vector<BlockId> added) const;

 private:
  CellData cells_;
  std::map<std::pair<ModelConfig, BlockId>, BlockEmbedding> embeddings_;
};

}  // namespace rjmort
