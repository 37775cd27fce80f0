#include "rjmort/model_family.hpp"

#include <algorithm>
#include <stdexcept>

namespace rjmort {

std::string_view move_type_name(MoveType type) {
  switch (type) {
    case MoveType::kAdd: return "add";
    case MoveType::kRemove: return "remove";
    case MoveType::kSwap: return "swap";
  }
  return "?";
}

bool ModelFamily::in_catalog(const ModelConfig& config) const {
  const auto all = catalog();
  return std::find(all.begin(), all.end(), config) != all.end();
}

const BlockEmbedding& ModelFamily::embedding(const ModelConfig& config, BlockId block) const {
  auto it = embeddings_.find({config, block});
  if (it == embeddings_.end()) {
    throw std::logic_error("no embedding for block '" + std::string(block_name(block)) +
                           "' in config " + config.label());
  }
  return it->second;
}

int ModelFamily::dimension(const ModelConfig& config) const {
  return free_size(config, blocks(config));
}

int ModelFamily::free_size(const ModelConfig& config, const std::vector<BlockId>& group) const {
  int n = 0;
  for (BlockId b : group) n += embedding(config, b).free_size();
  return n;
}

std::optional<Eigen::VectorXd> ModelFamily::cross(const ModelConfig&, const ParamState&,
                                                  BlockId, BlockId) const {
  return std::nullopt;
}

std::vector<MovePlan> ModelFamily::all_moves() const {
  std::vector<MovePlan> out;
  for (const auto& c : catalog()) {
    for (int i = 0; i < arity(); ++i) {
      auto m = moves(c, i);
      out.insert(out.end(), m.begin(), m.end());
    }
  }
  return out;
}

Transformed ModelFamily::enter_drop_context(const MovePlan&, ParamState params) const {
  return {std::move(params), 0.0};
}

ParamState ModelFamily::relabel(const MovePlan&, ParamState rest) const { return rest; }

Transformed ModelFamily::leave_add_context(const MovePlan&, ParamState params) const {
  return {std::move(params), 0.0};
}

std::optional<Eigen::VectorXd> ModelFamily::warm_start(const MovePlan&, const ParamState&,
                                                       const ParamState&, BlockId) const {
  return std::nullopt;
}

Eigen::VectorXd ModelFamily::loglik_gradient(const ModelConfig& config,
                                             const ParamState& params, BlockId block) const {
  const auto active = blocks(config);
  if (std::find(active.begin(), active.end(), block) == active.end()) {
    throw std::invalid_argument("block '" + std::string(block_name(block)) +
                                "' is not active in config " + config.label());
  }
  const Eigen::VectorXd eta = predict(config, params);
  const Eigen::VectorXd resid = cells_.deaths() - cells_.mean(eta);
  const BlockDesign d = design(config, params, block);
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(raw_size(block));
  for (int i = 0; i < cells_.size(); ++i) {
    if (d.index[static_cast<std::size_t>(i)] >= 0) {
      raw[d.index[static_cast<std::size_t>(i)]] += d.coef[i] * resid[i];
    }
  }
  return embedding(config, block).pullback(raw);
}

Eigen::VectorXd ModelFamily::gather_free(const ModelConfig& config, const ParamState& params,
                                         const std::vector<BlockId>& group) const {
  Eigen::VectorXd out(free_size(config, group));
  int at = 0;
  for (BlockId b : group) {
    const auto& e = embedding(config, b);
    out.segment(at, e.free_size()) = e.extract(params.get(b));
    at += e.free_size();
  }
  return out;
}

void ModelFamily::scatter_free(const ModelConfig& config, ParamState& params,
                               const std::vector<BlockId>& group,
                               const Eigen::VectorXd& free) const {
  int at = 0;
  for (BlockId b : group) {
    const auto& e = embedding(config, b);
    params.set(b, e.embed(free.segment(at, e.free_size())));
    at += e.free_size();
  }
}

void ModelFamily::build_embeddings(const std::vector<ModelConfig>& configs) {
  for (const auto& c : configs) {
    for (BlockId b : blocks(c)) embeddings_.emplace(std::make_pair(c, b), make_embedding(c, b));
  }
}

BlockEmbedding ModelFamily::make_embedding(const ModelConfig& config, BlockId block) const {
  return BlockEmbedding::from_constraints(raw_size(block), constraints(config).for_block(block));
}

MovePlan ModelFamily::make_plan(std::string id, int delta_index, MoveType type,
                                ModelConfig source, ModelConfig target,
                                std::vector<BlockId> dropped, std::vector<BlockId> added) const {
  MovePlan p;
  p.id = std::move(id);
  p.delta_index = delta_index;
  p.type = type;
  p.source = source;
  p.target = target;
  p.drop_context = source;
  p.add_context = target;
  p.dropped = std::move(dropped);
  p.added = std::move(added);
  return p;
}

}  // namespace rjmort
