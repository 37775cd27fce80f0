#include "rjmort/level_toy.hpp"

#include <cmath>

#include "rjmort/errors.hpp"

namespace rjmort {

using B = BlockId;

LevelToyFamily::LevelToyFamily(const Eigen::MatrixXd& deaths, const Eigen::MatrixXd& exposures)
    : ModelFamily(CellData(deaths.reshaped(), exposures.reshaped())),
      X_(static_cast<int>(deaths.rows())),
      T_(static_cast<int>(deaths.cols())) {
  if (X_ < 2 || T_ < 1 || exposures.rows() != X_ || exposures.cols() != T_) {
    throw DataError("level toy needs matching X x T data with X >= 2");
  }
  ModelConfig nested = config(2);
  nested.variant = Variant::kNested;
  build_embeddings({config(1), config(2), nested});

  Eigen::MatrixXd m(X_, X_);
  m.col(0).setOnes();
  m.rightCols(X_ - 1) = embedding(nested, B::kEps).jacobian();
  log_det_ = std::log(std::abs(m.fullPivLu().determinant()));
}

ModelConfig LevelToyFamily::config(int delta) {
  ModelConfig c;
  c.arity = 1;
  c.delta[0] = delta;
  return c;
}

std::vector<ModelConfig> LevelToyFamily::catalog() const { return {config(1), config(2)}; }

ModelConfig LevelToyFamily::simplest() const { return config(1); }

ConstraintSet LevelToyFamily::constraints(const ModelConfig& c) const {
  ConstraintSet cs;
  if (c.variant == Variant::kNested) cs.add(Constraint::sum_zero(B::kEps));
  return cs;
}

std::vector<BlockId> LevelToyFamily::blocks(const ModelConfig& c) const {
  if (c.variant == Variant::kNested) return {B::kA, B::kEps};
  if (c[0] == 1) return {B::kA};
  return {B::kAx};
}

int LevelToyFamily::raw_size(BlockId block) const { return block == B::kA ? 1 : X_; }

Eigen::VectorXd LevelToyFamily::predict(const ModelConfig& c, const ParamState& p) const {
  Eigen::VectorXd eta(X_ * T_);
  for (int t = 0; t < T_; ++t) {
    for (int x = 0; x < X_; ++x) {
      double v = 0.0;
      if (c.variant == Variant::kNested) {
        v = p.get(B::kA)[0] + p.get(B::kEps)[x];
      } else if (c[0] == 1) {
        v = p.get(B::kA)[0];
      } else {
        v = p.get(B::kAx)[x];
      }
      eta[x + X_ * t] = v;
    }
  }
  return eta;
}

BlockDesign LevelToyFamily::design(const ModelConfig&, const ParamState&, BlockId block) const {
  const int n = X_ * T_;
  BlockDesign d{std::vector<int>(static_cast<std::size_t>(n)), Eigen::VectorXd::Ones(n)};
  for (int i = 0; i < n; ++i) d.index[static_cast<std::size_t>(i)] = block == B::kA ? 0 : i % X_;
  return d;
}

std::vector<SweepStep> LevelToyFamily::sweep_plan() const {
  return {{SweepStep::Kind::kParams, 0}, {SweepStep::Kind::kModel, 0}};
}

std::vector<std::vector<BlockId>> LevelToyFamily::term_groups(const ModelConfig& c,
                                                              int term) const {
  if (term != 0) return {};
  if (c[0] == 1) return {{B::kA}};
  return {{B::kAx}};
}

std::vector<MovePlan> LevelToyFamily::moves(const ModelConfig& s, int delta_index) const {
  if (delta_index != 0) return {};
  ModelConfig nested = config(2);
  nested.variant = Variant::kNested;
  if (s[0] == 1) {
    MovePlan m = make_plan("d1:1->2", 0, MoveType::kAdd, s, config(2), {}, {B::kEps});
    m.add_context = nested;
    return {m};
  }
  MovePlan m = make_plan("d1:2->1", 0, MoveType::kRemove, s, config(1), {B::kEps}, {});
  m.drop_context = nested;
  return {m};
}

Transformed LevelToyFamily::enter_drop_context(const MovePlan& plan, ParamState p) const {
  if (plan.drop_context.variant != Variant::kNested) return {std::move(p), 0.0};
  const Eigen::VectorXd ax = p.get(B::kAx);
  const double a = ax.mean();
  p.erase(B::kAx);
  p.set(B::kA, Eigen::VectorXd::Constant(1, a));
  p.set(B::kEps, Eigen::VectorXd(ax.array() - a));
  return {std::move(p), -log_det_};
}

Transformed LevelToyFamily::leave_add_context(const MovePlan& plan, ParamState p) const {
  if (plan.add_context.variant != Variant::kNested) return {std::move(p), 0.0};
  Eigen::VectorXd ax = p.get(B::kEps).array() + p.get(B::kA)[0];
  p.erase(B::kA);
  p.erase(B::kEps);
  p.set(B::kAx, std::move(ax));
  return {std::move(p), log_det_};
}

ParamState LevelToyFamily::initial_params(const ModelConfig& c) const {
  ParamState p;
  const double d = cells().deaths().sum();
  const double e = cells().exposure().sum();
  const double crude = std::log((d + 0.5) / (e + 1.0));
  if (c[0] == 1) {
    p.set(B::kA, Eigen::VectorXd::Constant(1, crude));
  } else {
    p.set(B::kAx, Eigen::VectorXd::Constant(X_, crude));
  }
  return p;
}

}  // namespace rjmort
