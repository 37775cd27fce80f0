#include "rjmort/app_framework.hpp"

#include <algorithm>
#include <cmath>

#include "rjmort/errors.hpp"

namespace rjmort {
namespace {

using B = BlockId;

std::vector<BlockId> app_blocks(const ModelConfig& c) {
  std::vector<BlockId> out;
  if (c[0] == 1) {
    out.push_back(B::kAx);
  } else if (c[0] == 2) {
    out.insert(out.end(), {B::kAx, B::kC1});
  } else if (c.variant == Variant::kNested) {
    out.insert(out.end(), {B::kAx, B::kC1, B::kCtilde});
  } else {
    out.push_back(B::kAxp);
  }
  out.push_back(B::kBx);
  if (c[1] == 2) out.push_back(B::kC2);
  out.push_back(B::kK);
  if (c[2] == 2) out.insert(out.end(), {B::kK2, B::kC3});
  out.push_back(B::kGamma);
  return out;
}

int app_raw_size(BlockId b, int X, int T, int P) {
  switch (b) {
    case B::kAx:
    case B::kBx: return X;
    case B::kC1:
    case B::kC2:
    case B::kC3: return P;
    case B::kAxp:
    case B::kCtilde: return X * P;
    case B::kK:
    case B::kK2: return T;
    case B::kGamma: return X + T - 1;
    default: throw std::invalid_argument("block not used by the APP family");
  }
}

ConstraintSet app_constraints(const ModelConfig& c, int P, int C) {
  ConstraintSet cs;
  cs.add(Constraint::sum_zero(B::kBx));
  cs.add(Constraint::sum_zero(B::kK));
  cs.add(Constraint::sum_zero(B::kGamma));
  cs.add(Constraint::pin(B::kGamma, 0, 0.0));
  cs.add(Constraint::pin(B::kGamma, C - 1, 0.0));
  if (c[0] == 2 || c.variant == Variant::kNested) cs.add(Constraint::sum_zero(B::kC1));
  if (c[1] == 2) cs.add(Constraint::sum_to(B::kC2, P));
  if (c[2] == 2) {
    cs.add(Constraint::sum_zero(B::kK2));
    cs.add(Constraint::sum_zero(B::kC3));
    cs.add(Constraint::pin(B::kC3, 0, 1.0));
  }
  return cs;
}

const Eigen::VectorXd& need(const ParamState& p, BlockId b) {
  if (!p.has(b)) {
    throw ConfigError("missing parameter block '" + std::string(block_name(b)) + "'");
  }
  return p.get(b);
}

void app_eta(const ModelConfig& c, const ParamState& prm, int X, int T, int P, double* out) {
  const double tbar = 0.5 * (T - 1);
  const int d1 = c[0];
  const bool nested = c.variant == Variant::kNested;
  const Eigen::VectorXd* ax = (d1 < 3 || nested) ? &need(prm, B::kAx) : nullptr;
  const Eigen::VectorXd* c1 = (d1 == 2 || nested) ? &need(prm, B::kC1) : nullptr;
  const Eigen::VectorXd* axp = d1 == 3 ? &need(prm, nested ? B::kCtilde : B::kAxp) : nullptr;
  const Eigen::VectorXd& bx = need(prm, B::kBx);
  const Eigen::VectorXd* c2 = c[1] == 2 ? &need(prm, B::kC2) : nullptr;
  const Eigen::VectorXd& k = need(prm, B::kK);
  const Eigen::VectorXd* k2 = c[2] == 2 ? &need(prm, B::kK2) : nullptr;
  const Eigen::VectorXd* c3 = c[2] == 2 ? &need(prm, B::kC3) : nullptr;
  const Eigen::VectorXd& gamma = need(prm, B::kGamma);

  for (int p = 0; p < P; ++p) {
    for (int t = 0; t < T; ++t) {
      const double tc = t - tbar;
      double kt = k[t];
      if (k2) kt += (*k2)[t] * (*c3)[p];
      for (int x = 0; x < X; ++x) {
        double a = 0.0;
        if (ax) a += (*ax)[x];
        if (c1) a += (*c1)[p];
        if (axp) a += (*axp)[x + X * p];
        double b = bx[x];
        if (c2) b *= (*c2)[p];
        out[x + X * (t + T * p)] = a + b * tc + kt + gamma[t - x + X - 1];
      }
    }
  }
}

}  // namespace

void AppDataset::validate() const {
  if (X() < 3 || T() < 3) throw DataError("APP data needs at least 3 ages and 3 years");
  if (P() < 2) throw DataError("APP data needs at least 2 products");
  const int n = X() * T() * P();
  if (deaths.size() != n || exposures.size() != n) {
    throw DataError("deaths/exposures size does not match the labels");
  }
  for (int i = 0; i < n; ++i) {
    const double d = deaths[i];
    const double e = exposures[i];
    if (!std::isfinite(d) || !std::isfinite(e) || d < 0 || e < 0) {
      throw DataError("negative or non-finite cell value");
    }
    if (e == 0 && d > 0) throw DataError("deaths with zero exposure");
  }
}

CellData AppDataset::cells() const {
  validate();
  return CellData(deaths, exposures);
}

bool is_valid_app(const ModelConfig& c) {
  return c.arity == 3 && c.variant == Variant::kCanonical && c[0] >= 1 && c[0] <= 3 &&
         c[1] >= 1 && c[1] <= 2 && c[2] >= 1 && c[2] <= 2;
}

std::vector<ModelConfig> app_catalog() {
  std::vector<ModelConfig> out;
  for (int d1 = 1; d1 <= 3; ++d1) {
    for (int d2 = 1; d2 <= 2; ++d2) {
      for (int d3 = 1; d3 <= 2; ++d3) out.push_back(app_config(d1, d2, d3));
    }
  }
  return out;
}

ConstraintSet constraint_set_app(const ModelConfig& config, int X, int T, int P) {
  if (!is_valid_app(config)) throw ConfigError("not an APP configuration: " + config.label());
  return app_constraints(config, P, X + T - 1);
}

int model_dimension_app(const ModelConfig& config, int X, int T, int P) {
  const ConstraintSet cs = constraint_set_app(config, X, T, P);
  int n = 0;
  for (BlockId b : app_blocks(config)) n += app_raw_size(b, X, T, P) - cs.count(b);
  return n;
}

Eigen::VectorXd predict_eta_app(const ModelConfig& config, const ParamState& params, int X,
                                int T, int P) {
  Eigen::VectorXd eta(X * T * P);
  app_eta(config, params, X, T, P, eta.data());
  return eta;
}

Eigen::VectorXd expand_a_nested(const Eigen::VectorXd& a_x, const Eigen::VectorXd& c1,
                                const Eigen::VectorXd& ctilde_free) {
  const int X = static_cast<int>(a_x.size());
  const int P = static_cast<int>(c1.size());
  const Eigen::VectorXd ct = BlockEmbedding::double_centred(X, P).embed(ctilde_free);
  Eigen::VectorXd out(X * P);
  for (int p = 0; p < P; ++p) {
    for (int x = 0; x < X; ++x) out[x + X * p] = a_x[x] + c1[p] + ct[x + X * p];
  }
  return out;
}

NestedA extract_a_nested(const Eigen::VectorXd& a_xp, int X, int P) {
  const Eigen::Map<const Eigen::MatrixXd> m(a_xp.data(), X, P);
  NestedA out;
  out.a_x = m.rowwise().mean();
  const double grand = m.mean();
  out.c1 = m.colwise().mean().transpose().array() - grand;
  Eigen::MatrixXd ct = m;
  ct.colwise() -= out.a_x;
  ct.rowwise() -= out.c1.transpose();
  out.ctilde_free = BlockEmbedding::double_centred(X, P).extract(ct.reshaped());
  return out;
}

AppFamily::AppFamily(const AppDataset& data)
    : ModelFamily(data.cells()), X_(data.X()), T_(data.T()), P_(data.P()) {
  tc_.resize(T_);
  for (int t = 0; t < T_; ++t) tc_[t] = t - 0.5 * (T_ - 1);
  Eigen::MatrixXd d_xp = Eigen::MatrixXd::Zero(X_, P_);
  Eigen::MatrixXd e_xp = Eigen::MatrixXd::Zero(X_, P_);
  for (int p = 0; p < P_; ++p) {
    for (int t = 0; t < T_; ++t) {
      for (int x = 0; x < X_; ++x) {
        d_xp(x, p) += data.deaths[data.cell(x, t, p)];
        e_xp(x, p) += data.exposures[data.cell(x, t, p)];
      }
    }
  }
  crude_x_ = ((d_xp.rowwise().sum().array() + 0.5) / (e_xp.rowwise().sum().array() + 1.0)).log();
  crude_xp_ = ((d_xp.array() + 0.5) / (e_xp.array() + 1.0)).log().matrix().reshaped();

  std::vector<ModelConfig> contexts = app_catalog();
  for (int d2 = 1; d2 <= 2; ++d2) {
    for (int d3 = 1; d3 <= 2; ++d3) contexts.push_back(nested(app_config(3, d2, d3)));
  }
  build_embeddings(contexts);

  // Columns: a_x, then c1 free, then ctilde free.
  const auto& c1e = embedding(nested(app_config(3, 1, 1)), B::kC1);
  const Eigen::MatrixXd jc1 = c1e.jacobian();
  const Eigen::MatrixXd jct = BlockEmbedding::double_centred(X_, P_).jacobian();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(X_ * P_, X_ * P_);
  for (int p = 0; p < P_; ++p) {
    for (int x = 0; x < X_; ++x) {
      const int r = x + X_ * p;
      m(r, x) = 1.0;
      m.block(r, X_, 1, P_ - 1) = jc1.row(p);
    }
  }
  m.rightCols(jct.cols()) = jct;
  nested_log_det_ = std::log(std::abs(m.fullPivLu().determinant()));
}

ModelConfig AppFamily::nested(ModelConfig c) {
  c.variant = Variant::kNested;
  return c;
}

ConstraintSet AppFamily::constraints(const ModelConfig& config) const {
  if (config.variant == Variant::kNested) return app_constraints(config, P_, X_ + T_ - 1);
  return constraint_set_app(config, X_, T_, P_);
}

std::vector<BlockId> AppFamily::blocks(const ModelConfig& config) const {
  return app_blocks(config);
}

int AppFamily::raw_size(BlockId block) const { return app_raw_size(block, X_, T_, P_); }

BlockEmbedding AppFamily::make_embedding(const ModelConfig& config, BlockId block) const {
  if (block == B::kCtilde) return BlockEmbedding::double_centred(X_, P_);
  return ModelFamily::make_embedding(config, block);
}

Eigen::VectorXd AppFamily::predict(const ModelConfig& config, const ParamState& params) const {
  Eigen::VectorXd eta(X_ * T_ * P_);
  app_eta(config, params, X_, T_, P_, eta.data());
  return eta;
}

BlockDesign AppFamily::design(const ModelConfig& c, const ParamState& prm,
                              BlockId block) const {
  const int n = X_ * T_ * P_;
  BlockDesign d{std::vector<int>(static_cast<std::size_t>(n)), Eigen::VectorXd(n)};
  for (int p = 0; p < P_; ++p) {
    for (int t = 0; t < T_; ++t) {
      for (int x = 0; x < X_; ++x) {
        const int i = x + X_ * (t + T_ * p);
        int idx = 0;
        double coef = 1.0;
        switch (block) {
          case B::kAx: idx = x; break;
          case B::kC1: idx = p; break;
          case B::kAxp:
          case B::kCtilde: idx = x + X_ * p; break;
          case B::kBx:
            idx = x;
            coef = tc_[t] * (c[1] == 2 ? prm.get(B::kC2)[p] : 1.0);
            break;
          case B::kC2:
            idx = p;
            coef = tc_[t] * prm.get(B::kBx)[x];
            break;
          case B::kK: idx = t; break;
          case B::kK2:
            idx = t;
            coef = prm.get(B::kC3)[p];
            break;
          case B::kC3:
            idx = p;
            coef = prm.get(B::kK2)[t];
            break;
          case B::kGamma: idx = t - x + X_ - 1; break;
          default: throw std::invalid_argument("block not used by the APP family");
        }
        d.index[static_cast<std::size_t>(i)] = idx;
        d.coef[i] = coef;
      }
    }
  }
  return d;
}

std::optional<Eigen::VectorXd> AppFamily::cross(const ModelConfig& c, const ParamState&,
                                                BlockId a, BlockId b) const {
  if (a > b) std::swap(a, b);
  const int n = X_ * T_ * P_;
  if (a == B::kBx && b == B::kC2 && c[1] == 2) {
    Eigen::VectorXd out(n);
    for (int p = 0; p < P_; ++p) {
      for (int t = 0; t < T_; ++t) out.segment(X_ * (t + T_ * p), X_).setConstant(tc_[t]);
    }
    return out;
  }
  if (a == B::kK2 && b == B::kC3 && c[2] == 2) return Eigen::VectorXd::Ones(n);
  return std::nullopt;
}

std::vector<SweepStep> AppFamily::sweep_plan() const {
  using K = SweepStep::Kind;
  return {{K::kParams, 0}, {K::kModel, 0}, {K::kParams, 1}, {K::kModel, 1},
          {K::kParams, 2}, {K::kModel, 2}, {K::kParams, 3}};
}

std::vector<std::vector<BlockId>> AppFamily::term_groups(const ModelConfig& c,
                                                         int term) const {
  switch (term) {
    case 0:
      if (c[0] == 1) return {{B::kAx}};
      if (c[0] == 2) return {{B::kAx, B::kC1}};
      return {{B::kAxp}};
    case 1:
      if (c[1] == 2) return {{B::kBx}, {B::kC2}};
      return {{B::kBx}};
    case 2:
      if (c[2] == 2) return {{B::kK}, {B::kK2}, {B::kC3}};
      return {{B::kK}};
    case 3: return {{B::kGamma}};
    default: return {};
  }
}

std::vector<MovePlan> AppFamily::moves(const ModelConfig& s, int delta_index) const {
  std::vector<MovePlan> out;
  auto with = [&](int i, int v) {
    ModelConfig t = s;
    t.delta[static_cast<std::size_t>(i)] = v;
    return t;
  };
  switch (delta_index) {
    case 0:
      if (s[0] == 1) {
        out.push_back(make_plan("d1:1->2", 0, MoveType::kAdd, s, with(0, 2), {}, {B::kC1}));
      } else if (s[0] == 2) {
        out.push_back(make_plan("d1:2->1", 0, MoveType::kRemove, s, with(0, 1), {B::kC1}, {}));
        MovePlan m = make_plan("d1:2->3", 0, MoveType::kAdd, s, with(0, 3), {}, {B::kCtilde});
        m.add_context = nested(m.target);
        out.push_back(std::move(m));
      } else {
        MovePlan m =
            make_plan("d1:3->2", 0, MoveType::kRemove, s, with(0, 2), {B::kCtilde}, {});
        m.drop_context = nested(s);
        out.push_back(std::move(m));
      }
      break;
    case 1:
      if (s[1] == 1) {
        out.push_back(make_plan("d2:1->2", 1, MoveType::kAdd, s, with(1, 2), {}, {B::kC2}));
      } else {
        out.push_back(make_plan("d2:2->1", 1, MoveType::kRemove, s, with(1, 1), {B::kC2}, {}));
      }
      break;
    case 2:
      if (s[2] == 1) {
        out.push_back(
            make_plan("d3:1->2", 2, MoveType::kAdd, s, with(2, 2), {}, {B::kK2, B::kC3}));
      } else {
        out.push_back(
            make_plan("d3:2->1", 2, MoveType::kRemove, s, with(2, 1), {B::kK2, B::kC3}, {}));
      }
      break;
    default: break;
  }
  return out;
}

Transformed AppFamily::enter_drop_context(const MovePlan& plan, ParamState params) const {
  if (plan.drop_context.variant != Variant::kNested) return {std::move(params), 0.0};
  NestedA n = extract_a_nested(params.get(B::kAxp), X_, P_);
  params.erase(B::kAxp);
  params.set(B::kAx, std::move(n.a_x));
  params.set(B::kC1, std::move(n.c1));
  params.set(B::kCtilde, BlockEmbedding::double_centred(X_, P_).embed(n.ctilde_free));
  return {std::move(params), -nested_log_det_};
}

Transformed AppFamily::leave_add_context(const MovePlan& plan, ParamState params) const {
  if (plan.add_context.variant != Variant::kNested) return {std::move(params), 0.0};
  const Eigen::VectorXd& ax = params.get(B::kAx);
  const Eigen::VectorXd& c1 = params.get(B::kC1);
  const Eigen::VectorXd& ct = params.get(B::kCtilde);
  Eigen::VectorXd axp(X_ * P_);
  for (int p = 0; p < P_; ++p) {
    for (int x = 0; x < X_; ++x) axp[x + X_ * p] = ax[x] + c1[p] + ct[x + X_ * p];
  }
  params.erase(B::kAx);
  params.erase(B::kC1);
  params.erase(B::kCtilde);
  params.set(B::kAxp, std::move(axp));
  return {std::move(params), nested_log_det_};
}

std::optional<Eigen::VectorXd> AppFamily::warm_start(const MovePlan&, const ParamState&,
                                                     const ParamState&, BlockId block) const {
  if (block == B::kC2) return Eigen::VectorXd::Ones(P_);
  return std::nullopt;
}

ParamState AppFamily::initial_params(const ModelConfig& config) const {
  ParamState p;
  for (BlockId blk : blocks(config)) {
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(raw_size(blk));
    if (blk == B::kAx) raw = crude_x_;
    if (blk == B::kAxp) raw = crude_xp_;
    if (blk == B::kC2) raw.setOnes();
    const auto& e = embedding(config, blk);
    p.set(blk, e.embed(e.extract(raw)));
  }
  return p;
}

}  // namespace rjmort
