#include "rjmort/ap_framework.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rjmort/errors.hpp"

namespace rjmort {
namespace {

using B = BlockId;

std::vector<BlockId> ap_blocks(const ModelConfig& c) {
  std::vector<BlockId> out;
  if (c[0] == 1) {
    out.push_back(B::kAx);
  } else {
    out.push_back(B::kA);
    out.push_back(B::kB);
  }
  const int d2 = c[1];
  const int d3 = c[2];
  if (d2 == 1 || d2 == 3) out.push_back(B::kK1);
  if (d2 >= 2) out.push_back(B::kK2);
  if (d2 == 2 && (d3 == 1 || c.variant == Variant::kBridged)) out.push_back(B::kBbar);
  if (d2 >= 2 && d3 == 2) out.push_back(B::kBx);
  if (c[3] == 2) out.push_back(B::kGamma);
  return out;
}

int ap_raw_size(BlockId b, int X, int T) {
  switch (b) {
    case B::kA:
    case B::kB:
    case B::kBbar: return 1;
    case B::kAx:
    case B::kBx: return X;
    case B::kK1:
    case B::kK2: return T;
    case B::kGamma: return X + T - 1;
    default: throw std::invalid_argument("block not used by the AP family");
  }
}

ConstraintSet ap_constraints(const ModelConfig& c) {
  ConstraintSet cs;
  const int d2 = c[1];
  const int d3 = c[2];
  if (d2 == 1 || d2 == 3) cs.add(Constraint::sum_zero(B::kK1));
  if (d2 >= 2) cs.add(Constraint::sum_zero(B::kK2));
  if (d2 >= 2 && d3 == 2) {
    cs.add(Constraint::sum_zero(B::kBx));
    if (d2 == 3 || c.variant == Variant::kBridged) cs.add(Constraint::pin(B::kBx, 0, -1.0));
  }
  if (c[3] == 2) {
    cs.add(Constraint::sum_zero(B::kGamma));
    cs.add(Constraint::pin(B::kGamma, 0, 0.0));
  }
  return cs;
}

const Eigen::VectorXd& need(const ParamState& p, BlockId b) {
  if (!p.has(b)) {
    throw ConfigError("missing parameter block '" + std::string(block_name(b)) + "'");
  }
  return p.get(b);
}

Eigen::VectorXd centred_index(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = i - 0.5 * (n - 1);
  return v;
}

// Shared by predict_eta_ap and ApFamily::predict; cells are x + X * t.
void ap_eta(const ModelConfig& c, const ParamState& p, int X, int T, double* out) {
  const Eigen::VectorXd xc = centred_index(X);
  const int d1 = c[0];
  const int d2 = c[1];
  const int d3 = c[2];
  const bool bridged = c.variant == Variant::kBridged;

  Eigen::VectorXd f1(X);
  if (d1 == 1) {
    f1 = need(p, B::kAx);
  } else {
    f1 = need(p, B::kA)[0] + need(p, B::kB)[0] * xc.array();
  }
  Eigen::VectorXd f3 = Eigen::VectorXd::Zero(X);
  if (d2 >= 2) {
    if (bridged) {
      f3 = need(p, B::kBbar)[0] * need(p, B::kBx);
    } else if (d3 == 1) {
      f3 = d2 == 2 ? Eigen::VectorXd(need(p, B::kBbar)[0] * xc) : xc;
    } else {
      f3 = need(p, B::kBx);
    }
  }
  const Eigen::VectorXd* k1 = d2 != 2 ? &need(p, B::kK1) : nullptr;
  const Eigen::VectorXd* k2 = d2 != 1 ? &need(p, B::kK2) : nullptr;
  const Eigen::VectorXd* gamma = c[3] == 2 ? &need(p, B::kGamma) : nullptr;

  for (int t = 0; t < T; ++t) {
    for (int x = 0; x < X; ++x) {
      double f2 = 0.0;
      if (d2 == 1) {
        f2 = (*k1)[t];
      } else if (d2 == 2) {
        f2 = (*k2)[t] * (1.0 + f3[x]);
      } else {
        f2 = (*k1)[t] + (*k2)[t] * f3[x];
      }
      double v = f1[x] + f2;
      if (gamma) v += (*gamma)[t - x + X - 1];
      out[x + X * t] = v;
    }
  }
}

std::string arrow(int from, int to) {
  return std::to_string(from) + "->" + std::to_string(to);
}

bool contains(const std::vector<BlockId>& v, BlockId b) {
  return std::find(v.begin(), v.end(), b) != v.end();
}

}  // namespace

void ApDataset::validate() const {
  const int x = X();
  const int t = T();
  if (x < 3 || t < 3) throw DataError("AP data needs at least 3 ages and 3 years");
  if (deaths.rows() != x || deaths.cols() != t || exposures.rows() != x ||
      exposures.cols() != t) {
    throw DataError("deaths/exposures shape does not match the age and year labels");
  }
  for (int j = 0; j < t; ++j) {
    for (int i = 0; i < x; ++i) {
      const double d = deaths(i, j);
      const double e = exposures(i, j);
      if (!std::isfinite(d) || !std::isfinite(e) || d < 0 || e < 0) {
        throw DataError("negative or non-finite value at age " + std::to_string(ages[i]) +
                        ", year " + std::to_string(years[j]));
      }
      if (e == 0 && d > 0) {
        throw DataError("deaths with zero exposure at age " + std::to_string(ages[i]) +
                        ", year " + std::to_string(years[j]));
      }
    }
  }
}

CellData ApDataset::cells() const {
  validate();
  return CellData(deaths.reshaped(), exposures.reshaped());
}

bool is_canonical_ap(const ModelConfig& c) {
  if (c.arity != 4 || c.variant != Variant::kCanonical) return false;
  if (c[0] < 1 || c[0] > 2 || c[1] < 1 || c[1] > 3 || c[2] < 1 || c[2] > 2 || c[3] < 1 ||
      c[3] > 2) {
    return false;
  }
  return !(c[1] == 1 && c[2] != 1);
}

std::vector<ModelConfig> ap_catalog() {
  std::vector<ModelConfig> out;
  for (int d1 = 1; d1 <= 2; ++d1) {
    for (int d2 = 1; d2 <= 3; ++d2) {
      for (int d3 = 1; d3 <= (d2 == 1 ? 1 : 2); ++d3) {
        for (int d4 = 1; d4 <= 2; ++d4) out.push_back(ap_config(d1, d2, d3, d4));
      }
    }
  }
  return out;
}

ConstraintSet constraint_set_ap(const ModelConfig& config) {
  if (!is_canonical_ap(config)) {
    throw ConfigError("not a canonical AP configuration: " + config.label());
  }
  return ap_constraints(config);
}

int model_dimension_ap(const ModelConfig& config, int X, int T) {
  const ConstraintSet cs = constraint_set_ap(config);
  int n = 0;
  for (BlockId b : ap_blocks(config)) n += ap_raw_size(b, X, T) - cs.count(b);
  return n;
}

Eigen::MatrixXd predict_eta_ap(const ModelConfig& config, const ParamState& params, int X,
                               int T) {
  Eigen::MatrixXd eta(X, T);
  ap_eta(config, params, X, T, eta.data());
  return eta;
}

Eigen::VectorXd loglik_gradient_block(const ApDataset& data, const ModelConfig& config,
                                      const ParamState& params, BlockId block) {
  return ApFamily(data).loglik_gradient(config, params, block);
}

Bridge bridge_reparam(const Eigen::VectorXd& k2, const Eigen::VectorXd& b_x) {
  if (b_x.size() == 0 || std::abs(b_x[0]) <= 1e-8) {
    throw SingularBridgeError("bridge needs |b_1| > 1e-8");
  }
  Bridge out;
  out.k = k2;
  out.bbar = -b_x[0];
  out.btilde = b_x / out.bbar;
  out.btilde[0] = -1.0;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unbridge(const Bridge& bridge) {
  Eigen::VectorXd b = bridge.bbar * bridge.btilde;
  b[0] = -bridge.bbar;
  return {bridge.k, b};
}

std::pair<double, double> fit_linear_age(const Eigen::VectorXd& v) {
  const Eigen::VectorXd xc = centred_index(static_cast<int>(v.size()));
  const double a = v.mean();
  const double b = xc.dot(v) / xc.squaredNorm();
  return {a, b};
}

ApFamily::ApFamily(const ApDataset& data)
    : ModelFamily(data.cells()), X_(data.X()), T_(data.T()), xc_(centred_index(data.X())) {
  crude_.resize(X_);
  for (int x = 0; x < X_; ++x) {
    crude_[x] = std::log((data.deaths.row(x).sum() + 0.5) / (data.exposures.row(x).sum() + 1.0));
  }
  std::vector<ModelConfig> contexts = ap_catalog();
  for (int d1 = 1; d1 <= 2; ++d1) {
    for (int d4 = 1; d4 <= 2; ++d4) contexts.push_back(bridged(ap_config(d1, 2, 2, d4)));
  }
  build_embeddings(contexts);
}

ModelConfig ApFamily::bridged(ModelConfig c) {
  c.variant = Variant::kBridged;
  return c;
}

ConstraintSet ApFamily::constraints(const ModelConfig& config) const {
  if (config.variant == Variant::kBridged) return ap_constraints(config);
  return constraint_set_ap(config);
}

std::vector<BlockId> ApFamily::blocks(const ModelConfig& config) const {
  return ap_blocks(config);
}

int ApFamily::raw_size(BlockId block) const { return ap_raw_size(block, X_, T_); }

Eigen::VectorXd ApFamily::predict(const ModelConfig& config, const ParamState& params) const {
  Eigen::VectorXd eta(X_ * T_);
  ap_eta(config, params, X_, T_, eta.data());
  return eta;
}

double ApFamily::f3(const ModelConfig& c, const ParamState& p, int x) const {
  if (c.variant == Variant::kBridged) return p.get(B::kBbar)[0] * p.get(B::kBx)[x];
  if (c[2] == 2) return p.get(B::kBx)[x];
  return c[1] == 2 ? p.get(B::kBbar)[0] * xc_[x] : xc_[x];
}

BlockDesign ApFamily::design(const ModelConfig& c, const ParamState& p, BlockId block) const {
  const int n = X_ * T_;
  BlockDesign d{std::vector<int>(static_cast<std::size_t>(n)), Eigen::VectorXd(n)};
  const bool bridged = c.variant == Variant::kBridged;
  for (int t = 0; t < T_; ++t) {
    for (int x = 0; x < X_; ++x) {
      const int i = x + X_ * t;
      int idx = 0;
      double coef = 1.0;
      switch (block) {
        case B::kA: break;
        case B::kB: coef = xc_[x]; break;
        case B::kAx: idx = x; break;
        case B::kK1: idx = t; break;
        case B::kK2:
          idx = t;
          coef = c[1] == 2 ? 1.0 + f3(c, p, x) : f3(c, p, x);
          break;
        case B::kBbar:
          coef = p.get(B::kK2)[t] * (bridged ? p.get(B::kBx)[x] : xc_[x]);
          break;
        case B::kBx:
          idx = x;
          coef = p.get(B::kK2)[t] * (bridged ? p.get(B::kBbar)[0] : 1.0);
          break;
        case B::kGamma: idx = t - x + X_ - 1; break;
        default: throw std::invalid_argument("block not used by the AP family");
      }
      d.index[static_cast<std::size_t>(i)] = idx;
      d.coef[i] = coef;
    }
  }
  return d;
}

std::optional<Eigen::VectorXd> ApFamily::cross(const ModelConfig& c, const ParamState& p,
                                               BlockId a, BlockId b) const {
  if (a > b) std::swap(a, b);
  const auto active = blocks(c);
  if (!contains(active, a) || !contains(active, b)) return std::nullopt;
  const bool bridged = c.variant == Variant::kBridged;
  Eigen::VectorXd out(X_ * T_);
  if (a == B::kK2 && b == B::kBbar) {
    for (int t = 0; t < T_; ++t) {
      for (int x = 0; x < X_; ++x) out[x + X_ * t] = bridged ? p.get(B::kBx)[x] : xc_[x];
    }
    return out;
  }
  if (a == B::kK2 && b == B::kBx) {
    out.setConstant(bridged ? p.get(B::kBbar)[0] : 1.0);
    return out;
  }
  if (a == B::kBbar && b == B::kBx) {
    for (int t = 0; t < T_; ++t) out.segment(X_ * t, X_).setConstant(p.get(B::kK2)[t]);
    return out;
  }
  return std::nullopt;
}

std::vector<SweepStep> ApFamily::sweep_plan() const {
  using K = SweepStep::Kind;
  return {{K::kParams, 0}, {K::kModel, 0}, {K::kParams, 1}, {K::kModel, 1},
          {K::kModel, 2},  {K::kParams, 3}, {K::kModel, 3}};
}

std::vector<std::vector<BlockId>> ApFamily::term_groups(const ModelConfig& c, int term) const {
  switch (term) {
    case 0:
      if (c[0] == 1) return {{B::kAx}};
      return {{B::kA, B::kB}};
    case 1:
      if (c[1] == 1) return {{B::kK1}};
      if (c[1] == 2) return {{B::kK2}, {c[2] == 1 ? B::kBbar : B::kBx}};
      if (c[2] == 1) return {{B::kK1}, {B::kK2}};
      return {{B::kK1}, {B::kK2}, {B::kBx}};
    case 3:
      if (c[3] == 2) return {{B::kGamma}};
      return {};
    default: return {};
  }
}

std::vector<MovePlan> ApFamily::moves(const ModelConfig& s, int delta_index) const {
  std::vector<MovePlan> out;
  auto with = [&](int i, int v) {
    ModelConfig t = s;
    t.delta[static_cast<std::size_t>(i)] = v;
    return t;
  };
  switch (delta_index) {
    case 0:
      if (s[0] == 1) {
        out.push_back(make_plan("d1:1->2", 0, MoveType::kSwap, s, with(0, 2), {B::kAx},
                                {B::kA, B::kB}));
      } else {
        out.push_back(make_plan("d1:2->1", 0, MoveType::kSwap, s, with(0, 1), {B::kA, B::kB},
                                {B::kAx}));
      }
      break;
    case 1:
      if (s[1] == 1) {
        out.push_back(make_plan("d2:1->2", 1, MoveType::kAdd, s, with(1, 2), {}, {B::kBbar}));
      } else if (s[1] == 2 && s[2] == 1) {
        out.push_back(make_plan("d2:2->1", 1, MoveType::kRemove, s, with(1, 1), {B::kBbar}, {}));
        out.push_back(make_plan("d2:2->3/d3=1", 1, MoveType::kSwap, s, with(1, 3),
                                {B::kK2, B::kBbar}, {B::kK1, B::kK2}));
      } else if (s[1] == 2) {
        MovePlan m = make_plan("d2:2->3/d3=2", 1, MoveType::kSwap, s, with(1, 3),
                               {B::kK2, B::kBbar}, {B::kK1, B::kK2});
        m.drop_context = bridged(s);
        out.push_back(std::move(m));
      } else {
        MovePlan m = make_plan("d2:3->2/d3=" + std::to_string(s[2]), 1, MoveType::kSwap, s,
                               with(1, 2), {B::kK1, B::kK2}, {B::kK2, B::kBbar});
        if (s[2] == 2) m.add_context = bridged(m.target);
        out.push_back(std::move(m));
      }
      break;
    case 2:
      if (s[1] == 2) {
        const bool up = s[2] == 1;
        out.push_back(make_plan("d3:" + arrow(s[2], 3 - s[2]) + "/d2=2", 2, MoveType::kSwap, s,
                                with(2, 3 - s[2]), {up ? B::kBbar : B::kBx},
                                {up ? B::kBx : B::kBbar}));
      } else if (s[1] == 3) {
        if (s[2] == 1) {
          out.push_back(make_plan("d3:1->2/d2=3", 2, MoveType::kAdd, s, with(2, 2), {}, {B::kBx}));
        } else {
          out.push_back(
              make_plan("d3:2->1/d2=3", 2, MoveType::kRemove, s, with(2, 1), {B::kBx}, {}));
        }
      }
      break;
    case 3:
      if (s[3] == 1) {
        out.push_back(make_plan("d4:1->2", 3, MoveType::kAdd, s, with(3, 2), {}, {B::kGamma}));
      } else {
        out.push_back(make_plan("d4:2->1", 3, MoveType::kRemove, s, with(3, 1), {B::kGamma}, {}));
      }
      break;
    default: break;
  }
  return out;
}

Transformed ApFamily::enter_drop_context(const MovePlan& plan, ParamState params) const {
  if (plan.drop_context.variant != Variant::kBridged) return {std::move(params), 0.0};
  const Bridge br = bridge_reparam(params.get(B::kK2), params.get(B::kBx));
  params.set(B::kK2, br.k);
  params.set(B::kBbar, Eigen::VectorXd::Constant(1, br.bbar));
  params.set(B::kBx, br.btilde);
  return {std::move(params), -(X_ - 2) * std::log(std::abs(br.bbar))};
}

ParamState ApFamily::relabel(const MovePlan& plan, ParamState rest) const {
  if (plan.delta_index != 1) return rest;
  if (plan.source[1] == 1 && rest.has(B::kK1)) {
    rest.set(B::kK2, rest.get(B::kK1));
    rest.erase(B::kK1);
  } else if (plan.target[1] == 1 && rest.has(B::kK2)) {
    rest.set(B::kK1, rest.get(B::kK2));
    rest.erase(B::kK2);
  }
  return rest;
}

Transformed ApFamily::leave_add_context(const MovePlan& plan, ParamState params) const {
  if (plan.add_context.variant != Variant::kBridged) return {std::move(params), 0.0};
  const double bbar = params.get(B::kBbar)[0];
  if (std::abs(bbar) <= 1e-8) throw SingularBridgeError("bridge needs |bbar| > 1e-8");
  auto [k2, b] = unbridge({params.get(B::kK2), bbar, params.get(B::kBx)});
  params.set(B::kK2, std::move(k2));
  params.set(B::kBx, std::move(b));
  params.erase(B::kBbar);
  return {std::move(params), (X_ - 2) * std::log(std::abs(bbar))};
}

std::optional<Eigen::VectorXd> ApFamily::warm_start(const MovePlan& plan,
                                                    const ParamState& source,
                                                    const ParamState&, BlockId block) const {
  const auto one = [](double v) { return Eigen::VectorXd::Constant(1, v); };
  switch (block) {
    case B::kA:
    case B::kB:
      if (source.has(B::kAx)) {
        const auto [a, b] = fit_linear_age(source.get(B::kAx));
        return one(block == B::kA ? a : b);
      }
      break;
    case B::kAx:
      if (source.has(B::kA)) {
        return Eigen::VectorXd(source.get(B::kA)[0] + source.get(B::kB)[0] * xc_.array());
      }
      break;
    case B::kK1:
      if (plan.delta_index == 1 && source.has(B::kK2) && source.has(B::kBbar)) {
        return source.get(B::kK2);
      }
      break;
    case B::kK2:
      if (plan.delta_index == 1 && plan.target[1] == 3 && source.has(B::kBbar)) {
        return Eigen::VectorXd(source.get(B::kBbar)[0] * source.get(B::kK2));
      }
      if (plan.delta_index == 1 && plan.target[1] == 2 && source.has(B::kK1)) {
        return source.get(B::kK1);
      }
      break;
    case B::kBbar:
      if (plan.delta_index == 1 && source.has(B::kK1) && source.has(B::kK2)) {
        const Eigen::VectorXd& k1 = source.get(B::kK1);
        const double nn = k1.squaredNorm();
        return one(nn > 0 ? k1.dot(source.get(B::kK2)) / nn : 0.0);
      }
      if (plan.delta_index == 2 && source.has(B::kBx)) {
        return one(xc_.dot(source.get(B::kBx)) / xc_.squaredNorm());
      }
      return one(0.0);
    case B::kBx:
      if (source.has(B::kBbar)) return Eigen::VectorXd(source.get(B::kBbar)[0] * xc_);
      return Eigen::VectorXd(xc_ * (2.0 / (X_ - 1)));
    default: break;
  }
  return std::nullopt;
}

ParamState ApFamily::initial_params(const ModelConfig& config) const {
  ParamState p;
  const auto [a, b] = fit_linear_age(crude_);
  for (BlockId blk : blocks(config)) {
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(raw_size(blk));
    if (blk == B::kAx) raw = crude_;
    if (blk == B::kA) raw[0] = a;
    if (blk == B::kB) raw[0] = b;
    const auto& e = embedding(config, blk);
    p.set(blk, e.embed(e.extract(raw)));
  }
  return p;
}

}  // namespace rjmort
