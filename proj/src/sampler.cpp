#include "rjmort/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "rjmort/errors.hpp"

namespace rjmort {

GroupObjective::GroupObjective(const ModelFamily& family, const ModelConfig& config,
                               ParamState base, std::vector<BlockId> group,
                               const ParamPrior& prior)
    : family_(family),
      config_(config),
      group_(std::move(group)),
      prior_(prior),
      scratch_(std::move(base)) {
  for (BlockId b : group_) {
    offset_.push_back(dim_);
    dim_ += family_.embedding(config_, b).free_size();
  }
}

ParamState GroupObjective::state_at(const Eigen::VectorXd& x) const {
  ParamState p = scratch_;
  family_.scatter_free(config_, p, group_, x);
  return p;
}

double GroupObjective::value(const Eigen::VectorXd& x) const {
  family_.scatter_free(config_, scratch_, group_, x);
  return family_.cells().kernel(family_.predict(config_, scratch_)) + prior_.log_density(x);
}

double GroupObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                                Eigen::MatrixXd* hess) const {
  family_.scatter_free(config_, scratch_, group_, x);
  const CellData& cells = family_.cells();
  const Eigen::VectorXd eta = family_.predict(config_, scratch_);
  const double v = cells.kernel(eta) + prior_.log_density(x);
  if (!grad && !hess) return v;

  const Eigen::VectorXd mu = cells.mean(eta);
  const Eigen::VectorXd resid = cells.deaths() - mu;
  const int n = cells.size();
  const std::size_t m = group_.size();
  std::vector<BlockDesign> designs;
  designs.reserve(m);
  for (BlockId b : group_) designs.push_back(family_.design(config_, scratch_, b));

  if (grad) {
    grad->resize(dim_);
    for (std::size_t a = 0; a < m; ++a) {
      const auto& e = family_.embedding(config_, group_[a]);
      Eigen::VectorXd raw = Eigen::VectorXd::Zero(e.raw_size());
      const BlockDesign& d = designs[a];
      for (int i = 0; i < n; ++i) raw[d.index[static_cast<std::size_t>(i)]] += d.coef[i] * resid[i];
      grad->segment(offset_[a], e.free_size()) = e.pullback(raw);
    }
    prior_.add_gradient(x, *grad);
  }
  if (hess) {
    hess->setZero(dim_, dim_);
    for (std::size_t a = 0; a < m; ++a) {
      const auto& ea = family_.embedding(config_, group_[a]);
      const BlockDesign& da = designs[a];
      for (std::size_t b = a; b < m; ++b) {
        const auto& eb = family_.embedding(config_, group_[b]);
        const BlockDesign& db = designs[b];
        Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(ea.raw_size(), eb.raw_size());
        for (int i = 0; i < n; ++i) {
          raw(da.index[static_cast<std::size_t>(i)], db.index[static_cast<std::size_t>(i)]) -=
              mu[i] * da.coef[i] * db.coef[i];
        }
        if (a != b) {
          if (auto cr = family_.cross(config_, scratch_, group_[a], group_[b])) {
            for (int i = 0; i < n; ++i) {
              raw(da.index[static_cast<std::size_t>(i)], db.index[static_cast<std::size_t>(i)]) +=
                  (*cr)[i] * resid[i];
            }
          }
          const Eigen::MatrixXd left = ea.pullback_rows(raw);                    // Ja^T R
          const Eigen::MatrixXd full = eb.pullback_rows(left.transpose());       // Jb^T R^T Ja
          hess->block(offset_[a], offset_[b], ea.free_size(), eb.free_size()) = full.transpose();
          hess->block(offset_[b], offset_[a], eb.free_size(), ea.free_size()) = full;
        } else {
          hess->block(offset_[a], offset_[a], ea.free_size(), ea.free_size()) = ea.pullback(raw);
        }
      }
    }
    prior_.add_hessian(*hess);
  }
  return v;
}

void Diagnostics::merge(const Diagnostics& other) {
  for (const auto& [id, s] : other.moves) {
    MoveStats& t = moves[id];
    t.proposed += s.proposed;
    t.accepted += s.accepted;
    t.laplace_failures += s.laplace_failures;
    t.singular += s.singular;
  }
}

Sampler::Sampler(const ModelFamily& family, SamplerSettings settings)
    : family_(family), settings_(std::move(settings)) {
  for (const auto& c : family_.catalog()) {
    log_model_prior_[c] = settings_.model_prior.log_mass(family_.dimension(c));
    for (int i = 0; i < family_.arity(); ++i) moves_[{c, i}] = family_.moves(c, i);
  }
}

ChainState Sampler::init(const ModelConfig& config, std::uint64_t seed) const {
  return init(config, family_.initial_params(config), seed);
}

ChainState Sampler::init(const ModelConfig& config, ParamState params,
                         std::uint64_t seed) const {
  if (!family_.in_catalog(config)) {
    throw ConfigError("initial config " + config.label() + " is not in the catalogue");
  }
  ChainState s;
  s.config = config;
  s.params = std::move(params);
  // Independence proposals mix badly from points far in the tails, and a
  // bilinear block started at zero leaves its partner unidentified, so each
  // group is first moved to its conditional mode.
  for (int pass = 0; pass < settings_.settle_passes; ++pass) {
    for (const SweepStep& step : family_.sweep_plan()) {
      if (step.kind != SweepStep::Kind::kParams) continue;
      for (const auto& group : family_.term_groups(config, step.index)) {
        GroupObjective obj(family_, config, s.params, group, settings_.param_prior);
        const LaplaceResult fit = laplace_approximate(
            obj, family_.gather_free(config, s.params, group), settings_.laplace);
        if (fit.converged) s.params = obj.state_at(fit.mode);
      }
    }
  }
  s.loglik = family_.loglik(config, s.params);
  s.rng.seed(seed);
  return s;
}

double Sampler::log_target(const ModelConfig& config, const ParamState& params,
                           double loglik) const {
  return loglik + log_param_prior(family_, settings_.param_prior, config, params) +
         log_model_prior_.at(config);
}

bool Sampler::mh_update(ChainState& state, const std::vector<BlockId>& group,
                        Diagnostics& diag) const {
  std::string id = "mh:";
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i) id += ",";
    id += block_name(group[i]);
  }
  MoveStats& stats = diag.moves[id];
  ++stats.proposed;

  GroupObjective obj(family_, state.config, state.params, group, settings_.param_prior);
  const Eigen::VectorXd x0 = family_.gather_free(state.config, state.params, group);
  const LaplaceResult fit = laplace_approximate(obj, x0, settings_.laplace);
  if (!fit.converged) {
    ++stats.laplace_failures;
    return false;
  }
  const Eigen::VectorXd xs = fit.sample(state.rng);
  ParamState proposed = obj.state_at(xs);
  const double ll = family_.loglik(state.config, proposed);
  const auto& prior = settings_.param_prior;
  const double log_alpha = ll + prior.log_density(xs) - state.loglik - prior.log_density(x0) +
                           fit.log_density(x0) - fit.log_density(xs);
  std::uniform_real_distribution<double> unif;
  if (std::isfinite(log_alpha) && std::log(unif(state.rng)) < log_alpha) {
    state.params = std::move(proposed);
    state.loglik = ll;
    ++stats.accepted;
    return true;
  }
  return false;
}

const MovePlan& Sampler::reverse_of(const MovePlan& plan) const {
  for (const auto& m : moves_.at({plan.target, plan.delta_index})) {
    if (m.target == plan.source) return m;
  }
  throw std::logic_error("move " + plan.id + " from " + plan.source.label() +
                         " has no reverse");
}

std::optional<Sampler::AddFit> Sampler::fit_added(const MovePlan& plan,
                                                  const ParamState& entered) const {
  AddFit out;
  out.rest = entered;
  for (BlockId b : plan.dropped) out.rest.erase(b);
  out.rest = family_.relabel(plan, std::move(out.rest));
  if (plan.added.empty()) {
    out.fit.converged = true;
    return out;
  }
  ParamState base = out.rest;
  for (BlockId b : plan.added) {
    std::optional<Eigen::VectorXd> init = family_.warm_start(plan, entered, out.rest, b);
    if (!init) {
      const int n = family_.raw_size(b);
      init = (entered.has(b) && entered.get(b).size() == n) ? entered.get(b)
                                                            : Eigen::VectorXd::Zero(n);
    }
    base.set(b, std::move(*init));
  }
  const Eigen::VectorXd x0 = family_.gather_free(plan.add_context, base, plan.added);
  GroupObjective obj(family_, plan.add_context, std::move(base), plan.added,
                     settings_.param_prior);
  out.fit = laplace_approximate(obj, x0, settings_.laplace);
  if (!out.fit.converged) return std::nullopt;
  return out;
}

std::optional<RjProposal> Sampler::propose(const ChainState& state, const MovePlan& plan,
                                           std::mt19937_64& rng, Diagnostics& diag) const {
  MoveStats& stats = diag.moves[plan.id];
  ++stats.proposed;
  try {
    const Transformed entered = family_.enter_drop_context(plan, state.params);
    const Eigen::VectorXd u_rev =
        family_.gather_free(plan.drop_context, entered.params, plan.dropped);

    auto fwd = fit_added(plan, entered.params);
    if (!fwd) {
      ++stats.laplace_failures;
      return std::nullopt;
    }
    double log_q_fwd = 0.0;
    ParamState added = std::move(fwd->rest);
    if (!plan.added.empty()) {
      const Eigen::VectorXd u = fwd->fit.sample(rng);
      log_q_fwd = fwd->fit.log_density(u);
      family_.scatter_free(plan.add_context, added, plan.added, u);
    }
    Transformed left = family_.leave_add_context(plan, std::move(added));

    RjProposal out;
    out.config = plan.target;
    out.params = std::move(left.params);
    out.loglik = family_.loglik(plan.target, out.params);

    const MovePlan& rev = reverse_of(plan);
    const Transformed rev_entered = family_.enter_drop_context(rev, out.params);
    auto back = fit_added(rev, rev_entered.params);
    if (!back) {
      ++stats.laplace_failures;
      return std::nullopt;
    }
    const double log_q_rev = plan.dropped.empty() ? 0.0 : back->fit.log_density(u_rev);

    const double n_fwd = static_cast<double>(moves_.at({plan.source, plan.delta_index}).size());
    const double n_rev = static_cast<double>(moves_.at({plan.target, plan.delta_index}).size());
    out.log_alpha = log_target(plan.target, out.params, out.loglik) -
                    log_target(plan.source, state.params, state.loglik) + std::log(n_fwd) -
                    std::log(n_rev) + log_q_rev - log_q_fwd + entered.log_jacobian +
                    left.log_jacobian;
    return out;
  } catch (const SingularBridgeError&) {
    ++stats.singular;
    return std::nullopt;
  }
}

bool Sampler::rj_move(ChainState& state, const MovePlan& plan, Diagnostics& diag) const {
  if (plan.source != state.config) {
    throw std::logic_error("move " + plan.id + " does not start at " + state.config.label());
  }
  auto prop = propose(state, plan, state.rng, diag);
  if (!prop) return false;
  std::uniform_real_distribution<double> unif;
  if (std::isfinite(prop->log_alpha) && std::log(unif(state.rng)) < prop->log_alpha) {
    state.config = prop->config;
    state.params = std::move(prop->params);
    state.loglik = prop->loglik;
    ++diag.moves[plan.id].accepted;
    return true;
  }
  return false;
}

void Sampler::gibbs_sweep(ChainState& state, Diagnostics& diag) const {
  for (const SweepStep& step : family_.sweep_plan()) {
    if (step.kind == SweepStep::Kind::kParams) {
      for (const auto& group : family_.term_groups(state.config, step.index)) {
        mh_update(state, group, diag);
      }
      continue;
    }
    if (settings_.model_step_prob < 1.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(state.rng) >= settings_.model_step_prob) {
      continue;
    }
    const auto& plans = moves_.at({state.config, step.index});
    if (plans.empty()) continue;
    std::size_t pick = 0;
    if (plans.size() > 1) {
      std::uniform_int_distribution<std::size_t> choose(0, plans.size() - 1);
      pick = choose(state.rng);
    }
    rj_move(state, plans[pick], diag);
  }
  ++state.iteration;
}

}  // namespace rjmort
