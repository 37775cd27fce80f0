#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "rjmort/chain.hpp"
#include "rjmort/errors.hpp"
#include "rjmort/laplace.hpp"
#include "rjmort/level_toy.hpp"
#include "rjmort/priors.hpp"
#include "rjmort/sampler.hpp"
#include "support.hpp"

using namespace rjmort;
using namespace rjmort::testing;
using B = BlockId;

namespace {

const double kPi = std::acos(-1.0);

// Trapezoid rule on a fine grid.
template <class F>
double integrate(F f, double lo, double hi, int n = 200000) {
  const double h = (hi - lo) / n;
  double s = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) s += f(lo + i * h);
  return s * h;
}

LevelToyFamily toy(std::initializer_list<double> deaths, std::initializer_list<double> expo) {
  const int X = static_cast<int>(deaths.size());
  Eigen::MatrixXd d(X, 1), e(X, 1);
  int i = 0;
  for (double v : deaths) d(i++, 0) = v;
  i = 0;
  for (double v : expo) e(i++, 0) = v;
  return LevelToyFamily(d, e);
}

}  // namespace

TEST_CASE("Laplace recovers a quadratic exactly") {
  const FunctionObjective f1(
      1, [](const Eigen::VectorXd& x) { return -0.5 * (x[0] - 3) * (x[0] - 3); },
      [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, -(x[0] - 3)); });
  const LaplaceResult r1 = laplace_approximate(f1, Eigen::VectorXd::Zero(1));
  CHECK(r1.converged);
  CHECK(std::abs(r1.mode[0] - 3) < 1e-8);
  CHECK(std::abs(r1.covariance()(0, 0) - 1) < 1e-8);

  Eigen::Matrix3d S;
  S << 2.0, 0.3, -0.4, 0.3, 1.0, 0.2, -0.4, 0.2, 0.5;
  const Eigen::Matrix3d Q = S.inverse();
  const Eigen::Vector3d mu(1.0, -2.0, 0.5);
  const FunctionObjective f3(
      3, [&](const Eigen::VectorXd& x) { return -0.5 * (x - mu).dot(Q * (x - mu)); },
      [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(-Q * (x - mu)); });
  const LaplaceResult r3 = laplace_approximate(f3, Eigen::VectorXd::Zero(3));
  CHECK((r3.mode - mu).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r3.covariance() - S).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r3.log_det_cov == doctest::Approx(std::log(S.determinant())).epsilon(1e-10));
  const double expected = -1.5 * std::log(2 * kPi) - 0.5 * std::log(S.determinant());
  CHECK(r3.log_density(mu) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("Laplace on a one-cell Poisson posterior") {
  const double d = 10, E = 100;
  const FunctionObjective f(
      1, [&](const Eigen::VectorXd& x) { return d * x[0] - E * std::exp(x[0]); },
      [&](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, d - E * std::exp(x[0]));
      });
  const LaplaceResult r = laplace_approximate(f, Eigen::VectorXd::Zero(1));
  REQUIRE(r.converged);
  CHECK(std::abs(r.mode[0] - std::log(0.1)) < 1e-6);
  CHECK(std::abs(r.covariance()(0, 0) - 0.1) < 1e-6);
  CHECK(std::abs(d - E * std::exp(r.mode[0])) < 1e-6);
  CHECK(r.jitter_used == 0.0);
}

TEST_CASE("Laplace jitter and failure paths") {
  // flat in the second coordinate: needs jitter to become positive definite
  const FunctionObjective flat(
      2, [](const Eigen::VectorXd& x) { return -0.5 * x[0] * x[0]; },
      [](const Eigen::VectorXd& x) { return Eigen::Vector2d(-x[0], 0.0).eval(); });
  const LaplaceResult r = laplace_approximate(flat, Eigen::Vector2d(1.0, 0.0));
  CHECK(r.jitter_used > 0);

  const FunctionObjective unbounded(
      1, [](const Eigen::VectorXd& x) { return x[0]; },
      [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, 1.0); });
  CHECK_FALSE(laplace_approximate(unbounded, Eigen::VectorXd::Zero(1)).converged);
}

TEST_CASE("Laplace draws follow the fitted normal") {
  Eigen::Matrix2d S;
  S << 0.5, 0.2, 0.2, 0.3;
  const Eigen::Matrix2d Q = S.inverse();
  const FunctionObjective f(
      2, [&](const Eigen::VectorXd& x) { return -0.5 * x.dot(Q * x); },
      [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(-Q * x); });
  const LaplaceResult r = laplace_approximate(f, Eigen::Vector2d(0.4, -0.1));
  std::mt19937_64 rng(1);
  const int n = 100000;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = r.sample(rng);
    mean += z;
    acc += z * z.transpose();
  }
  mean /= n;
  acc /= n;
  CHECK(mean.cwiseAbs().maxCoeff() < 0.01);
  CHECK((acc - S).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("finite-difference Hessian of a cubic") {
  const FunctionObjective f(
      2, [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[1] + x[1] * x[1] * x[1]; },
      [](const Eigen::VectorXd& x) {
        return Eigen::Vector2d(2 * x[0] * x[1], x[0] * x[0] + 3 * x[1] * x[1]).eval();
      });
  const Eigen::Matrix2d H = fd_hessian(f, Eigen::Vector2d(0.5, -1.0), 1e-5);
  CHECK(H(0, 0) == doctest::Approx(-2.0).epsilon(1e-7));
  CHECK(H(0, 1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(H(1, 1) == doctest::Approx(-6.0).epsilon(1e-7));
}

TEST_CASE("independence MH on a one-cell posterior matches quadrature") {
  // Only the first age carries data, so the level's conditional is the
  // one-cell Poisson posterior under a flat prior.
  const LevelToyFamily fam = toy({10, 0, 0}, {100, 0, 0});
  const Sampler s(fam, {});
  ChainState st = s.init(LevelToyFamily::config(1), 4);
  Diagnostics diag;
  const int n = 50000, batches = 50;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    s.mh_update(st, {B::kA}, diag);
    draws.push_back(st.params.get(B::kA)[0]);
  }
  const auto dens = [](double t) { return std::exp(10 * t - 100 * std::exp(t) + 20); };
  const double lo = std::log(0.1) - 4, hi = std::log(0.1) + 3;
  const double z = integrate(dens, lo, hi);
  const double truth = integrate([&](double t) { return t * dens(t); }, lo, hi) / z;

  double mean = 0;
  for (double v : draws) mean += v;
  mean /= n;
  const int m = n / batches;
  double var = 0;
  for (int b = 0; b < batches; ++b) {
    double bm = 0;
    for (int i = 0; i < m; ++i) bm += draws[b * m + i];
    bm /= m;
    var += (bm - mean) * (bm - mean);
  }
  const double se = std::sqrt(var / (batches - 1) / batches);
  CHECK(std::abs(mean - truth) < 3 * se);
  CHECK(diag.moves.at("mh:a").accepted > n / 2);
}

TEST_CASE("Gaussian full conditional is always accepted") {
  const LevelToyFamily fam = toy({0, 0, 0}, {0, 0, 0});
  SamplerSettings set;
  set.param_prior = ParamPrior::gaussian(2.0);
  const Sampler s(fam, set);
  ChainState st = s.init(LevelToyFamily::config(2), 1);
  Diagnostics diag;
  for (int i = 0; i < 2000; ++i) s.mh_update(st, {B::kAx}, diag);
  const MoveStats& m = diag.moves.at("mh:a_x");
  CHECK(m.proposed == 2000);
  CHECK(m.accepted == m.proposed);
}

TEST_CASE("dimension matching over the move catalogues") {
  const ApFamily ap(random_ap_dataset(20, 30, 1));
  const AppFamily app(random_app_dataset(6, 5, 3, 1));
  const LevelToyFamily lt = toy({3, 4, 5}, {100, 100, 100});
  for (const ModelFamily* f : std::vector<const ModelFamily*>{&ap, &app, &lt}) {
    const auto moves = f->all_moves();
    CHECK(!moves.empty());
    for (const auto& m : moves) {
      CAPTURE(m.id);
      const int d_fwd = f->free_size(m.add_context, m.added);
      const int d_rev = f->free_size(m.drop_context, m.dropped);
      CHECK(f->dimension(m.source) + d_fwd == f->dimension(m.target) + d_rev);
    }
  }
  for (const auto& m : ap.all_moves()) {
    if (m.id == "d4:1->2") CHECK(ap.free_size(m.add_context, m.added) == 47);
  }
  for (const auto& m : app.all_moves()) {
    if (m.source[0] == 2 && m.target[0] == 3) {
      CHECK(app.free_size(m.add_context, m.added) == (6 - 1) * (3 - 1));
    }
  }
  // toy: 1 + 2 = 3 + 0
  const auto tm = lt.moves(LevelToyFamily::config(1), 0);
  REQUIRE(tm.size() == 1);
  CHECK(lt.dimension(tm[0].source) == 1);
  CHECK(lt.free_size(tm[0].add_context, tm[0].added) == 2);
  CHECK(lt.dimension(tm[0].target) == 3);
  CHECK(lt.free_size(tm[0].drop_context, tm[0].dropped) == 0);
}

TEST_CASE("every move has a reverse") {
  const ApFamily ap(random_ap_dataset(5, 6, 1));
  const Sampler s(ap, {});
  for (const auto& m : ap.all_moves()) {
    const MovePlan& r = s.reverse_of(m);
    CHECK(r.source == m.target);
    CHECK(r.target == m.source);
    CHECK(s.reverse_of(r).id == m.id);
  }
}

TEST_CASE("delta2 kernel") {
  const ApFamily ap(random_ap_dataset(5, 6, 1));
  auto targets = [&](ModelConfig c) {
    std::set<std::string> out;
    for (const auto& m : ap.moves(c, 1)) out.insert(m.target.label());
    return out;
  };
  CHECK(targets(ap_config(2, 1, 1, 1)) == std::set<std::string>{"2211"});
  CHECK(targets(ap_config(2, 2, 1, 1)) == std::set<std::string>{"2111", "2311"});
  CHECK(targets(ap_config(2, 3, 2, 1)) == std::set<std::string>{"2221"});
}

TEST_CASE("sweeps keep constraints and the cached likelihood exact") {
  const ApFamily ap(random_ap_dataset(5, 6, 3));
  const AppFamily app(random_app_dataset(4, 5, 3, 3));
  for (const ModelFamily* f : std::vector<const ModelFamily*>{&ap, &app}) {
    const Sampler s(*f, {});
    std::uint64_t seed = 1;
    for (const auto& c : f->catalog()) {
      ChainState st = s.init(c, seed++);
      Diagnostics diag;
      for (int i = 0; i < 5; ++i) {
        s.gibbs_sweep(st, diag);
        CHECK(f->constraints(st.config).max_residual(st.params) < 1e-10);
        CHECK(std::abs(st.loglik - f->loglik(st.config, st.params)) < 1e-9);
      }
    }
  }
}

TEST_CASE("chains are reproducible and sized by the schedule") {
  const ApFamily ap(random_ap_dataset(5, 6, 3));
  const Sampler s(ap, {});
  const Schedule sch{20, 100, 1, true};
  const Trace a = run_chain(s, ap.simplest(), sch, 77);
  const Trace b = run_chain(s, ap.simplest(), sch, 77);
  CHECK(a.samples.size() == 100);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].config == b.samples[i].config);
    CHECK(a.samples[i].params == b.samples[i].params);
    CHECK(a.samples[i].loglik == b.samples[i].loglik);
  }
  const Trace thin = run_chain(s, ap.simplest(), {10, 30, 3, false}, 5);
  CHECK(thin.samples.size() == 30);
  CHECK(thin.samples[1].iteration - thin.samples[0].iteration == 3);
  CHECK(thin.samples[0].params.present().empty());

  const Trace two = run_chains(s, ap.simplest(), {10, 40, 1, true}, 9, 2, 2);
  CHECK(two.samples.size() == 80);
  CHECK(two.chains == 2);
  const Trace again = run_chains(s, ap.simplest(), {10, 40, 1, true}, 9, 2, 1);
  for (std::size_t i = 0; i < two.samples.size(); ++i) {
    CHECK(two.samples[i].params == again.samples[i].params);
  }
  CHECK_THROWS(run_chain(s, ap_config(2, 1, 2, 1), sch, 1));
}

TEST_CASE("model priors") {
  CHECK(ModelPrior::parse("uniform").log_mass(31) == 0.0);
  CHECK(ModelPrior::parse("aic").log_mass(31) == -31.0);
  CHECK(ModelPrior::parse("bic").log_mass(31) == doctest::Approx(-std::log(31.0)));
  CHECK_THROWS_AS(ModelPrior::parse("dic"), ConfigError);

  const ApFamily ap(random_ap_dataset(5, 6, 3));
  const auto probs = model_prior_probabilities(ap, ModelPrior::parse("bic"));
  double total = 0;
  for (const auto& [c, p] : probs) {
    CHECK(p > 0);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // 1/n weights: the ratio of two configs is the inverse ratio of dimensions
  const ModelConfig a = ap_config(2, 1, 1, 1), b = ap_config(1, 1, 1, 1);
  CHECK(probs.at(a) / probs.at(b) ==
        doctest::Approx(static_cast<double>(ap.dimension(b)) / ap.dimension(a)));

  const ParamPrior g = ParamPrior::gaussian(2.0);
  const Eigen::Vector2d x(0.5, -1.0);
  CHECK(g.log_density(x) ==
        doctest::Approx(-std::log(2 * kPi * 4.0) - (0.25 + 1.0) / 8.0).epsilon(1e-12));
  CHECK(ParamPrior::flat().log_density(x) == 0.0);
}

TEST_CASE("seeds and workers") {
  std::set<std::uint64_t> seen;
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) seen.insert(derive_seed(1, c, r, k));
  CHECK(seen.size() == 64);
  CHECK(derive_seed(1, 2, 3, 4) == derive_seed(1, 2, 3, 4));

  std::atomic<int> sum{0};
  parallel_for(100, 4, [&](int i) { sum += i; });
  CHECK(sum == 4950);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](int i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(thread_budget(1) == 1);
}

TEST_CASE("short toy run lands near the quadrature answer") {
  const LevelToyFamily fam = toy({4, 12, 22}, {100, 100, 100});
  SamplerSettings set;
  set.param_prior = ParamPrior::gaussian(10.0);
  const Sampler s(fam, set);
  const Trace t = run_chain(s, LevelToyFamily::config(1), {1000, 20000, 1, false}, 3);
  double p2 = 0;
  for (const auto& smp : t.samples) p2 += smp.config[0] == 2;
  p2 /= static_cast<double>(t.samples.size());

  auto log_marginal_1d = [](auto loglik) {
    const auto f = [&](double a) {
      return std::exp(loglik(a) - a * a / 200.0) / std::sqrt(2 * kPi * 100.0);
    };
    return std::log(integrate(f, -12.0, 4.0));
  };
  const double d[3] = {4, 12, 22};
  const double lm1 = log_marginal_1d([&](double a) {
    double v = 0;
    for (double di : d) v += di * (std::log(100.0) + a) - 100 * std::exp(a) - std::lgamma(di + 1);
    return v;
  });
  double lm2 = 0;
  for (double di : d) {
    lm2 += log_marginal_1d(
        [&](double a) { return di * (std::log(100.0) + a) - 100 * std::exp(a) - std::lgamma(di + 1); });
  }
  const double truth = 1.0 / (1.0 + std::exp(lm1 - lm2));
  MESSAGE("toy P(per-age level): chain ", p2, ", quadrature ", truth);
  CHECK(std::abs(p2 - truth) < 0.05);
}

TEST_CASE("lazy model steps break lockstep flips on prior-only targets") {
  AppDataset d = random_app_dataset(3, 3, 2, 1);
  d.deaths.setZero();
  d.exposures.setZero();
  const AppFamily fam(d);
  auto visited = [&](double rate) {
    SamplerSettings set;
    set.param_prior = ParamPrior::gaussian(1.0);
    set.model_step_prob = rate;
    const Sampler s(fam, set);
    const Trace t = run_chain(s, fam.simplest(), {100, 3000, 1, false}, 2);
    std::set<ModelConfig> seen;
    for (const auto& smp : t.samples) seen.insert(smp.config);
    return seen.size();
  };
  CHECK(visited(1.0) == 6);
  CHECK(visited(0.5) == 12);
}
