#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rjmort/app_framework.hpp"
#include "rjmort/errors.hpp"
#include "rjmort/poisson.hpp"
#include "support.hpp"

using namespace rjmort;
using namespace rjmort::testing;
using B = BlockId;

namespace {

ConstraintSet base_set(int C) {
  return ConstraintSet({Constraint::sum_zero(B::kBx), Constraint::sum_zero(B::kK),
                        Constraint::sum_zero(B::kGamma), Constraint::pin(B::kGamma, 0, 0.0),
                        Constraint::pin(B::kGamma, C - 1, 0.0)});
}

}  // namespace

TEST_CASE("constraint sets") {
  const int X = 4, T = 5, P = 3, C = X + T - 1;
  CHECK(constraint_set_app(app_config(1, 1, 1), X, T, P).same_as(base_set(C)));

  ConstraintSet s221 = base_set(C);
  s221.add(Constraint::sum_zero(B::kC1));
  s221.add(Constraint::sum_to(B::kC2, P));
  CHECK(constraint_set_app(app_config(2, 2, 1), X, T, P).same_as(s221));

  ConstraintSet s312 = base_set(C);
  s312.add(Constraint::sum_zero(B::kK2));
  s312.add(Constraint::sum_zero(B::kC3));
  s312.add(Constraint::pin(B::kC3, 0, 1.0));
  CHECK(constraint_set_app(app_config(3, 1, 2), X, T, P).same_as(s312));

  CHECK(app_catalog().size() == 12);
  CHECK_THROWS_AS(constraint_set_app(app_config(4, 1, 1), X, T, P), ConfigError);
}

TEST_CASE("prediction examples") {
  const int X = 3, T = 3, P = 2, C = X + T - 1;
  std::mt19937_64 rng(1);
  SUBCASE("product-free base") {
    ParamState p;
    const Eigen::VectorXd ax = normals(X, rng);
    p.set(B::kAx, ax);
    p.set(B::kBx, Eigen::VectorXd::Zero(X));
    p.set(B::kK, Eigen::VectorXd::Zero(T));
    p.set(B::kGamma, Eigen::VectorXd::Zero(C));
    const Eigen::VectorXd eta = predict_eta_app(app_config(1, 1, 1), p, X, T, P);
    for (int q = 0; q < P; ++q)
      for (int t = 0; t < T; ++t)
        for (int x = 0; x < X; ++x) CHECK(eta[x + X * (t + T * q)] == ax[x]);
  }
  SUBCASE("additive product shift") {
    ParamState p;
    p.set(B::kAx, normals(X, rng));
    p.set(B::kC1, Eigen::Vector2d(0.3, -0.3));
    p.set(B::kBx, normals(X, rng, 0.1));
    p.set(B::kK, normals(T, rng));
    p.set(B::kGamma, normals(C, rng, 0.1));
    const Eigen::VectorXd eta = predict_eta_app(app_config(2, 1, 1), p, X, T, P);
    for (int t = 0; t < T; ++t)
      for (int x = 0; x < X; ++x)
        CHECK(eta[x + X * t] - eta[x + X * (t + T)] == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("hand evaluation") {
    ParamState p;
    const Eigen::VectorXd ax = normals(X, rng), bx = normals(X, rng, 0.1);
    const Eigen::VectorXd c2 = Eigen::Vector2d(0.8, 1.2), k = normals(T, rng);
    const Eigen::VectorXd k2 = normals(T, rng), c3 = Eigen::Vector2d(1.0, -1.0);
    const Eigen::VectorXd g = normals(C, rng, 0.1);
    p.set(B::kAx, ax);
    p.set(B::kBx, bx);
    p.set(B::kC2, c2);
    p.set(B::kK, k);
    p.set(B::kK2, k2);
    p.set(B::kC3, c3);
    p.set(B::kGamma, g);
    const Eigen::VectorXd eta = predict_eta_app(app_config(1, 2, 2), p, X, T, P);
    for (int q = 0; q < P; ++q) {
      for (int t = 0; t < T; ++t) {
        for (int x = 0; x < X; ++x) {
          // years 1..3 with mean 2, cohort index t - x shifted by X - 1
          const double expected = ax[x] + bx[x] * c2[q] * ((t + 1) - 2.0) + k[t] +
                                  k2[t] * c3[q] + g[t - x + X - 1];
          CHECK(eta[x + X * (t + T * q)] == doctest::Approx(expected).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("nested age-by-product table") {
  const Eigen::VectorXd ax = Eigen::Vector3d(-4, -3.5, -3);
  const Eigen::VectorXd c1 = Eigen::Vector2d(0.2, -0.2);
  const Eigen::VectorXd zero = expand_a_nested(ax, c1, Eigen::VectorXd::Zero(2));
  for (int p = 0; p < 2; ++p)
    for (int x = 0; x < 3; ++x) CHECK(zero[x + 3 * p] == ax[x] + c1[p]);

  const double u1 = 0.11, u2 = -0.05;
  const Eigen::VectorXd full = expand_a_nested(ax, c1, Eigen::Vector2d(u1, u2));
  const Eigen::VectorXd ct = full - zero;
  const double col1[3] = {u1, u2, -u1 - u2};
  for (int x = 0; x < 3; ++x) {
    CHECK(ct[x] == doctest::Approx(col1[x]).epsilon(1e-15));
    CHECK(ct[x + 3] == doctest::Approx(-col1[x]).epsilon(1e-15));
  }

  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const int X = 5, P = 3;
    Eigen::VectorXd c = normals(P, rng);
    c.array() -= c.mean();
    const Eigen::VectorXd a = normals(X, rng), u = normals((X - 1) * (P - 1), rng);
    const NestedA back = extract_a_nested(expand_a_nested(a, c, u), X, P);
    CHECK((back.a_x - a).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.c1 - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.ctilde_free - u).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dimension gap between product-specific and nested levels") {
  for (int P : {2, 3, 5}) {
    const int X = 7, T = 6;
    for (int d2 : {1, 2}) {
      for (int d3 : {1, 2}) {
        CHECK(model_dimension_app(app_config(3, d2, d3), X, T, P) -
                  model_dimension_app(app_config(2, d2, d3), X, T, P) ==
              (X - 1) * (P - 1));
      }
    }
  }
}

TEST_CASE("free coordinates are locally identifiable") {
  const AppDataset d = random_app_dataset(5, 6, 3, 7);
  const AppFamily fam(d);
  std::mt19937_64 rng(12);
  for (const auto& c : app_catalog()) {
    const ParamState p = random_params(fam, c, rng, 0.3);
    const auto group = fam.blocks(c);
    const Eigen::VectorXd x0 = fam.gather_free(c, p, group);
    Eigen::MatrixXd J(fam.cells().size(), x0.size());
    const double h = 1e-6;
    for (int i = 0; i < x0.size(); ++i) {
      ParamState up = p, dn = p;
      Eigen::VectorXd xu = x0, xd = x0;
      xu[i] += h;
      xd[i] -= h;
      fam.scatter_free(c, up, group, xu);
      fam.scatter_free(c, dn, group, xd);
      J.col(i) = (fam.predict(c, up) - fam.predict(c, dn)) / (2 * h);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    lu.setThreshold(1e-8);
    CAPTURE(c.label());
    CHECK(lu.rank() == x0.size());
    CHECK(x0.size() == model_dimension_app(c, 5, 6, 3));
  }
}

TEST_CASE("flattened likelihood equals a direct three-way loop") {
  const AppDataset d = random_app_dataset(4, 5, 3, 2);
  const AppFamily fam(d);
  std::mt19937_64 rng(8);
  const ModelConfig c = app_config(3, 2, 2);
  const ParamState p = random_params(fam, c, rng, 0.2);
  const Eigen::VectorXd eta = predict_eta_app(c, p, 4, 5, 3);
  double direct = 0.0;
  for (int q = 0; q < 3; ++q)
    for (int t = 0; t < 5; ++t)
      for (int x = 0; x < 4; ++x) {
        const int i = d.cell(x, t, q);
        const double dd = d.deaths[i], e = d.exposures[i];
        direct += dd * (std::log(e) + eta[i]) - e * std::exp(eta[i]) - std::lgamma(dd + 1.0);
      }
  const double flat = log_likelihood({d.deaths.data(), static_cast<std::size_t>(d.deaths.size())},
                                     {d.exposures.data(), static_cast<std::size_t>(d.exposures.size())},
                                     {eta.data(), static_cast<std::size_t>(eta.size())});
  CHECK(flat == direct);
}

TEST_CASE("constraints and gradients at random points") {
  const AppDataset d = random_app_dataset(4, 5, 3, 5);
  const AppFamily fam(d);
  std::mt19937_64 rng(3);
  for (const auto& c : app_catalog()) {
    const ParamState p = random_params(fam, c, rng, 0.2);
    CHECK(constraint_set_app(c, 4, 5, 3).max_residual(p) < 1e-10);
    for (B b : fam.blocks(c)) {
      CAPTURE(c.label());
      CAPTURE(block_name(b));
      CHECK(relative_error(fam.loglik_gradient(c, p, b), fd_block_gradient(fam, c, p, b, 1e-6)) <
            1e-5);
    }
  }
}

TEST_CASE("dataset validation") {
  AppDataset d = random_app_dataset(3, 3, 2, 1);
  CHECK_NOTHROW(d.validate());
  d.products.pop_back();
  CHECK_THROWS_AS(d.validate(), DataError);
}
