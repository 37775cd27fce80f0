#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "rjmort/ap_framework.hpp"
#include "rjmort/app_framework.hpp"
#include "rjmort/model_family.hpp"

namespace rjmort::testing {

inline Eigen::VectorXd normals(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

// Poisson counts around a smooth surface with a little noise.
inline ApDataset random_ap_dataset(int X, int T, std::uint64_t seed, double level = -3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> expo(200.0, 2000.0);
  std::normal_distribution<double> z(0.0, 0.05);
  ApDataset d;
  for (int x = 0; x < X; ++x) d.ages.push_back(60 + x);
  for (int t = 0; t < T; ++t) d.years.push_back(2000 + t);
  d.deaths.resize(X, T);
  d.exposures.resize(X, T);
  for (int t = 0; t < T; ++t) {
    for (int x = 0; x < X; ++x) {
      const double eta = level + 0.08 * (x - 0.5 * (X - 1)) - 0.02 * (t - 0.5 * (T - 1)) + z(rng);
      d.exposures(x, t) = expo(rng);
      d.deaths(x, t) = static_cast<double>(
          std::poisson_distribution<int>(d.exposures(x, t) * std::exp(eta))(rng));
    }
  }
  return d;
}

inline AppDataset random_app_dataset(int X, int T, int P, std::uint64_t seed,
                                     double level = -3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> expo(200.0, 2000.0);
  std::normal_distribution<double> z(0.0, 0.05);
  AppDataset d;
  for (int x = 0; x < X; ++x) d.ages.push_back(60 + x);
  for (int t = 0; t < T; ++t) d.years.push_back(2000 + t);
  for (int p = 0; p < P; ++p) d.products.push_back("p" + std::to_string(p));
  d.deaths.resize(X * T * P);
  d.exposures.resize(X * T * P);
  for (int p = 0; p < P; ++p) {
    for (int t = 0; t < T; ++t) {
      for (int x = 0; x < X; ++x) {
        const double eta = level + 0.08 * (x - 0.5 * (X - 1)) - 0.02 * (t - 0.5 * (T - 1)) +
                           0.1 * p + z(rng);
        const int i = d.cell(x, t, p);
        d.exposures[i] = expo(rng);
        d.deaths[i] = static_cast<double>(
            std::poisson_distribution<int>(d.exposures[i] * std::exp(eta))(rng));
      }
    }
  }
  return d;
}

// Random point of a configuration: the family's starting values shifted by
// Gaussian noise in free coordinates, so every constraint holds.
inline ParamState random_params(const ModelFamily& f, const ModelConfig& c,
                                std::mt19937_64& rng, double scale = 0.3) {
  ParamState p = f.initial_params(c);
  const auto group = f.blocks(c);
  const Eigen::VectorXd free = f.gather_free(c, p, group);
  f.scatter_free(c, p, group, free + normals(static_cast<int>(free.size()), rng, scale));
  return p;
}

// Central-difference gradient of the log-likelihood in one block's free
// coordinates.
inline Eigen::VectorXd fd_block_gradient(const ModelFamily& f, const ModelConfig& c,
                                         const ParamState& p, BlockId block, double h) {
  const Eigen::VectorXd x0 = f.gather_free(c, p, {block});
  Eigen::VectorXd g(x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    ParamState up = p;
    ParamState dn = p;
    Eigen::VectorXd xu = x0;
    Eigen::VectorXd xd = x0;
    xu[i] += h;
    xd[i] -= h;
    f.scatter_free(c, up, {block}, xu);
    f.scatter_free(c, dn, {block}, xd);
    g[i] = (f.loglik(c, up) - f.loglik(c, dn)) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace rjmort::testing
