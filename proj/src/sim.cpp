#include "rjmort/sim.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>

#include "rjmort/errors.hpp"

namespace rjmort {

void SimRecipe::validate() const {
  if (sigma_a < 0 || sigma_g < 0 || sigma_b < 0 || k_noise < 0) {
    throw ConfigError("simulation standard deviations must be non-negative");
  }
  if (exposure_mean <= 0) throw ConfigError("exposure mean must be positive");
  if (X < 3 || T < 3) throw ConfigError("simulation needs X >= 3 and T >= 3");
}

std::string SimRecipe::label() const {
  char buf[96];
  if (study == Study::kOne) {
    std::snprintf(buf, sizeof buf, "sigma_a=%g,sigma_g=%g", sigma_a, sigma_g);
  } else {
    std::snprintf(buf, sizeof buf, "bbar=%g,sigma_b=%g", bbar, sigma_b);
  }
  return buf;
}

SimulatedData simulate_ap(const SimRecipe& r, std::uint64_t seed) {
  r.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const int X = r.X;
  const int T = r.T;
  const int C = X + T - 1;

  Eigen::MatrixXd exposure(X, T);
  std::poisson_distribution<long> draw_e(r.exposure_mean);
  for (int t = 0; t < T; ++t) {
    for (int x = 0; x < X; ++x) exposure(x, t) = static_cast<double>(draw_e(rng));
  }

  Eigen::VectorXd k(T);
  for (int t = 0; t < T; ++t) k[t] = r.k_slope * (t - 0.5 * (T - 1)) + r.k_noise * z(rng);
  k.array() -= k.mean();

  Eigen::VectorXd ax(X);
  for (int x = 0; x < X; ++x) ax[x] = r.a + r.b * (x - 0.5 * (X - 1));

  Eigen::MatrixXd eta(X, T);
  if (r.study == SimRecipe::Study::kOne) {
    for (int x = 0; x < X; ++x) ax[x] += r.sigma_a * z(rng);
    // Truth kept inside the identifiable family: gamma_{1-X} = 0, sum zero.
    Eigen::VectorXd gamma(C);
    for (int c = 0; c < C; ++c) gamma[c] = r.sigma_g * z(rng);
    gamma[0] = 0.0;
    gamma.tail(C - 1).array() -= gamma.tail(C - 1).mean();
    for (int t = 0; t < T; ++t) {
      for (int x = 0; x < X; ++x) eta(x, t) = ax[x] + k[t] + gamma[t - x + X - 1];
    }
  } else {
    Eigen::VectorXd bx(X);
    for (int x = 0; x < X; ++x) bx[x] = r.sigma_b * z(rng);
    bx.array() -= bx.mean();
    for (int t = 0; t < T; ++t) {
      for (int x = 0; x < X; ++x) eta(x, t) = ax[x] + k[t] * (1.0 + r.bbar * bx[x]);
    }
  }

  SimulatedData out;
  out.eta = eta;
  out.data.exposures = exposure;
  out.data.deaths.resize(X, T);
  for (int t = 0; t < T; ++t) {
    for (int x = 0; x < X; ++x) {
      const double mean = exposure(x, t) * std::exp(eta(x, t));
      out.data.deaths(x, t) = mean > 0 ? static_cast<double>(std::poisson_distribution<long>(mean)(rng)) : 0.0;
    }
  }
  for (int x = 0; x < X; ++x) out.data.ages.push_back(r.first_age + x);
  for (int t = 0; t < T; ++t) out.data.years.push_back(r.first_year + t);
  return out;
}

ApDataset simulate_ap_dataset(const SimRecipe& recipe, std::uint64_t seed) {
  return simulate_ap(recipe, seed).data;
}

std::vector<SimRecipe> study_grid(const SimRecipe& base) {
  std::vector<SimRecipe> grid;
  if (base.study == SimRecipe::Study::kOne) {
    for (double g : {0.05, 0.07, 0.09}) {
      for (double a : {0.025, 0.05, 0.075}) {
        SimRecipe r = base;
        r.sigma_a = a;
        r.sigma_g = g;
        grid.push_back(r);
      }
    }
  } else {
    for (double s : {0.05, 0.10, 0.15}) {
      for (double b : {0.3, 0.4, 0.5}) {
        SimRecipe r = base;
        r.bbar = b;
        r.sigma_b = s;
        grid.push_back(r);
      }
    }
  }
  return grid;
}

ConfigProbs config_probabilities(const Trace& trace) {
  ConfigProbs out;
  if (trace.samples.empty()) throw ChainError("empty trace");
  std::map<ModelConfig, std::size_t> counts;
  for (const auto& s : trace.samples) ++counts[s.config];
  const auto n = static_cast<double>(trace.samples.size());
  for (const auto& [c, k] : counts) out[c] = static_cast<double>(k) / n;
  return out;
}

double StudyCell::prob(const ModelConfig& config) const {
  auto it = mean_probs.find(config);
  return it == mean_probs.end() ? 0.0 : it->second;
}

double StudyCell::marginal(int delta_index, int value) const {
  // Normalising by the total mass keeps a saturated marginal at exactly 1
  // (or 0) instead of one rounding step away from it.
  double p = 0.0, q = 0.0;
  for (const auto& [c, v] : mean_probs) (c[delta_index] == value ? p : q) += v;
  return p + q > 0.0 ? p / (p + q) : 0.0;
}

StudyTable run_study(const std::vector<SimRecipe>& grid, const StudyOptions& opt) {
  if (opt.replicates < 1) throw ConfigError("need at least one replicate");
  const int n_cells = static_cast<int>(grid.size());
  const int n_jobs = n_cells * opt.replicates;
  std::vector<ConfigProbs> probs(static_cast<std::size_t>(n_jobs));
  std::vector<std::string> errors(static_cast<std::size_t>(n_jobs));

  parallel_for(n_jobs, opt.threads, [&](int job) {
    const int cell = job / opt.replicates;
    const int rep = job % opt.replicates;
    const auto& recipe = grid[static_cast<std::size_t>(cell)];
    try {
      const ApDataset data = simulate_ap_dataset(
          recipe, derive_seed(opt.seed, static_cast<std::uint64_t>(cell),
                              static_cast<std::uint64_t>(rep), 0xD47A));
      const ApFamily family(data);
      const Sampler sampler(family, opt.settings);
      Trace merged;
      for (int c = 0; c < opt.chains; ++c) {
        Trace t = run_chain(sampler, family.simplest(), opt.schedule,
                            derive_seed(opt.seed, static_cast<std::uint64_t>(cell),
                                        static_cast<std::uint64_t>(rep),
                                        static_cast<std::uint64_t>(c)),
                            c);
        merged.samples.insert(merged.samples.end(), t.samples.begin(), t.samples.end());
      }
      probs[static_cast<std::size_t>(job)] = config_probabilities(merged);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(job)] = e.what();
    }
  });

  StudyTable table;
  for (int cell = 0; cell < n_cells; ++cell) {
    StudyCell sc;
    sc.recipe = grid[static_cast<std::size_t>(cell)];
    int ok = 0;
    for (int rep = 0; rep < opt.replicates; ++rep) {
      const auto j = static_cast<std::size_t>(cell * opt.replicates + rep);
      if (!errors[j].empty()) {
        sc.errors.push_back("replicate " + std::to_string(rep) + ": " + errors[j]);
        continue;
      }
      sc.replicate_probs.push_back(probs[j]);
      for (const auto& [c, v] : probs[j]) sc.mean_probs[c] += v;
      ++ok;
    }
    if (ok > 0) {
      for (auto& [c, v] : sc.mean_probs) v /= ok;
    }
    table.cells.push_back(std::move(sc));
  }
  return table;
}

}  // namespace rjmort
