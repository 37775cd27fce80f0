#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rjmort/ap_framework.hpp"
#include "rjmort/chain.hpp"

namespace rjmort {

struct SimRecipe {
  enum class Study { kOne, kTwo };
  Study study = Study::kOne;
  double sigma_a = 0.0;  // study 1: age-effect deviation from linear
  double sigma_g = 0.0;  // study 1: cohort effect
  double bbar = 0.0;     // study 2: interaction strength
  double sigma_b = 0.0;  // study 2: interaction profile spread
  int X = 20;
  int T = 30;
  double exposure_mean = 1000.0;
  double a = -2.0;
  double b = 0.04;
  double k_slope = -0.08;
  double k_noise = 0.01;
  int first_age = 60;
  int first_year = 1990;

  void validate() const;  // throws ConfigError
  std::string label() const;
};

struct SimulatedData {
  ApDataset data;
  Eigen::MatrixXd eta;  // generating log-rates, X x T
};

SimulatedData simulate_ap(const SimRecipe& recipe, std::uint64_t seed);
ApDataset simulate_ap_dataset(const SimRecipe& recipe, std::uint64_t seed);

// Study grids: sigma_a x sigma_g for study 1, bbar x sigma_b for study 2,
// built on `base` (which carries the study kind and base parameters).
std::vector<SimRecipe> study_grid(const SimRecipe& base);

struct StudyOptions {
  int replicates = 10;
  int chains = 2;
  Schedule schedule{2000, 2000, 1, false};
  std::uint64_t seed = 1;
  int threads = 1;
  SamplerSettings settings;
};

using ConfigProbs = std::map<ModelConfig, double>;

// Kept-sample frequency of every configuration, pooled over chains.
ConfigProbs config_probabilities(const Trace& trace);

struct StudyCell {
  SimRecipe recipe;
  std::vector<ConfigProbs> replicate_probs;
  ConfigProbs mean_probs;
  std::vector<std::string> errors;

  double prob(const ModelConfig& config) const;
  // Averaged P(delta_i = value).
  double marginal(int delta_index, int value) const;
};

struct StudyTable {
  std::vector<StudyCell> cells;
};

StudyTable run_study(const std::vector<SimRecipe>& grid, const StudyOptions& options);

}  // namespace rjmort
