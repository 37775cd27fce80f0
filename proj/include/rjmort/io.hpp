#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rjmort/ap_framework.hpp"
#include "rjmort/app_framework.hpp"
#include "rjmort/chain.hpp"
#include "rjmort/sim.hpp"

namespace rjmort {

// Long-format CSV with header `age,year,deaths,exposure`. Labels are sorted
// ascending; omitted cells become E = 0, d = 0.
ApDataset parse_ap_csv(std::string_view text);
// Header `age,year,product,deaths,exposure`; products keep first-appearance order.
AppDataset parse_app_csv(std::string_view text);

std::string format_ap_csv(const ApDataset& data);
std::string format_app_csv(const AppDataset& data);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Label columns for every flattened cell, in the family's cell order.
struct CellLabels {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};
CellLabels cell_labels(const ApDataset& data);
CellLabels cell_labels(const AppDataset& data);

// Trace CSV: header `chain,iter,config,loglik`, then one row per kept
// sample with trailing `block:index=value` fields for every stored block.
// Schedule and diagnostics travel in `#` comment lines.
std::string format_trace_csv(const Trace& trace);
Trace parse_trace_csv(std::string_view text);

struct ConfigProb {
  ModelConfig config;
  double prob = 0.0;
  long count = 0;
};

struct DeltaMarginal {
  int index = 0;  // 1-based indicator number
  int value = 0;
  double prob = 0.0;
};

struct PciRow {
  std::size_t cell = 0;
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
};

struct CrudeRow {
  std::size_t cell = 0;
  double deaths = 0.0;
  double exposure = 0.0;
  double log_rate = 0.0;  // log((d + 0.5) / (E + 1))
  bool zero_deaths = false;
};

struct SummaryBundle {
  std::string framework;
  std::vector<ConfigProb> config_probs;    // descending probability
  std::vector<DeltaMarginal> marginals;
  std::vector<PciRow> pci;                 // empty when no parameters were stored
  std::vector<CrudeRow> crude;
  Diagnostics diagnostics;
  long samples = 0;
  int chains = 0;
};

// Long-format averaged probabilities: one row per (grid cell, config).
std::string format_study_csv(const StudyTable& table);

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

SummaryBundle summarize_trace(const std::vector<Trace>& traces, const ModelFamily& family);

// Writes config_probs.csv, delta_marginals.csv, pci.csv, crude_rates.csv,
// diagnostics.csv and report.json into `dir`.
void write_summary(const SummaryBundle& bundle, const CellLabels& labels,
                   const std::filesystem::path& dir);

struct RunConfig {
  std::string framework = "ap";
  std::string data_path;
  int chains = 2;
  int burn = 5000;
  int keep = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  std::string model_prior = "uniform";
  std::string init_config;  // empty: simplest model of the family
  std::optional<double> prior_tau;
  std::string out_dir = "rjmort-out";

  // Throws ConfigError on invalid counts, prior names or init config.
  void validate(const ModelFamily& family) const;
  SamplerSettings sampler_settings() const;
  Schedule schedule() const;
  ModelConfig init(const ModelFamily& family) const;
};

}  // namespace rjmort
