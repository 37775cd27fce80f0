#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rjmort/ap_framework.hpp"
#include "rjmort/app_framework.hpp"
#include "rjmort/chain.hpp"
#include "rjmort/errors.hpp"
#include "rjmort/io.hpp"
#include "rjmort/sampler.hpp"
#include "rjmort/sim.hpp"

namespace fs = std::filesystem;
using namespace rjmort;

namespace {

enum Exit { kOk = 0, kData = 2, kConfig = 3, kRuntime = 4 };

struct Loaded {
  std::unique_ptr<ModelFamily> family;
  CellLabels labels;
};

// The header row decides the framework.
Loaded load_dataset(const std::string& path, const std::string& framework) {
  const std::string text = read_text_file(path);
  const bool app = framework.empty() ? text.find("product") != std::string::npos : framework == "app";
  Loaded out;
  if (app) {
    const AppDataset d = parse_app_csv(text);
    out.family = std::make_unique<AppFamily>(d);
    out.labels = cell_labels(d);
  } else {
    const ApDataset d = parse_ap_csv(text);
    out.family = std::make_unique<ApFamily>(d);
    out.labels = cell_labels(d);
  }
  return out;
}

std::string config_path;  // consumed by expand_config before parsing

void add_config_option(CLI::App* cmd) {
  cmd->add_option("--config", config_path, "Flat key=value file; command-line flags take precedence");
}

// Splices the key=value lines of a --config file in front of the subcommand's
// own flags, so single-valued flags given on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> injected;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(no) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    injected.push_back("--" + strip(line.substr(0, eq)));
    injected.push_back(strip(line.substr(eq + 1)));
  }
  const auto sub = std::find_if(args.begin(), args.end(),
                                [](const std::string& a) { return !a.empty() && a[0] != '-'; });
  if (sub == args.end()) return args;
  args.insert(sub + 1, injected.begin(), injected.end());
  return args;
}

void add_run_options(CLI::App* cmd, RunConfig& cfg) {
  add_config_option(cmd);
  cmd->add_option("--data", cfg.data_path, "Dataset CSV")->required();
  cmd->add_option("--chains", cfg.chains, "Independent chains")->capture_default_str();
  cmd->add_option("--burn", cfg.burn, "Burn-in sweeps per chain")->capture_default_str();
  cmd->add_option("--keep", cfg.keep, "Kept sweeps per chain")->capture_default_str();
  cmd->add_option("--thin", cfg.thin, "Keep every n-th sweep")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  cmd->add_option("--model-prior", cfg.model_prior, "uniform, aic or bic")->capture_default_str();
  cmd->add_option("--init", cfg.init_config, "Starting config label, e.g. 2111");
  cmd->add_option("--prior-tau", cfg.prior_tau, "Sd of a N(0, tau^2) parameter prior (flat if unset)");
  cmd->add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
}

int fit(const RunConfig& cfg) {
  const Loaded data = load_dataset(cfg.data_path, cfg.framework);
  cfg.validate(*data.family);
  const Sampler sampler(*data.family, cfg.sampler_settings());
  const Trace trace = run_chains(sampler, cfg.init(*data.family), cfg.schedule(), cfg.seed,
                                 cfg.chains, thread_budget(cfg.chains));
  write_text_file(fs::path(cfg.out_dir) / "trace.csv", format_trace_csv(trace));
  const SummaryBundle bundle = summarize_trace({trace}, *data.family);
  write_summary(bundle, data.labels, cfg.out_dir);
  std::printf("%s: %ld samples from %d chains, written to %s\n", bundle.framework.c_str(),
              bundle.samples, bundle.chains, cfg.out_dir.c_str());
  for (std::size_t i = 0; i < bundle.config_probs.size() && i < 5; ++i) {
    std::printf("  %s  %.4f\n", bundle.config_probs[i].config.label().c_str(),
                bundle.config_probs[i].prob);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reversible-jump model selection for stochastic mortality models"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SimRecipe recipe;
  int study_no = 1;
  double param_a = 0.0;
  double param_b = 0.0;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Simulate an AP dataset from a study recipe");
  add_config_option(simulate);
  simulate->add_option("--study", study_no, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  simulate->add_option("--param-a", param_a, "Study 1: sigma_a; study 2: bbar")->capture_default_str();
  simulate->add_option("--param-b", param_b, "Study 1: sigma_g; study 2: sigma_b")->capture_default_str();
  simulate->add_option("--ages", recipe.X, "Number of ages")->capture_default_str();
  simulate->add_option("--years", recipe.T, "Number of years")->capture_default_str();
  simulate->add_option("--exposure-mean", recipe.exposure_mean, "Poisson exposure mean")->capture_default_str();
  simulate->add_option("--base-a", recipe.a, "Log-rate level at the mean age")->capture_default_str();
  simulate->add_option("--base-b", recipe.b, "Age slope per year of age")->capture_default_str();
  simulate->add_option("--k-slope", recipe.k_slope, "Period trend per year")->capture_default_str();
  simulate->add_option("--k-noise", recipe.k_noise, "Period noise sd")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output CSV")->required();

  RunConfig ap_cfg;
  auto* fit_ap = app.add_subcommand("fit-ap", "Run the sampler over the AP catalogue");
  add_run_options(fit_ap, ap_cfg);
  RunConfig app_cfg;
  app_cfg.framework = "app";
  auto* fit_app = app.add_subcommand("fit-app", "Run the sampler over the APP catalogue");
  add_run_options(fit_app, app_cfg);

  std::vector<std::string> trace_paths;
  std::string sum_data;
  std::string sum_out = "rjmort-out";
  auto* summarize = app.add_subcommand("summarize", "Summarize trace files against their dataset");
  add_config_option(summarize);
  summarize->add_option("--traces", trace_paths, "Trace CSV files")->required();
  summarize->add_option("--data", sum_data, "Dataset CSV the traces were fitted to")->required();
  summarize->add_option("--out-dir", sum_out, "Output directory")->capture_default_str();

  StudyOptions study_opts;
  int study_kind = 1;
  std::string study_out;
  auto* study = app.add_subcommand("study", "Run a simulation-study grid");
  add_config_option(study);
  study->add_option("--study", study_kind, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  study->add_option("--replicates", study_opts.replicates, "Datasets per grid cell")->capture_default_str();
  study->add_option("--chains", study_opts.chains, "Chains per dataset")->capture_default_str();
  study->add_option("--burn", study_opts.schedule.burn, "Burn-in sweeps")->capture_default_str();
  study->add_option("--keep", study_opts.schedule.keep, "Kept sweeps")->capture_default_str();
  study->add_option("--seed", study_opts.seed, "Master seed")->capture_default_str();
  study->add_option("--out", study_out, "Output CSV")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*simulate) {
      recipe.study = study_no == 1 ? SimRecipe::Study::kOne : SimRecipe::Study::kTwo;
      (study_no == 1 ? recipe.sigma_a : recipe.bbar) = param_a;
      (study_no == 1 ? recipe.sigma_g : recipe.sigma_b) = param_b;
      recipe.validate();
      write_text_file(sim_out, format_ap_csv(simulate_ap_dataset(recipe, sim_seed)));
      std::printf("wrote %s\n", sim_out.c_str());
      return kOk;
    }
    if (*fit_ap) return fit(ap_cfg);
    if (*fit_app) return fit(app_cfg);
    if (*summarize) {
      const Loaded data = load_dataset(sum_data, "");
      std::vector<Trace> traces;
      for (const auto& p : trace_paths) traces.push_back(parse_trace_csv(read_text_file(p)));
      write_summary(summarize_trace(traces, *data.family), data.labels, sum_out);
      std::printf("wrote summary tables to %s\n", sum_out.c_str());
      return kOk;
    }
    if (*study) {
      if (study_opts.replicates < 1 || study_opts.chains < 1 || study_opts.schedule.keep < 1 ||
          study_opts.schedule.burn < 0) {
        throw ConfigError("replicates, chains and keep must be positive");
      }
      SimRecipe base;
      base.study = study_kind == 1 ? SimRecipe::Study::kOne : SimRecipe::Study::kTwo;
      study_opts.threads = thread_budget(1 << 20);
      const StudyTable table = run_study(study_grid(base), study_opts);
      write_text_file(study_out, format_study_csv(table));
      for (const auto& cell : table.cells) {
        for (const auto& e : cell.errors) std::fprintf(stderr, "%s: %s\n", cell.recipe.label().c_str(), e.c_str());
      }
      std::printf("wrote %s\n", study_out.c_str());
      return kOk;
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
