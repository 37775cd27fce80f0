#include "rjmort/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "rjmort/errors.hpp"

namespace rjmort {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? s.npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<int, std::string_view>> lines_of(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::pair<int, std::string_view>> out;
  int no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t at = text.find('\n', start);
    const std::string_view line =
        trim(text.substr(start, at == std::string_view::npos ? text.npos : at - start));
    ++no;
    if (!line.empty()) out.emplace_back(no, line);
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::string where(int line) { return "line " + std::to_string(line) + ": "; }

long parse_int(std::string_view s, int line, const char* what) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DataError(where(line) + "bad " + what + " '" + std::string(s) + "'");
  }
  return v;
}

double parse_real(std::string_view s, int line, const char* what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(where(line) + "bad " + what + " '" + std::string(s) + "'");
  }
  return v;
}

void check_counts(double d, double e, int line) {
  if (d < 0 || e < 0) throw DataError(where(line) + "negative deaths or exposure");
  if (e == 0 && d > 0) throw DataError(where(line) + "deaths with zero exposure");
}

std::string num6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string num17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double round6(double v) { return std::stod(num6(v)); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ApDataset parse_ap_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0].second != "age,year,deaths,exposure") {
    throw DataError("expected header 'age,year,deaths,exposure'");
  }
  struct Row {
    int age, year;
    double d, e;
  };
  std::vector<Row> rows;
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [no, line] = lines[i];
    const auto f = split(line, ',');
    if (f.size() != 4) throw DataError(where(no) + "expected 4 fields");
    Row r{static_cast<int>(parse_int(f[0], no, "age")), static_cast<int>(parse_int(f[1], no, "year")),
          parse_real(f[2], no, "deaths"), parse_real(f[3], no, "exposure")};
    check_counts(r.d, r.e, no);
    if (!seen.insert({r.age, r.year}).second) {
      throw DataError(where(no) + "duplicate cell (" + std::to_string(r.age) + ", " +
                      std::to_string(r.year) + ")");
    }
    rows.push_back(r);
  }
  std::set<int> ages;
  std::set<int> years;
  for (const auto& r : rows) {
    ages.insert(r.age);
    years.insert(r.year);
  }
  ApDataset out;
  out.ages.assign(ages.begin(), ages.end());
  out.years.assign(years.begin(), years.end());
  out.deaths = Eigen::MatrixXd::Zero(out.X(), out.T());
  out.exposures = Eigen::MatrixXd::Zero(out.X(), out.T());
  for (const auto& r : rows) {
    const auto x = std::lower_bound(out.ages.begin(), out.ages.end(), r.age) - out.ages.begin();
    const auto t = std::lower_bound(out.years.begin(), out.years.end(), r.year) - out.years.begin();
    out.deaths(x, t) = r.d;
    out.exposures(x, t) = r.e;
  }

  return out;
}

AppDataset parse_app_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0].second != "age,year,product,deaths,exposure") {
    throw DataError("expected header 'age,year,product,deaths,exposure'");
  }
  struct Row {
    int age, year;
    std::string product;
    double d, e;
  };
  std::vector<Row> rows;
  std::vector<std::string> products;
  std::set<std::tuple<int, int, std::string>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [no, line] = lines[i];
    const auto f = split(line, ',');
    if (f.size() != 5) throw DataError(where(no) + "expected 5 fields");
    if (f[2].empty()) throw DataError(where(no) + "empty product label");
    Row r{static_cast<int>(parse_int(f[0], no, "age")), static_cast<int>(parse_int(f[1], no, "year")),
          std::string(f[2]), parse_real(f[3], no, "deaths"), parse_real(f[4], no, "exposure")};
    check_counts(r.d, r.e, no);
    if (!seen.insert({r.age, r.year, r.product}).second) {
      throw DataError(where(no) + "duplicate cell");
    }
    if (std::find(products.begin(), products.end(), r.product) == products.end()) {
      products.push_back(r.product);
    }
    rows.push_back(std::move(r));
  }
  std::set<int> ages;
  std::set<int> years;
  for (const auto& r : rows) {
    ages.insert(r.age);
    years.insert(r.year);
  }
  AppDataset out;
  out.ages.assign(ages.begin(), ages.end());
  out.years.assign(years.begin(), years.end());
  out.products = products;
  const int n = out.X() * out.T() * out.P();
  out.deaths = Eigen::VectorXd::Zero(n);
  out.exposures = Eigen::VectorXd::Zero(n);
  for (const auto& r : rows) {
    const int x = static_cast<int>(std::lower_bound(out.ages.begin(), out.ages.end(), r.age) -
                                   out.ages.begin());
    const int t = static_cast<int>(std::lower_bound(out.years.begin(), out.years.end(), r.year) -
                                   out.years.begin());
    const int p = static_cast<int>(std::find(products.begin(), products.end(), r.product) -
                                   products.begin());
    out.deaths[out.cell(x, t, p)] = r.d;
    out.exposures[out.cell(x, t, p)] = r.e;
  }

  return out;
}

std::string format_ap_csv(const ApDataset& data) {
  std::string out = "age,year,deaths,exposure\n";
  for (int x = 0; x < data.X(); ++x) {
    for (int t = 0; t < data.T(); ++t) {
      out += std::to_string(data.ages[x]) + "," + std::to_string(data.years[t]) + "," +
             num17(data.deaths(x, t)) + "," + num17(data.exposures(x, t)) + "\n";
    }
  }
  return out;
}

std::string format_app_csv(const AppDataset& data) {
  std::string out = "age,year,product,deaths,exposure\n";
  for (int p = 0; p < data.P(); ++p) {
    for (int x = 0; x < data.X(); ++x) {
      for (int t = 0; t < data.T(); ++t) {
        const int i = data.cell(x, t, p);
        out += std::to_string(data.ages[x]) + "," + std::to_string(data.years[t]) + "," +
               data.products[p] + "," + num17(data.deaths[i]) + "," +
               num17(data.exposures[i]) + "\n";
      }
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

CellLabels cell_labels(const ApDataset& data) {
  CellLabels out{{"age", "year"}, {}};
  for (int t = 0; t < data.T(); ++t) {
    for (int x = 0; x < data.X(); ++x) {
      out.rows.push_back({std::to_string(data.ages[x]), std::to_string(data.years[t])});
    }
  }
  return out;
}

CellLabels cell_labels(const AppDataset& data) {
  CellLabels out{{"age", "year", "product"}, {}};
  for (int p = 0; p < data.P(); ++p) {
    for (int t = 0; t < data.T(); ++t) {
      for (int x = 0; x < data.X(); ++x) {
        out.rows.push_back(
            {std::to_string(data.ages[x]), std::to_string(data.years[t]), data.products[p]});
      }
    }
  }
  return out;
}

std::string format_trace_csv(const Trace& trace) {
  std::string out = "# rjmort trace\n";
  out += "# schedule burn=" + std::to_string(trace.schedule.burn) +
         " keep=" + std::to_string(trace.schedule.keep) +
         " thin=" + std::to_string(trace.schedule.thin) + " seed=" + std::to_string(trace.seed) +
         " chains=" + std::to_string(trace.chains) + "\n";
  for (const auto& [id, s] : trace.diagnostics.moves) {
    out += "# move id=" + id + " proposed=" + std::to_string(s.proposed) +
           " accepted=" + std::to_string(s.accepted) +
           " laplace_failures=" + std::to_string(s.laplace_failures) +
           " singular=" + std::to_string(s.singular) + "\n";
  }
  out += "chain,iter,config,loglik\n";
  for (const auto& s : trace.samples) {
    out += std::to_string(s.chain) + "," + std::to_string(s.iteration) + "," + s.config.label() +
           "," + num17(s.loglik);
    for (BlockId b : s.params.present()) {
      const Eigen::VectorXd& v = s.params.get(b);
      for (int i = 0; i < v.size(); ++i) {
        out += ",";
        out += block_name(b);
        out += ":" + std::to_string(i) + "=" + num17(v[i]);
      }
    }
    out += "\n";
  }
  return out;
}

Trace parse_trace_csv(std::string_view text) {
  Trace trace;
  bool header = false;
  for (const auto& [no, line] : lines_of(text)) {
    if (line.front() == '#') {
      const auto words = split(line.substr(1), ' ');
      std::map<std::string, std::string, std::less<>> kv;
      for (auto w : words) {
        const auto eq = w.find('=');
        if (eq != std::string_view::npos) kv[std::string(w.substr(0, eq))] = w.substr(eq + 1);
      }
      const auto word = words.size() > 1 ? words[1] : std::string_view{};
      try {
        if (word == "schedule") {
          trace.schedule.burn = std::stoi(kv.at("burn"));
          trace.schedule.keep = std::stoi(kv.at("keep"));
          trace.schedule.thin = std::stoi(kv.at("thin"));
          trace.seed = std::stoull(kv.at("seed"));
          trace.chains = std::stoi(kv.at("chains"));
        } else if (word == "move") {
          MoveStats& s = trace.diagnostics.moves[kv.at("id")];
          s.proposed = std::stol(kv.at("proposed"));
          s.accepted = std::stol(kv.at("accepted"));
          s.laplace_failures = std::stol(kv.at("laplace_failures"));
          s.singular = std::stol(kv.at("singular"));
        }
      } catch (const std::exception&) {
        throw DataError(where(no) + "malformed trace comment");
      }
      continue;
    }
    if (!header) {
      if (line != "chain,iter,config,loglik") {
        throw DataError(where(no) + "expected trace header 'chain,iter,config,loglik'");
      }
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() < 4) throw DataError(where(no) + "short trace row");
    Sample s;
    s.chain = static_cast<int>(parse_int(f[0], no, "chain"));
    s.iteration = parse_int(f[1], no, "iteration");
    try {
      s.config = parse_config_label(f[2], static_cast<int>(f[2].size()));
    } catch (const ConfigError& e) {
      throw DataError(where(no) + e.what());
    }
    s.loglik = parse_real(f[3], no, "loglik");
    std::map<BlockId, std::vector<std::pair<int, double>>> blocks;
    for (std::size_t i = 4; i < f.size(); ++i) {
      const auto colon = f[i].find(':');
      const auto eq = f[i].find('=');
      if (colon == std::string_view::npos || eq == std::string_view::npos || eq < colon) {
        throw DataError(where(no) + "bad parameter field '" + std::string(f[i]) + "'");
      }
      const auto id = block_from_name(f[i].substr(0, colon));
      if (!id) throw DataError(where(no) + "unknown block in '" + std::string(f[i]) + "'");
      blocks[*id].emplace_back(
          static_cast<int>(parse_int(f[i].substr(colon + 1, eq - colon - 1), no, "index")),
          parse_real(f[i].substr(eq + 1), no, "value"));
    }
    for (const auto& [id, entries] : blocks) {
      int n = 0;
      for (const auto& e : entries) n = std::max(n, e.first + 1);
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (const auto& e : entries) v[e.first] = e.second;
      s.params.set(id, std::move(v));
    }
    trace.samples.push_back(std::move(s));
  }
  if (!header) throw DataError("trace has no header row");
  if (trace.chains == 0) {
    std::set<int> ids;
    for (const auto& s : trace.samples) ids.insert(s.chain);
    trace.chains = static_cast<int>(ids.size());
  }
  return trace;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

SummaryBundle summarize_trace(const std::vector<Trace>& traces, const ModelFamily& family) {
  SummaryBundle out;
  out.framework = std::string(family.name());
  std::map<ModelConfig, long> counts;
  bool have_params = true;
  for (const auto& t : traces) {
    out.chains += t.chains;
    out.diagnostics.merge(t.diagnostics);
    for (const auto& s : t.samples) {
      if (s.config.arity != family.arity() || !family.in_catalog(s.config)) {
        throw DataError("trace config " + s.config.label() + " is not in the " +
                        std::string(family.name()) + " catalogue");
      }
      ++counts[s.config];
      ++out.samples;
      if (s.params.present().empty()) have_params = false;
    }
  }
  if (out.samples == 0) throw DataError("empty trace");

  for (const auto& [c, n] : counts) {
    out.config_probs.push_back({c, static_cast<double>(n) / static_cast<double>(out.samples), n});
  }
  std::stable_sort(out.config_probs.begin(), out.config_probs.end(),
                   [](const ConfigProb& a, const ConfigProb& b) { return a.prob > b.prob; });

  for (int i = 0; i < family.arity(); ++i) {
    std::set<int> values;
    for (const auto& c : family.catalog()) values.insert(c[i]);
    for (int v : values) {
      double p = 0.0;
      for (const auto& cp : out.config_probs) {
        if (cp.config[i] == v) p += cp.prob;
      }
      out.marginals.push_back({i + 1, v, p});
    }
  }

  const CellData& cells = family.cells();
  const int n = cells.size();
  if (have_params) {
    Eigen::MatrixXd eta(n, out.samples);
    long k = 0;
    for (const auto& t : traces) {
      for (const auto& s : t.samples) eta.col(k++) = family.predict(s.config, s.params);
    }
    std::vector<double> row(static_cast<std::size_t>(out.samples));
    for (int i = 0; i < n; ++i) {
      for (long j = 0; j < out.samples; ++j) row[static_cast<std::size_t>(j)] = eta(i, j);
      out.pci.push_back({static_cast<std::size_t>(i), quantile(row, 0.025), quantile(row, 0.5),
                         quantile(row, 0.975)});
    }
  }
  for (int i = 0; i < n; ++i) {
    const double d = cells.deaths()[i];
    const double e = cells.exposure()[i];
    out.crude.push_back({static_cast<std::size_t>(i), d, e, std::log((d + 0.5) / (e + 1.0)), d == 0});
  }
  return out;
}

void write_summary(const SummaryBundle& b, const CellLabels& labels,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string label_header;
  for (const auto& c : labels.columns) label_header += c + ",";
  auto label_prefix = [&](std::size_t cell) {
    std::string s;
    for (const auto& v : labels.rows.at(cell)) s += csv_field(v) + ",";
    return s;
  };

  std::string cp = "config,probability,count\n";
  for (const auto& c : b.config_probs) {
    cp += c.config.label() + "," + num6(c.prob) + "," + std::to_string(c.count) + "\n";
  }
  write_text_file(dir / "config_probs.csv", cp);

  std::string dm = "delta,value,probability\n";
  for (const auto& m : b.marginals) {
    dm += std::to_string(m.index) + "," + std::to_string(m.value) + "," + num6(m.prob) + "\n";
  }
  write_text_file(dir / "delta_marginals.csv", dm);

  std::string pci = label_header + "lower,median,upper\n";
  for (const auto& r : b.pci) {
    pci += label_prefix(r.cell) + num6(r.lower) + "," + num6(r.median) + "," + num6(r.upper) + "\n";
  }
  write_text_file(dir / "pci.csv", pci);

  std::string cr = label_header + "deaths,exposure,log_crude_rate,zero_deaths\n";
  for (const auto& r : b.crude) {
    cr += label_prefix(r.cell) + num6(r.deaths) + "," + num6(r.exposure) + "," +
          num6(r.log_rate) + "," + (r.zero_deaths ? "1" : "0") + "\n";
  }
  write_text_file(dir / "crude_rates.csv", cr);

  std::string dg = "move,proposed,accepted,acceptance_rate,laplace_failures,singular\n";
  for (const auto& [id, s] : b.diagnostics.moves) {
    const double rate = s.proposed ? static_cast<double>(s.accepted) / s.proposed : 0.0;
    dg += csv_field(id) + "," + std::to_string(s.proposed) + "," + std::to_string(s.accepted) +
          "," + num6(rate) + "," + std::to_string(s.laplace_failures) + "," +
          std::to_string(s.singular) + "\n";
  }
  write_text_file(dir / "diagnostics.csv", dg);

  nlohmann::ordered_json j;
  j["framework"] = b.framework;
  j["samples"] = b.samples;
  j["chains"] = b.chains;
  for (const auto& c : b.config_probs) {
    j["config_probs"].push_back({{"config", c.config.label()}, {"probability", round6(c.prob)}});
  }
  for (const auto& m : b.marginals) {
    j["delta_marginals"].push_back(
        {{"delta", m.index}, {"value", m.value}, {"probability", round6(m.prob)}});
  }
  for (const auto& [id, s] : b.diagnostics.moves) {
    j["diagnostics"][id] = {{"proposed", s.proposed},
                            {"accepted", s.accepted},
                            {"laplace_failures", s.laplace_failures},
                            {"singular", s.singular}};
  }
  j["tables"] = {"config_probs.csv", "delta_marginals.csv", "pci.csv", "crude_rates.csv",
                 "diagnostics.csv"};
  write_text_file(dir / "report.json", j.dump(2) + "\n");
}

std::string format_study_csv(const StudyTable& table) {
  std::string out = "study,param_a,param_b,config,probability,replicates,errors\n";
  for (const auto& cell : table.cells) {
    const SimRecipe& r = cell.recipe;
    const bool one = r.study == SimRecipe::Study::kOne;
    const std::string prefix = std::string(one ? "1," : "2,") + num6(one ? r.sigma_a : r.bbar) +
                               "," + num6(one ? r.sigma_g : r.sigma_b) + ",";
    for (const auto& [c, p] : cell.mean_probs) {
      out += prefix + c.label() + "," + num6(p) + "," +
             std::to_string(cell.replicate_probs.size()) + "," +
             std::to_string(cell.errors.size()) + "\n";
    }
  }
  return out;
}

void RunConfig::validate(const ModelFamily& family) const {
  if (chains < 1 || keep < 1 || thin < 1 || burn < 0) {
    throw ConfigError("chains, keep and thin must be positive and burn non-negative");
  }
  if (prior_tau && !(*prior_tau > 0)) throw ConfigError("prior tau must be positive");
  ModelPrior::parse(model_prior);
  init(family);
}

SamplerSettings RunConfig::sampler_settings() const {
  SamplerSettings s;
  s.model_prior = ModelPrior::parse(model_prior);
  if (prior_tau) s.param_prior = ParamPrior::gaussian(*prior_tau);
  return s;
}

Schedule RunConfig::schedule() const { return {burn, keep, thin, true}; }

ModelConfig RunConfig::init(const ModelFamily& family) const {
  if (init_config.empty()) return family.simplest();
  const ModelConfig c = parse_config_label(init_config, family.arity());
  if (!family.in_catalog(c)) {
    throw ConfigError("init config " + init_config + " is not in the " +
                      std::string(family.name()) + " catalogue");
  }
  return c;
}

}  // namespace rjmort
