#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "rjmort/errors.hpp"
#include "rjmort/sim.hpp"

using namespace rjmort;

namespace {

SimRecipe study(SimRecipe::Study s, double p1, double p2) {
  SimRecipe r;
  r.study = s;
  if (s == SimRecipe::Study::kOne) {
    r.sigma_a = p1;
    r.sigma_g = p2;
  } else {
    r.bbar = p1;
    r.sigma_b = p2;
  }
  return r;
}

// eta(x, t) = f(x) + g(t) with f linear in x.
void check_additive_linear(const Eigen::MatrixXd& eta, double slope) {
  for (int t = 0; t < eta.cols(); ++t) {
    for (int x = 1; x < eta.rows(); ++x) {
      CHECK(eta(x, t) - eta(0, t) == doctest::Approx(slope * x).epsilon(1e-12));
    }
  }
}

}  // namespace

TEST_CASE("default recipe shape and exposure level") {
  const ApDataset d = simulate_ap_dataset(study(SimRecipe::Study::kOne, 0.05, 0.05), 3);
  CHECK(d.deaths.rows() == 20);
  CHECK(d.deaths.cols() == 30);
  CHECK(d.exposures.rows() == 20);
  CHECK(d.exposures.cols() == 30);
  CHECK(d.ages.front() == 60);
  CHECK(d.years.size() == 30);
  const double mean = d.exposures.mean();
  const double sd_of_mean = std::sqrt(1000.0 / 600.0);
  CHECK(std::abs(mean - 1000.0) < 3 * sd_of_mean);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("noise-free recipes collapse to the linear base model") {
  const SimRecipe one = study(SimRecipe::Study::kOne, 0.0, 0.0);
  check_additive_linear(simulate_ap(one, 1).eta, one.b);
  const SimRecipe two = study(SimRecipe::Study::kTwo, 0.5, 0.0);
  check_additive_linear(simulate_ap(two, 1).eta, two.b);
}

TEST_CASE("crude rates track the generating surface") {
  const SimulatedData s = simulate_ap(study(SimRecipe::Study::kTwo, 0.5, 0.15), 11);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int t = 0; t < s.eta.cols(); ++t) {
    for (int x = 0; x < s.eta.rows(); ++x) {
      const double d = s.data.deaths(x, t);
      if (d < 20) continue;
      const double y = std::log(d / s.data.exposures(x, t));
      const double e = s.eta(x, t);
      sx += e;
      sy += y;
      sxx += e * e;
      sxy += e * y;
      ++n;
    }
  }
  REQUIRE(n > 100);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope >= 0.9);
  CHECK(slope <= 1.1);
}

TEST_CASE("recipe validation") {
  SimRecipe r = study(SimRecipe::Study::kOne, -0.1, 0.05);
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.sigma_a = 0.05;
  r.exposure_mean = 0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.exposure_mean = 1000;
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("study grids are the published ones") {
  SimRecipe base;
  const auto g1 = study_grid(base);
  REQUIRE(g1.size() == 9);
  std::set<double> sa, sg;
  for (const auto& r : g1) {
    sa.insert(r.sigma_a);
    sg.insert(r.sigma_g);
  }
  CHECK(sa == std::set<double>{0.025, 0.05, 0.075});
  CHECK(sg == std::set<double>{0.05, 0.07, 0.09});

  base.study = SimRecipe::Study::kTwo;
  const auto g2 = study_grid(base);
  REQUIRE(g2.size() == 9);
  std::set<double> bb, sb;
  for (const auto& r : g2) {
    bb.insert(r.bbar);
    sb.insert(r.sigma_b);
  }
  CHECK(bb == std::set<double>{0.3, 0.4, 0.5});
  CHECK(sb == std::set<double>{0.05, 0.10, 0.15});
}

TEST_CASE("study runs are normalised and reproducible") {
  const std::vector<SimRecipe> grid{study(SimRecipe::Study::kTwo, 0.5, 0.15),
                                    study(SimRecipe::Study::kOne, 0.05, 0.07)};
  StudyOptions o;
  o.replicates = 2;
  o.chains = 2;
  o.schedule = {20, 40, 1, false};
  o.seed = 5;
  const StudyTable a = run_study(grid, o);
  o.threads = 2;
  const StudyTable b = run_study(grid, o);
  REQUIRE(a.cells.size() == 2);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].errors.empty());
    REQUIRE(a.cells[i].replicate_probs.size() == 2);
    for (const auto& rp : a.cells[i].replicate_probs) {
      double total = 0;
      for (const auto& [c, p] : rp) total += p;
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
    CHECK(a.cells[i].mean_probs == b.cells[i].mean_probs);
  }
  o.replicates = 0;
  CHECK_THROWS_AS(run_study(grid, o), ConfigError);
}

TEST_CASE("cell marginals sum configuration probabilities") {
  StudyCell c;
  c.mean_probs[ap_config(2, 1, 1, 1)] = 0.5;
  c.mean_probs[ap_config(1, 1, 1, 2)] = 0.3;
  c.mean_probs[ap_config(1, 1, 1, 1)] = 0.2;
  CHECK(c.marginal(0, 1) == doctest::Approx(0.5));
  CHECK(c.marginal(3, 2) == doctest::Approx(0.3));
  CHECK(c.prob(ap_config(2, 2, 2, 1)) == 0.0);
}

TEST_CASE("saturated marginals are exactly one") {
  StudyCell c;
  // 8/35 + 9/35 + 18/35 rounds below 1 in every summation order.
  c.mean_probs[ap_config(1, 1, 1, 1)] = 8.0 / 35;
  c.mean_probs[ap_config(1, 2, 1, 1)] = 9.0 / 35;
  c.mean_probs[ap_config(1, 3, 1, 1)] = 18.0 / 35;
  REQUIRE(8.0 / 35 + 9.0 / 35 + 18.0 / 35 != 1.0);
  CHECK(c.marginal(0, 1) == 1.0);
  CHECK(c.marginal(0, 2) == 0.0);

  Trace t;
  for (int i = 0; i < 4000; ++i) {
    Sample s;
    s.iteration = i;
    s.config = ap_config(2, 2, 2, 1);
    t.samples.push_back(s);
  }
  CHECK(config_probabilities(t).at(ap_config(2, 2, 2, 1)) == 1.0);
}

TEST_CASE("independent chains agree on a strong dataset") {
  const ApDataset d = simulate_ap_dataset(study(SimRecipe::Study::kTwo, 0.5, 0.15), 21);
  const ApFamily fam(d);
  const Sampler s(fam, {});
  const Schedule sch{300, 500, 1, false};
  const Trace a = run_chain(s, fam.simplest(), sch, 1);
  const Trace b = run_chain(s, fam.simplest(), sch, 2);
  const ConfigProbs pa = config_probabilities(a), pb = config_probabilities(b);
  for (int i = 0; i < 4; ++i) {
    for (int v = 1; v <= 3; ++v) {
      double ma = 0, mb = 0;
      for (const auto& [c, p] : pa) ma += c[i] == v ? p : 0;
      for (const auto& [c, p] : pb) mb += c[i] == v ? p : 0;
      CHECK(std::abs(ma - mb) < 0.1);
    }
  }
}
