#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "hybridest/parallel.hpp"
#include "hybridest/report.hpp"
#include "hybridest/rng.hpp"
#include "hybridest/validation_run.hpp"

using namespace hybridest;

TEST_CASE("derived seeds are distinct and order independent") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 10000u);
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
  CHECK(derive_seed(42, 7) != derive_seed(43, 7));
}

TEST_CASE("parallel_for rethrows the first failure by index") {
  for (unsigned threads : {1u, 4u}) {
    std::vector<int> out(100, 0);
    try {
      parallel_for(out.size(), threads, [&](std::size_t i) {
        if (i == 37 || i == 80) throw std::runtime_error(std::to_string(i));
        out[i] = static_cast<int>(i);
      });
      FAIL("expected failure");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "37");
    }
    CHECK(out[99] == 99);
  }
}

TEST_CASE("summaries follow from the records") {
  std::vector<ReplicationRecord> recs;
  const double est[] = {0.1, -0.1, 0.3, 0.5};
  const double p[] = {0.01, 0.2, 0.03, 0.001};
  const double oracle[] = {0.0, 0.5, 0.2, 0.45};
  for (int r = 0; r < 4; ++r) {
    ReplicationRecord rec;
    rec.index = r;
    rec.outcomes.push_back({EstimandKind::Hybrid, Arm{1}, est[r], 0.1, est[r] - 0.2, est[r] + 0.2, p[r], oracle[r]});
    recs.push_back(rec);
  }
  const auto s = summarize_replications(recs, 0.05);
  REQUIRE(s.size() == 1u);
  CHECK(s[0].replications == 4);
  CHECK(s[0].mean_estimate == doctest::Approx(0.2));
  CHECK(s[0].mean_oracle == doctest::Approx(0.2875));
  CHECK(s[0].bias == doctest::Approx(-0.0875));
  // Intervals [est - 0.2, est + 0.2] vs mean oracle 0.2875: rows 0, 2 cover.
  CHECK(s[0].coverage == doctest::Approx(0.5));
  // Own oracles: all but row 1 cover.
  CHECK(s[0].coverage_own_oracle == doctest::Approx(0.75));
  CHECK(s[0].rejection_rate == doctest::Approx(0.5));
  CHECK(s[0].mean_se == doctest::Approx(0.1));
  const double sd = std::sqrt((0.01 + 0.09 + 0.01 + 0.09) / 3.0);
  CHECK(s[0].empirical_sd == doctest::Approx(sd));
}

TEST_CASE("Monte Carlo runs do not depend on thread count") {
  auto cfg = calibrate_preset("mar_only");
  cfg.n_per_arm = {60, 60};
  MonteCarloOptions opt;
  opt.replications = 6;
  opt.m = 3;
  opt.master_seed = 5;
  const auto a = run_monte_carlo(cfg, opt);
  opt.threads = 3;
  const auto b = run_monte_carlo(cfg, opt);
  CHECK(monte_carlo_json(a, true).dump() == monte_carlo_json(b, true).dump());
  REQUIRE(a.records.size() == 6u);
  CHECK(a.records[2].scenario_seed == derive_seed(5, 4));
  CHECK(a.records[2].imputation_seed == derive_seed(5, 5));
}

TEST_CASE("MAR-only scenario: theoretic pipeline is unbiased") {
  auto cfg = calibrate_preset("mar_only");
  cfg.n_per_arm = {150, 150};
  MonteCarloOptions opt;
  opt.replications = 100;
  opt.pipelines = {EstimandKind::Theoretic};
  opt.master_seed = 11;
  const auto rep = run_monte_carlo(cfg, opt);
  REQUIRE(rep.summaries.size() == 1u);
  CHECK(std::fabs(rep.summaries[0].bias) < 3 * rep.summaries[0].bias_mc_se);
}

TEST_CASE("null scenario: one-sided type-I error near nominal") {
  auto cfg = calibrate_preset("null");
  MonteCarloOptions opt;
  opt.replications = 2000;
  opt.pipelines = {EstimandKind::Theoretic};
  opt.master_seed = 3;
  opt.threads = 0;
  const auto rep = run_monte_carlo(cfg, opt);
  const double rate = rep.summaries[0].rejection_rate;
  CHECK(rate >= 0.015);
  CHECK(rate <= 0.035);
}

TEST_CASE("result table layout") {
  EstimandResult r;
  r.spec.kind = EstimandKind::Theoretic;
  r.arm_means = {{Arm{0}, 141, -0.41, 0.07, {}}, {Arm{1}, 280, -1.26, 0.05, {}}};
  r.differences = {{Arm{1}, Arm{0}, -0.851, 0.08, -1.014, -0.6701, 400, 0.0, {}}};
  std::ostringstream out;
  write_result_table(out, {r}, "Mean change at week 26");
  const std::string s = out.str();
  CHECK(s.find("-0.41 (0.07)") != std::string::npos);
  CHECK(s.find("-0.85 (-1.01, -0.67)") != std::string::npos);
  CHECK(s.find("MMRM (MAR), theoretic") != std::string::npos);
  CHECK(s.find(" \n") == std::string::npos);
  CHECK(fixed2(-0.001) == "0.00");
}

TEST_CASE("provenance hash ignores setting order") {
  const auto a = make_provenance({{"seed", "1"}, {"m", "100"}});
  const auto b = make_provenance({{"m", "100"}, {"seed", "1"}});
  const auto c = make_provenance({{"m", "100"}, {"seed", "2"}});
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash != c.config_hash);
}
