#pragma once

#include <cstdint>
#include <vector>

#include "hybridest/estimands.hpp"
#include "hybridest/simulator.hpp"

namespace hybridest {

struct MonteCarloOptions {
  int replications = 200;
  int m = 20;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;  // across replications; 0 = hardware concurrency
  double alpha = 0.05;
  // Margin used by every pipeline; defaults to the scenario's.
  std::optional<double> delta;
  std::vector<EstimandKind> pipelines = {EstimandKind::Theoretic, EstimandKind::DeFacto,
                                         EstimandKind::Hybrid};
};

// Estimate and finite-population oracle of one pipeline for one
// experimental arm in one replication.
struct PipelineOutcome {
  EstimandKind kind = EstimandKind::Theoretic;
  Arm arm{1};
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 0.0;
  double oracle = 0.0;
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t scenario_seed = 0;
  std::uint64_t imputation_seed = 0;
  std::vector<PipelineOutcome> outcomes;  // pipeline-major, then arm
  std::vector<double> safety_proportion;  // Pr(S(z)=1) per experimental arm
};

struct PipelineSummary {
  EstimandKind kind = EstimandKind::Theoretic;
  Arm arm{1};
  int replications = 0;
  double mean_estimate = 0.0;
  double mean_oracle = 0.0;
  // Mean of estimate - per-replication oracle, and its Monte Carlo SE.
  double bias = 0.0;
  double bias_mc_se = 0.0;
  double empirical_sd = 0.0;
  double mean_se = 0.0;
  // Share of intervals containing the mean oracle (the population value
  // proxy) and the replication's own oracle.
  double coverage = 0.0;
  double coverage_own_oracle = 0.0;
  // Share of one-sided tests of H0: mu = null effect rejected at alpha / 2.
  double rejection_rate = 0.0;
};

struct MonteCarloReport {
  std::string scenario;
  MonteCarloOptions options;
  double delta = 0.0;
  std::vector<ReplicationRecord> records;  // ordered by replication index
  std::vector<PipelineSummary> summaries;
};

// Replication r simulates with seed derive_seed(master, 2r) and imputes
// with derive_seed(master, 2r + 1). Results do not depend on `threads`.
MonteCarloReport run_monte_carlo(const ScenarioConfig& config, const MonteCarloOptions& options);

std::vector<PipelineSummary> summarize_replications(const std::vector<ReplicationRecord>& records,
                                                    double alpha);

}  // namespace hybridest
