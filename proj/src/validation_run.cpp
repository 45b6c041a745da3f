#include "hybridest/validation_run.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hybridest/errors.hpp"
#include "hybridest/parallel.hpp"
#include "hybridest/rng.hpp"

namespace hybridest {

namespace {

double oracle_for(EstimandKind kind, const TruthBundle& truth, double null_effect, Arm arm) {
  switch (kind) {
    case EstimandKind::Theoretic: return true_theoretic(truth, arm);
    case EstimandKind::DeFacto: return true_defacto(truth, arm);
    case EstimandKind::Hybrid: return true_hybrid(truth, null_effect, arm);
  }
  return 0.0;
}

}  // namespace

MonteCarloReport run_monte_carlo(const ScenarioConfig& config, const MonteCarloOptions& options) {
  validate_config(config);
  if (options.replications < 1) throw InputError("validation: replications must be >= 1");
  if (options.m < 2) throw InputError("validation: M must be >= 2");
  MonteCarloReport report;
  report.scenario = config.name;
  report.options = options;
  report.delta = options.delta.value_or(config.delta);
  if (!(report.delta >= 0)) throw InputError("validation: delta must be >= 0");

  const int R = options.replications;
  report.records.resize(static_cast<std::size_t>(R));
  parallel_for(static_cast<std::size_t>(R), options.threads, [&](std::size_t r) {
    ReplicationRecord rec;
    rec.index = static_cast<int>(r);
    rec.scenario_seed = derive_seed(options.master_seed, 2 * r);
    rec.imputation_seed = derive_seed(options.master_seed, 2 * r + 1);
    ScenarioConfig cfg = config;
    cfg.master_seed = rec.scenario_seed;
    const SimulationResult sim = simulate(cfg);
    for (int z = 1; z < config.n_arms(); ++z) rec.safety_proportion.push_back(safety_proportion(sim.truth, Arm{z}));

    for (const EstimandKind kind : options.pipelines) {
      EstimandSpec spec;
      spec.kind = kind;
      spec.delta = report.delta;
      spec.smaller_is_better = config.smaller_is_better;
      spec.alpha = options.alpha;
      const EstimandResult res = estimate(sim.dataset, spec, options.m, rec.imputation_seed);
      for (const Difference& d : res.differences) {
        PipelineOutcome o;
        o.kind = kind;
        o.arm = d.arm;
        o.estimate = d.value;
        o.se = d.se;
        o.ci_low = d.ci_low;
        o.ci_high = d.ci_high;
        o.p_value = d.p_value;
        o.oracle = oracle_for(kind, sim.truth, spec.null_effect(), d.arm);
        rec.outcomes.push_back(o);
      }
    }
    report.records[r] = std::move(rec);
  });
  report.summaries = summarize_replications(report.records, options.alpha);
  return report;
}

std::vector<PipelineSummary> summarize_replications(const std::vector<ReplicationRecord>& records,
                                                    double alpha) {
  std::map<std::pair<int, int>, std::vector<const PipelineOutcome*>> groups;
  std::vector<std::pair<int, int>> order;
  for (const auto& rec : records) {
    for (const auto& o : rec.outcomes) {
      const auto key = std::make_pair(static_cast<int>(o.kind), o.arm.z);
      auto& g = groups[key];
      if (g.empty() && std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
      g.push_back(&o);
    }
  }
  std::vector<PipelineSummary> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    const double n = static_cast<double>(g.size());
    PipelineSummary s;
    s.kind = g.front()->kind;
    s.arm = g.front()->arm;
    s.replications = static_cast<int>(g.size());
    double sum_err = 0.0;
    for (const auto* o : g) {
      s.mean_estimate += o->estimate;
      s.mean_oracle += o->oracle;
      s.mean_se += o->se;
      sum_err += o->estimate - o->oracle;
    }
    s.mean_estimate /= n;
    s.mean_oracle /= n;
    s.mean_se /= n;
    s.bias = sum_err / n;
    double ss_err = 0.0, ss_est = 0.0;
    int covered = 0, covered_own = 0, rejected = 0;
    for (const auto* o : g) {
      ss_err += std::pow(o->estimate - o->oracle - s.bias, 2);
      ss_est += std::pow(o->estimate - s.mean_estimate, 2);
      covered += o->ci_low <= s.mean_oracle && s.mean_oracle <= o->ci_high;
      covered_own += o->ci_low <= o->oracle && o->oracle <= o->ci_high;
      rejected += o->p_value < alpha / 2.0;
    }
    s.bias_mc_se = n > 1 ? std::sqrt(ss_err / (n - 1) / n) : 0.0;
    s.empirical_sd = n > 1 ? std::sqrt(ss_est / (n - 1)) : 0.0;
    s.coverage = covered / n;
    s.coverage_own_oracle = covered_own / n;
    s.rejection_rate = rejected / n;
    out.push_back(s);
  }
  return out;
}

}  // namespace hybridest
