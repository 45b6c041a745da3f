#include "hybridest/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "hybridest/csv_io.hpp"
#include "hybridest/errors.hpp"
#include "hybridest/ice_classifier.hpp"
#include "hybridest/parallel.hpp"
#include "hybridest/rng.hpp"
#include "hybridest/stats.hpp"

namespace hybridest {

std::string_view to_string(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::Theoretic: return "theoretic";
    case EstimandKind::DeFacto: return "defacto";
    case EstimandKind::Hybrid: return "hybrid";
  }
  return "?";
}

std::optional<EstimandKind> parse_estimand_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "theoretic") return EstimandKind::Theoretic;
  if (s == "defacto" || s == "de_facto" || s == "de-facto") return EstimandKind::DeFacto;
  if (s == "hybrid") return EstimandKind::Hybrid;
  return std::nullopt;
}

std::string_view to_string(IceStrategy strategy) {
  switch (strategy) {
    case IceStrategy::HypotheticalMar: return "hypothetical-mar";
    case IceStrategy::NullByJumpToReference: return "null-j2r";
    case IceStrategy::ReturnToBaseline: return "return-to-baseline";
  }
  return "?";
}

void validate_spec(const EstimandSpec& spec) {
  if (!std::isfinite(spec.delta) || spec.delta < 0.0) {
    throw InputError("estimand: delta must be a finite value >= 0");
  }
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw InputError("estimand: alpha must lie in (0, 1)");
  if (spec.analysis_visit < 0) throw InputError("estimand: analysis visit must be >= 0");
  if (spec.kind != EstimandKind::Hybrid && spec.strategies != kHybridStrategies &&
      spec.strategies != kHypotheticalStrategies) {
    throw InputError("estimand: a strategy map is only meaningful for the hybrid estimand");
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_digest(const Dataset& dataset) {
  std::ostringstream out;
  out << dataset.endpoint_name << '\n'
      << dataset.smaller_is_better << dataset.outcome_is_change << dataset.schedule.analysis_visit << '\n';
  write_dataset_csv(out, dataset);
  return fnv1a_hex(out.str());
}

namespace {

bool category_is(const SubjectRecord& s, Category c) { return s.category && *s.category == c; }

std::string arm_label(Arm a) { return "arm " + std::to_string(a.z); }

std::string category_label(int c) { return "category " + std::to_string(c + 1); }

Dataset prepared(const Dataset& dataset, const EstimandSpec& spec) {
  require_valid(dataset);
  Dataset ds = dataset;
  // Only fill categories the caller left empty.
  for (auto& s : ds.subjects) {
    if (s.ice && !s.category) s.category = classify(*s.ice);
  }
  const int visit = spec.analysis_visit > 0 ? spec.analysis_visit : ds.schedule.resolved_analysis_visit();
  if (visit < 1 || visit > ds.n_visits()) {
    throw InputError("estimand: analysis visit " + std::to_string(visit) + " is outside 1.." +
                     std::to_string(ds.n_visits()));
  }
  ds.schedule.analysis_visit = visit;
  ds.smaller_is_better = spec.smaller_is_better;
  return ds;
}

struct PerFit {
  std::vector<Estimate> means;
  std::vector<ContrastEstimate> diffs;
};

PerFit summarize_fit(const MmrmFit& f, int visit, double alpha) {
  PerFit out;
  for (const Arm a : f.arms) out.means.push_back(ls_mean_change(f, a, visit));
  for (std::size_t k = 1; k < f.arms.size(); ++k) {
    out.diffs.push_back(contrast(f, f.arms[k], f.arms[0], visit, alpha));
  }
  return out;
}

double one_sided_p(double value, double se, double df, const Hypothesis& h) {
  if (!(se > 0)) return (value < h.null_value) == h.lower_is_better ? 0.0 : 1.0;
  const double t = (value - h.null_value) / se;
  const double lower = stats::t_cdf(df, t);
  return h.lower_is_better ? lower : 1.0 - lower;
}

EstimandResult direct_result(const Dataset& ds, const MmrmFit& f, const EstimandSpec& spec) {
  EstimandResult r;
  r.spec = spec;
  r.analysis_visit = ds.schedule.analysis_visit;
  const PerFit pf = summarize_fit(f, r.analysis_visit, spec.alpha);
  const Hypothesis h{spec.null_effect(), spec.smaller_is_better};
  for (std::size_t k = 0; k < f.arms.size(); ++k) {
    r.arm_means.push_back(ArmMean{f.arms[k], ds.count(f.arms[k]), pf.means[k].value, pf.means[k].se, {}});
  }
  for (std::size_t k = 1; k < f.arms.size(); ++k) {
    const ContrastEstimate& c = pf.diffs[k - 1];
    r.differences.push_back(Difference{f.arms[k], f.arms[0], c.value, c.se, c.ci_low, c.ci_high, c.df,
                                       one_sided_p(c.value, c.se, c.df, h), {}});
  }
  r.mmrm_iterations = f.n_iterations;
  r.mmrm_converged = f.converged;
  return r;
}

EstimandResult pooled_result(const Dataset& ds, const std::vector<PerFit>& fits, const MmrmFit& model,
                             const EstimandSpec& spec) {
  EstimandResult r;
  r.spec = spec;
  r.analysis_visit = ds.schedule.analysis_visit;
  const Hypothesis h{spec.null_effect(), spec.smaller_is_better};
  const double df = model.residual_df;
  for (std::size_t k = 0; k < model.arms.size(); ++k) {
    std::vector<CompleteDataEstimate> est;
    for (const auto& pf : fits) est.push_back({pf.means[k].value, pf.means[k].se, df});
    const PooledEstimate p = pool(est, spec.alpha, Hypothesis{});
    r.arm_means.push_back(ArmMean{model.arms[k], ds.count(model.arms[k]), p.q_bar, p.se(), p});
  }
  for (std::size_t k = 1; k < model.arms.size(); ++k) {
    std::vector<CompleteDataEstimate> est;
    for (const auto& pf : fits) est.push_back({pf.diffs[k - 1].value, pf.diffs[k - 1].se, df});
    const PooledEstimate p = pool(est, spec.alpha, h);
    r.differences.push_back(
        Difference{model.arms[k], model.arms[0], p.q_bar, p.se(), p.ci_low, p.ci_high, p.df, p.p_value, p});
  }
  r.mmrm_iterations = model.n_iterations;
  r.mmrm_converged = model.converged;
  return r;
}

}  // namespace

std::vector<ImputationRule> pipeline_rules(const EstimandSpec& spec) {
  const Arm ref{0};
  const bool margin = spec.delta > 0.0;
  const ImputationKind j2r = margin ? ImputationKind::JumpToReferencePlusNim : ImputationKind::JumpToReference;
  const std::string j2r_name = margin ? "jump to reference + margin" : "jump to reference";
  std::vector<ImputationRule> rules;

  switch (spec.kind) {
    case EstimandKind::Theoretic:
      break;
    case EstimandKind::DeFacto: {
      ImputationRule exp;
      exp.kind = j2r;
      exp.reference_arm = ref;
      exp.nim = spec.delta;
      exp.scope = CellScope::AllMissing;
      exp.label = "experimental arms, all missing: " + j2r_name;
      exp.applies_to = [ref](const SubjectRecord& s) { return s.arm != ref; };
      rules.push_back(exp);
      ImputationRule ctl;
      ctl.kind = ImputationKind::MarOwnArm;
      ctl.scope = CellScope::AllMissing;
      ctl.label = "reference arm, all missing: own-arm MAR";
      ctl.applies_to = [ref](const SubjectRecord& s) { return s.arm == ref; };
      rules.push_back(ctl);
      break;
    }
    case EstimandKind::Hybrid:
      for (int c = 0; c < 3; ++c) {
        const IceStrategy st = spec.strategies[c];
        if (st == IceStrategy::HypotheticalMar) continue;
        const Category cat = static_cast<Category>(c + 1);
        ImputationRule rule;
        rule.reference_arm = ref;
        rule.scope = CellScope::PostIceMissing;
        if (st == IceStrategy::NullByJumpToReference) {
          rule.kind = j2r;
          rule.nim = spec.delta;
          rule.label = category_label(c) + ", experimental arms, post-ICE: " + j2r_name;
        } else {
          rule.kind = ImputationKind::ReturnToBaseline;
          rule.label = category_label(c) + ", experimental arms, post-ICE: return to baseline";
        }
        rule.applies_to = [ref, cat](const SubjectRecord& s) { return s.arm != ref && category_is(s, cat); };
        rules.push_back(rule);
      }
      break;
  }
  return rules;
}

EstimandResult estimate(const Dataset& dataset, const EstimandSpec& spec, int m,
                        std::uint64_t master_seed, const EstimateOptions& options) {
  validate_spec(spec);
  const std::string pipeline(to_string(spec.kind));
  const Dataset ds = in_stage(pipeline + ": input", [&] { return prepared(dataset, spec); });
  const int visit = ds.schedule.analysis_visit;
  const MmrmModelSpec model_spec{spec.covariance};

  const Dataset on_treatment = analysis_view(ds, DataInclusionPolicy::OnTreatmentOnly);
  const MmrmFit model = in_stage(pipeline + ": mmrm on on-treatment data", [&] { return fit(on_treatment, model_spec); });

  EstimandSpec effective = spec;
  if (spec.kind == EstimandKind::Theoretic) effective.strategies = kHypotheticalStrategies;
  const std::vector<ImputationRule> rules = pipeline_rules(effective);

  const Dataset target = spec.kind == EstimandKind::DeFacto
                             ? analysis_view(ds, DataInclusionPolicy::AllAvailable)
                             : on_treatment;
  std::vector<int> rule_of_subject;
  const auto cells = in_stage(pipeline + ": imputation rules", [&] {
    return targeted_cells(target, rules, spec.kind == EstimandKind::DeFacto, &rule_of_subject);
  });
  int n_cells = 0;
  for (const auto& row : cells) n_cells += static_cast<int>(std::count(row.begin(), row.end(), true));

  Provenance prov;
  prov.pipeline = pipeline;
  for (const auto& rule : rules) prov.rules.push_back(rule.label);
  prov.master_seed = master_seed;
  prov.dataset_digest = dataset_digest(ds);
  prov.imputed_cells = n_cells;

  if (n_cells == 0) {
    // Nothing to impute: the likelihood-based fit is the estimator.
    MmrmFit direct = spec.kind == EstimandKind::DeFacto
                         ? in_stage(pipeline + ": mmrm", [&] { return fit(target, model_spec); })
                         : model;
    EstimandResult r = direct_result(ds, direct, spec);
    r.provenance = prov;
    return r;
  }

  ImputeOptions iopt;
  iopt.require_full_coverage = spec.kind == EstimandKind::DeFacto;
  iopt.threads = options.threads;
  const ImputedSet set = in_stage(pipeline + ": imputation", [&] { return impute(target, rules, model, m, master_seed, iopt); });

  std::vector<PerFit> fits(set.completed.size());
  in_stage(pipeline + ": analysis of imputed data", [&] {
    parallel_for(set.completed.size(), options.threads, [&](std::size_t i) {
      try {
        const MmrmFit f = fit(set.completed[i], model_spec);
        fits[i] = summarize_fit(f, visit, spec.alpha);
      } catch (const InputError& e) {
        throw InputError("imputation " + std::to_string(i + 1) + ": " + e.what());
      } catch (const NumericalError& e) {
        throw NumericalError("imputation " + std::to_string(i + 1) + ": " + e.what());
      }
    });
    return 0;
  });

  EstimandResult r = in_stage(pipeline + ": pooling", [&] { return pooled_result(ds, fits, model, spec); });
  prov.m = set.m;
  prov.imputation_seeds = set.seeds;
  r.provenance = prov;
  return r;
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

struct OracleColumns {
  int t = 0;
  int z = 1;
};

OracleColumns oracle_columns(const TruthBundle& truth, Arm arm, int visit) {
  if (truth.subjects.empty()) throw InputError("oracle: empty truth bundle");
  if (arm.z < 1 || arm.z >= truth.n_arms) throw InputError("oracle: arm " + std::to_string(arm.z) + " is not experimental");
  const int v = visit > 0 ? visit : truth.n_visits;
  if (v < 1 || v > truth.n_visits) throw InputError("oracle: visit out of range");
  for (const auto& s : truth.subjects) {
    if (static_cast<int>(s.potential.size()) != truth.n_arms ||
        static_cast<int>(s.safety_ice.size()) != truth.n_arms) {
      throw InputError("oracle: subject " + s.id + " lacks potential outcomes for every arm");
    }
    for (const auto& y : s.potential) {
      if (static_cast<int>(y.size()) != truth.n_visits) {
        throw InputError("oracle: subject " + s.id + " has incomplete potential outcomes");
      }
    }
  }
  return {v - 1, arm.z};
}

}  // namespace

double safety_proportion(const TruthBundle& truth, Arm arm) {
  const auto col = oracle_columns(truth, arm, 0);
  double n1 = 0;
  for (const auto& s : truth.subjects) n1 += s.safety_ice[col.z];
  return n1 / static_cast<double>(truth.subjects.size());
}

double true_hybrid(const TruthBundle& truth, std::optional<double> delta, Arm arm, int visit) {
  const auto [t, z] = oracle_columns(truth, arm, visit);
  double sum0 = 0.0;
  int n0 = 0;
  for (const auto& s : truth.subjects) {
    if (s.safety_ice[z] == 0) {
      sum0 += s.potential[z][t] - s.potential[0][t];
      ++n0;
    }
  }
  const double n = static_cast<double>(truth.subjects.size());
  if (n0 == 0 && !delta) {
    throw InputError("true_hybrid: every subject has a safety ICE and no margin was given");
  }
  const double p0 = n0 / n;
  const double conditional = n0 > 0 ? sum0 / n0 : 0.0;
  return conditional * p0 + delta.value_or(0.0) * (1.0 - p0);
}

double true_hybrid_pointwise(const TruthBundle& truth, double delta, Arm arm, int visit) {
  const auto [t, z] = oracle_columns(truth, arm, visit);
  double sum = 0.0;
  for (const auto& s : truth.subjects) {
    const int S = s.safety_ice[z];
    sum += (s.potential[z][t] - s.potential[0][t]) * (1 - S) + delta * S;
  }
  return sum / static_cast<double>(truth.subjects.size());
}

double naive_decomposition(const TruthBundle& truth, double delta, Arm arm, int visit) {
  const auto [t, z] = oracle_columns(truth, arm, visit);
  const double n = static_cast<double>(truth.subjects.size());
  double ey1 = 0.0, ey0 = 0.0, p1 = 0.0;
  for (const auto& s : truth.subjects) {
    ey1 += s.potential[z][t];
    ey0 += s.potential[0][t];
    p1 += s.safety_ice[z];
  }
  ey1 /= n;
  ey0 /= n;
  p1 /= n;
  return ((1.0 - p1) * ey1 + p1 * (delta + ey0)) - ey0;
}

double true_theoretic(const TruthBundle& truth, Arm arm, int visit) {
  const auto [t, z] = oracle_columns(truth, arm, visit);
  double sum = 0.0;
  for (const auto& s : truth.subjects) sum += s.potential[z][t] - s.potential[0][t];
  return sum / static_cast<double>(truth.subjects.size());
}

double true_defacto(const TruthBundle& truth, Arm arm, int visit) {
  const auto [t, z] = oracle_columns(truth, arm, visit);
  double sum = 0.0;
  for (const auto& s : truth.subjects) {
    if (static_cast<int>(s.policy.size()) != truth.n_arms ||
        static_cast<int>(s.policy[z].size()) != truth.n_visits ||
        static_cast<int>(s.policy[0].size()) != truth.n_visits) {
      throw InputError("true_defacto: subject " + s.id + " has no policy trajectory");
    }
    sum += s.policy[z][t] - s.policy[0][t];
  }
  return sum / static_cast<double>(truth.subjects.size());
}

// ---------------------------------------------------------------------------
// Plug-in

double plug_in_mu_hat(const std::vector<Dataset>& completed, const Dataset& classified,
                      double null_effect, Arm arm, int visit, std::vector<double>* per_dataset) {
  if (completed.empty()) throw InputError("plug-in: no completed datasets");
  if (arm.z < 1) throw InputError("plug-in: arm must be experimental");
  const int v = visit > 0 ? visit : classified.schedule.resolved_analysis_visit();
  if (v < 1 || v > classified.n_visits()) throw InputError("plug-in: visit out of range");
  const int t = v - 1;

  std::vector<int> safety(classified.subjects.size(), 0);
  for (std::size_t i = 0; i < classified.subjects.size(); ++i) {
    const auto& s = classified.subjects[i];
    if (s.arm != arm || !s.ice) continue;
    if (!s.category) throw InputError("plug-in: subject " + s.id + " has an unclassified ICE");
    safety[i] = *s.category == Category::Safety && s.ice->visit_of_onset < v ? 1 : 0;
  }

  if (per_dataset) per_dataset->clear();
  double total = 0.0;
  for (const Dataset& d : completed) {
    if (d.subjects.size() != classified.subjects.size()) {
      throw InputError("plug-in: completed dataset does not match the classified dataset");
    }
    double sum1 = 0.0, sum0 = 0.0;
    int n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < d.subjects.size(); ++i) {
      const auto& s = d.subjects[i];
      if (s.arm != arm && s.arm != Arm{0}) continue;
      if (!s.outcomes[t]) throw InputError("plug-in: subject " + s.id + " has no value at the analysis visit");
      const double y = *s.outcomes[t];
      if (s.arm == arm) {
        sum1 += safety[i] ? y + null_effect : y;
        ++n1;
      } else {
        sum0 += y;
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0) throw InputError("plug-in: an arm has no subjects");
    const double mu = sum1 / n1 - sum0 / n0;
    if (per_dataset) per_dataset->push_back(mu);
    total += mu;
  }
  return total / static_cast<double>(completed.size());
}

PlugInResult hybrid_plug_in(const Dataset& dataset, const EstimandSpec& spec, int m,
                            std::uint64_t master_seed, Arm arm, const EstimateOptions& options) {
  validate_spec(spec);
  const Dataset ds = in_stage("plug-in: input", [&] { return prepared(dataset, spec); });
  const int v = ds.schedule.analysis_visit;
  const Dataset on_treatment = analysis_view(ds, DataInclusionPolicy::OnTreatmentOnly);
  const MmrmFit model = in_stage("plug-in: mmrm", [&] { return fit(on_treatment, MmrmModelSpec{spec.covariance}); });

  auto stratum = [arm, v](const SubjectRecord& s) {
    return s.arm == arm && s.ice && category_is(s, Category::Safety) && s.ice->visit_of_onset < v;
  };
  ImputationRule j2r;
  j2r.kind = ImputationKind::JumpToReference;
  j2r.label = "category 1, " + arm_label(arm) + ": jump to reference";
  j2r.applies_to = stratum;
  ImputationRule mar;
  mar.kind = ImputationKind::MarOwnArm;
  mar.label = "others: own-arm MAR";
  mar.applies_to = [stratum](const SubjectRecord& s) { return !stratum(s); };

  ImputeOptions iopt;
  iopt.require_full_coverage = true;
  iopt.threads = options.threads;
  const ImputedSet set = in_stage("plug-in: imputation", [&] {
    return impute(on_treatment, {j2r, mar}, model, m, master_seed, iopt);
  });

  PlugInResult r;
  r.value = plug_in_mu_hat(set.completed, ds, spec.null_effect(), arm, v, &r.per_imputation);
  double ss = 0.0;
  for (double x : r.per_imputation) ss += (x - r.value) * (x - r.value);
  const double mm = static_cast<double>(r.per_imputation.size());
  r.mc_se = std::sqrt(ss / (mm - 1.0) / mm);
  return r;
}

}  // namespace hybridest
