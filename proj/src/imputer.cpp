#include "hybridest/imputer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "hybridest/csv_io.hpp"
#include "hybridest/parallel.hpp"

namespace hybridest {

std::string_view to_string(ImputationKind kind) {
  switch (kind) {
    case ImputationKind::MarOwnArm: return "MAR (own arm)";
    case ImputationKind::JumpToReference: return "J2R";
    case ImputationKind::JumpToReferencePlusNim: return "J2R + NIM";
    case ImputationKind::ReturnToBaseline: return "return to baseline";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Parameter draws

ParameterDraw draw_parameters(const MmrmFit& fit, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> beta_llt(fit.vcov_beta);
  if (beta_llt.info() != Eigen::Success) {
    throw NumericalError("covariance of the fixed effects is not SPD");
  }
  if (fit.theta_vcov.size() == 0) {
    throw NumericalError("covariance of the variance parameters is not SPD");
  }
  Eigen::LLT<Eigen::MatrixXd> theta_llt(fit.theta_vcov);
  if (theta_llt.info() != Eigen::Success) {
    throw NumericalError("covariance of the variance parameters is not SPD");
  }

  ParameterDraw draw;
  Eigen::VectorXd z(fit.beta.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  draw.beta = fit.beta + beta_llt.matrixL() * z;

  Eigen::VectorXd w(fit.theta.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  const Eigen::VectorXd theta = fit.theta + theta_llt.matrixL() * w;
  const int per_group = fit.n_visits * (fit.n_visits + 1) / 2;
  for (std::size_t g = 0; g < fit.sigma.size(); ++g) {
    draw.sigma.push_back(
        unpack_log_cholesky(theta.segment(static_cast<Eigen::Index>(g) * per_group, per_group), fit.n_visits));
  }
  return draw;
}

ParameterDraw draw_parameters(const MmrmFit& fit, std::uint64_t seed) {
  Rng rng(seed);
  return draw_parameters(fit, rng);
}

// ---------------------------------------------------------------------------
// Conditional normal

ConditionalNormal conditional_normal(const std::vector<std::optional<double>>& outcomes,
                                     const std::vector<bool>& targets, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& covariance) {
  const int n = static_cast<int>(outcomes.size());
  if (mean.size() != n || covariance.rows() != n || static_cast<int>(targets.size()) != n) {
    throw InputError("dimension mismatch in conditional normal");
  }
  std::vector<int> obs;
  ConditionalNormal out;
  for (int t = 0; t < n; ++t) {
    if (outcomes[t]) {
      obs.push_back(t);
    } else if (targets[t]) {
      out.missing.push_back(t);
    }
  }
  const int nm = static_cast<int>(out.missing.size());
  const int no = static_cast<int>(obs.size());

  Eigen::VectorXd mu_m(nm);
  Eigen::MatrixXd s_mm(nm, nm);
  for (int i = 0; i < nm; ++i) {
    mu_m(i) = mean(out.missing[i]);
    for (int j = 0; j < nm; ++j) s_mm(i, j) = covariance(out.missing[i], out.missing[j]);
  }
  if (no == 0 || nm == 0) {
    out.mean = mu_m;
    out.covariance = s_mm;
    return out;
  }

  Eigen::MatrixXd s_oo(no, no);
  Eigen::MatrixXd s_om(no, nm);
  Eigen::VectorXd resid(no);
  for (int i = 0; i < no; ++i) {
    resid(i) = *outcomes[obs[i]] - mean(obs[i]);
    for (int j = 0; j < no; ++j) s_oo(i, j) = covariance(obs[i], obs[j]);
    for (int j = 0; j < nm; ++j) s_om(i, j) = covariance(obs[i], out.missing[j]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s_oo, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo > 1e12) {
    throw NumericalError("conditioning covariance block is singular or ill-conditioned");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) throw NumericalError("conditioning covariance block is not SPD");
  const Eigen::MatrixXd k = llt.solve(s_om);  // Sigma_OO^-1 Sigma_OM
  out.mean = mu_m + k.transpose() * resid;
  out.covariance = s_mm - s_om.transpose() * k;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

std::vector<std::optional<double>> conditional_impute(const std::vector<std::optional<double>>& outcomes,
                                                      const std::vector<bool>& targets,
                                                      const ImputationProfile& profile, Rng& rng) {
  const ConditionalNormal cn = conditional_normal(outcomes, targets, profile.mean, profile.covariance);
  std::vector<std::optional<double>> completed = outcomes;
  const int nm = static_cast<int>(cn.missing.size());
  if (nm == 0) return completed;

  Eigen::MatrixXd root;
  Eigen::LLT<Eigen::MatrixXd> llt(cn.covariance);
  if (llt.info() == Eigen::Success) {
    root = llt.matrixL();
  } else {
    // Numerically semidefinite conditional covariance.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cn.covariance);
    root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  Eigen::VectorXd z(nm);
  for (int i = 0; i < nm; ++i) z(i) = rng.normal();
  const Eigen::VectorXd draw = cn.mean + root * z;
  for (int i = 0; i < nm; ++i) completed[cn.missing[i]] = draw(i);
  return completed;
}

std::vector<std::optional<double>> conditional_impute(const std::vector<std::optional<double>>& outcomes,
                                                      const std::vector<bool>& targets,
                                                      const ImputationProfile& profile,
                                                      std::uint64_t seed) {
  Rng rng(seed);
  return conditional_impute(outcomes, targets, profile, rng);
}

// ---------------------------------------------------------------------------
// Profiles

ImputationProfile build_mar_profile(const MmrmFit& fit, const ParameterDraw& draw, Arm arm,
                                    double baseline) {
  return {fit.mean_profile(draw.beta, arm, baseline), draw.sigma.at(fit.covariance_group(arm))};
}

ImputationProfile build_j2r_profile(const MmrmFit& fit, const ParameterDraw& draw, Arm arm,
                                    double baseline, int deviation_visit, Arm reference) {
  const int n = fit.n_visits;
  if (deviation_visit < 0 || deviation_visit > n) {
    throw InputError("deviation visit " + std::to_string(deviation_visit) + " is outside 0..T");
  }
  if (fit.arm_position(reference) < 0) {
    throw InputError("reference arm " + std::to_string(reference.z) + " is absent from the fit");
  }
  const int k = deviation_visit;
  const Eigen::VectorXd own = fit.mean_profile(draw.beta, arm, baseline);
  const Eigen::VectorXd ref = fit.mean_profile(draw.beta, reference, baseline);

  ImputationProfile profile;
  profile.mean = own;
  profile.mean.tail(n - k) = ref.tail(n - k);

  const int own_group = fit.covariance_group(arm);
  const int ref_group = fit.covariance_group(reference);
  const Eigen::MatrixXd& s_own = draw.sigma.at(own_group);
  const Eigen::MatrixXd& s_ref = draw.sigma.at(ref_group);
  if (own_group == ref_group || k == n) {
    profile.covariance = s_own;
    return profile;
  }
  if (k == 0) {
    profile.covariance = s_ref;
    return profile;
  }

  const int r = n - k;
  const Eigen::MatrixXd own11 = s_own.topLeftCorner(k, k);
  const Eigen::MatrixXd ref11 = s_ref.topLeftCorner(k, k);
  const Eigen::MatrixXd ref12 = s_ref.topRightCorner(k, r);
  const Eigen::MatrixXd ref22 = s_ref.bottomRightCorner(r, r);
  Eigen::LLT<Eigen::MatrixXd> llt(ref11);
  if (llt.info() != Eigen::Success) throw NumericalError("reference covariance block is not SPD");
  const Eigen::MatrixXd coef = llt.solve(ref12);  // ref11^-1 ref12
  const Eigen::MatrixXd cross = own11 * coef;
  Eigen::MatrixXd lower = ref22 - coef.transpose() * (ref11 - own11) * coef;
  lower = 0.5 * (lower + lower.transpose());

  profile.covariance.resize(n, n);
  profile.covariance.topLeftCorner(k, k) = own11;
  profile.covariance.topRightCorner(k, r) = cross;
  profile.covariance.bottomLeftCorner(r, k) = cross.transpose();
  profile.covariance.bottomRightCorner(r, r) = lower;
  return profile;
}

ImputationProfile build_return_to_baseline_profile(const MmrmFit& fit, const ParameterDraw& draw,
                                                   Arm arm, double baseline, int deviation_visit) {
  const int n = fit.n_visits;
  if (deviation_visit < 0 || deviation_visit > n) {
    throw InputError("deviation visit " + std::to_string(deviation_visit) + " is outside 0..T");
  }
  ImputationProfile profile = build_mar_profile(fit, draw, arm, baseline);
  const double level = fit.outcome_is_change ? 0.0 : baseline;
  for (int t = deviation_visit; t < n; ++t) profile.mean(t) = level;
  return profile;
}

std::vector<std::optional<double>> apply_nim_shift(const std::vector<std::optional<double>>& values,
                                                   const std::vector<bool>& shifted, double delta,
                                                   bool smaller_is_better) {
  if (!(delta >= 0)) throw InputError("non-inferiority margin must be >= 0");
  std::vector<std::optional<double>> out = values;
  const double shift = smaller_is_better ? delta : -delta;
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (shifted[t] && out[t]) *out[t] += shift;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rule dispatch

std::vector<std::vector<bool>> targeted_cells(const Dataset& dataset,
                                              const std::vector<ImputationRule>& rules,
                                              bool require_full_coverage,
                                              std::vector<int>* rule_of_subject) {
  const int n_visits = dataset.n_visits();
  std::vector<std::vector<bool>> targets(dataset.subjects.size(), std::vector<bool>(n_visits, false));
  if (rule_of_subject) rule_of_subject->assign(dataset.subjects.size(), -1);

  for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
    const SubjectRecord& s = dataset.subjects[i];
    int matched = -1;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      if (rules[r].applies_to && !rules[r].applies_to(s)) continue;
      if (matched >= 0) {
        throw InputError("overlapping imputation rules: subject " + s.id + " matches '" +
                         rules[matched].label + "' and '" + rules[r].label + "'");
      }
      matched = static_cast<int>(r);
    }
    if (matched >= 0) {
      const ImputationRule& rule = rules[matched];
      for (int t = 0; t < n_visits; ++t) {
        targets[i][t] = s.missing(t) && (rule.scope == CellScope::AllMissing || s.post_ice[t]);
      }
      if (rule_of_subject) (*rule_of_subject)[i] = matched;
    }
    if (require_full_coverage) {
      for (int t = 0; t < n_visits; ++t) {
        if (s.missing(t) && !targets[i][t]) {
          throw InputError("uncovered missing cell: subject " + s.id + " visit " + std::to_string(t + 1));
        }
      }
    }
  }
  return targets;
}

namespace {

Dataset impute_targets(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                       const std::vector<int>& rule_of_subject,
                       const std::vector<std::vector<bool>>& targets, const MmrmFit& fit,
                       std::uint64_t seed, ParameterDraw* draw_out) {
  Rng rng(seed);
  ParameterDraw draw = draw_parameters(fit, rng);
  Dataset completed = dataset;
  const int n_visits = dataset.n_visits();

  for (std::size_t i = 0; i < completed.subjects.size(); ++i) {
    const int r = rule_of_subject[i];
    if (r < 0) continue;
    const auto& cells = targets[i];
    if (std::find(cells.begin(), cells.end(), true) == cells.end()) continue;

    SubjectRecord& s = completed.subjects[i];
    const ImputationRule& rule = rules[r];
    const int k = std::clamp(s.deviation_visit(), 0, n_visits);
    ImputationProfile profile;
    switch (rule.kind) {
      case ImputationKind::MarOwnArm:
        profile = build_mar_profile(fit, draw, s.arm, s.baseline);
        break;
      case ImputationKind::JumpToReference:
      case ImputationKind::JumpToReferencePlusNim:
        profile = build_j2r_profile(fit, draw, s.arm, s.baseline, k, rule.reference_arm);
        break;
      case ImputationKind::ReturnToBaseline:
        profile = build_return_to_baseline_profile(fit, draw, s.arm, s.baseline, k);
        break;
    }
    s.outcomes = conditional_impute(s.outcomes, cells, profile, rng);

    // The margin applies to values imputed after the jump; subjects of the
    // reference arm have no jump.
    if (rule.kind == ImputationKind::JumpToReferencePlusNim && s.arm != rule.reference_arm) {
      std::vector<bool> shifted(n_visits, false);
      for (int t = k; t < n_visits; ++t) shifted[t] = cells[t];
      s.outcomes = apply_nim_shift(s.outcomes, shifted, rule.nim, dataset.smaller_is_better);
    }
  }
  if (draw_out) *draw_out = std::move(draw);
  return completed;
}

}  // namespace

Dataset impute_one(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                   const MmrmFit& fit, std::uint64_t seed, ParameterDraw* draw_out) {
  std::vector<int> rule_of_subject;
  const auto targets = targeted_cells(dataset, rules, false, &rule_of_subject);
  return impute_targets(dataset, rules, rule_of_subject, targets, fit, seed, draw_out);
}

ImputedSet impute_with_seeds(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                             const MmrmFit& fit, const std::vector<std::uint64_t>& seeds,
                             const ImputeOptions& options) {
  if (seeds.size() < 2) throw InputError("multiple imputation requires M >= 2");
  for (const auto& rule : rules) {
    if (rule.kind == ImputationKind::JumpToReferencePlusNim && !(rule.nim >= 0)) {
      throw InputError("non-inferiority margin must be >= 0");
    }
  }
  ImputedSet set;
  set.m = static_cast<int>(seeds.size());
  set.seeds = seeds;
  std::vector<int> rule_of_subject;
  set.imputed = targeted_cells(dataset, rules, options.require_full_coverage, &rule_of_subject);
  for (const auto& rule : rules) set.rule_labels.push_back(rule.label);

  set.completed.resize(seeds.size());
  set.parameter_draws.resize(seeds.size());
  parallel_for(seeds.size(), options.threads, [&](std::size_t i) {
    set.completed[i] = impute_targets(dataset, rules, rule_of_subject, set.imputed, fit, seeds[i],
                                      &set.parameter_draws[i]);
  });
  return set;
}

ImputedSet impute(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                  const MmrmFit& fit, int m, std::uint64_t master_seed, const ImputeOptions& options) {
  if (m < 2) throw InputError("multiple imputation requires M >= 2");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) seeds[i] = derive_seed(master_seed, static_cast<std::uint64_t>(i));
  ImputedSet set = impute_with_seeds(dataset, rules, fit, seeds, options);
  set.master_seed = master_seed;
  return set;
}

void write_imputed_csv(std::ostream& out, const ImputedSet& set) {
  for (int i = 0; i < set.m; ++i) {
    std::ostringstream buffer;
    write_dataset_csv(buffer, set.completed[i]);
    std::istringstream lines(buffer.str());
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
      if (header) {
        if (i == 0) out << "imputation_index," << line << '\n';
        header = false;
        continue;
      }
      out << i + 1 << ',' << line << '\n';
    }
  }
}

}  // namespace hybridest
