#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"
#include "hybridest/mmrm.hpp"
#include "hybridest/rng.hpp"

namespace hybridest {

enum class ImputationKind { MarOwnArm, JumpToReference, JumpToReferencePlusNim, ReturnToBaseline };

std::string_view to_string(ImputationKind kind);

// Which missing cells of a matched subject the rule fills.
enum class CellScope {
  AllMissing,
  PostIceMissing,  // only cells flagged as collected after ICE onset
};

struct ImputationRule {
  ImputationKind kind = ImputationKind::MarOwnArm;
  Arm reference_arm{0};
  double nim = 0.0;  // used by JumpToReferencePlusNim only
  CellScope scope = CellScope::AllMissing;
  std::string label;
  std::function<bool(const SubjectRecord&)> applies_to;
};

// One proper-MI parameter draw: fixed effects and covariance matrices
// (one per covariance group of the fit).
struct ParameterDraw {
  Eigen::VectorXd beta;
  std::vector<Eigen::MatrixXd> sigma;
};

// Joint law used to complete one subject's outcome vector.
struct ImputationProfile {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct ConditionalNormal {
  std::vector<int> missing;  // positions of the conditional components
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct ImputedSet {
  int m = 0;
  std::vector<Dataset> completed;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<ParameterDraw> parameter_draws;
  // imputed[i][t]: cell (subject i, visit t) was filled by a rule.
  std::vector<std::vector<bool>> imputed;
  std::vector<std::string> rule_labels;
};

struct ImputeOptions {
  // Fail when a missing cell is left untouched by every rule.
  bool require_full_coverage = false;
  // Worker threads; 0 uses the hardware concurrency. Results do not depend
  // on this value.
  unsigned threads = 1;
};

// beta ~ N(beta_hat, vcov_beta); log-Cholesky parameters ~ N(theta_hat,
// theta_vcov) mapped back, so every covariance draw is SPD.
ParameterDraw draw_parameters(const MmrmFit& fit, Rng& rng);
ParameterDraw draw_parameters(const MmrmFit& fit, std::uint64_t seed);

// Law of the components flagged in `targets` given the observed entries of
// `outcomes` under N(mean, covariance). Observed entries that are not
// targets condition the draw; missing non-target entries are marginalized.
// Throws NumericalError when the conditioning block has condition number
// above 1e12 or is not positive definite.
ConditionalNormal conditional_normal(const std::vector<std::optional<double>>& outcomes,
                                     const std::vector<bool>& targets, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& covariance);

std::vector<std::optional<double>> conditional_impute(const std::vector<std::optional<double>>& outcomes,
                                                      const std::vector<bool>& targets,
                                                      const ImputationProfile& profile, Rng& rng);
std::vector<std::optional<double>> conditional_impute(const std::vector<std::optional<double>>& outcomes,
                                                      const std::vector<bool>& targets,
                                                      const ImputationProfile& profile,
                                                      std::uint64_t seed);

// Jump-to-reference law for a subject of `arm` deviating after visit
// `deviation_visit` (0..T). Means follow the subject's own arm up to the
// deviation and the reference arm afterwards; the covariance keeps the own
// arm's pre-deviation block while post-deviation values, given the past,
// follow the reference arm's conditional law.
ImputationProfile build_j2r_profile(const MmrmFit& fit, const ParameterDraw& draw, Arm arm,
                                    double baseline, int deviation_visit, Arm reference = Arm{0});

// Own-arm (MAR) law.
ImputationProfile build_mar_profile(const MmrmFit& fit, const ParameterDraw& draw, Arm arm,
                                    double baseline);

// Own-arm law up to the deviation; afterwards the mean returns to the
// subject's baseline level (zero change when outcomes are changes).
ImputationProfile build_return_to_baseline_profile(const MmrmFit& fit, const ParameterDraw& draw,
                                                   Arm arm, double baseline, int deviation_visit);

// Shifts the cells flagged in `shifted` by +delta (smaller is better) or
// -delta (larger is better). Other cells are returned unchanged.
std::vector<std::optional<double>> apply_nim_shift(const std::vector<std::optional<double>>& values,
                                                   const std::vector<bool>& shifted, double delta,
                                                   bool smaller_is_better);

// Cells each rule will fill, per subject. Throws InputError for subjects
// matched by more than one rule, and for uncovered missing cells when
// `require_full_coverage` is set.
std::vector<std::vector<bool>> targeted_cells(const Dataset& dataset,
                                              const std::vector<ImputationRule>& rules,
                                              bool require_full_coverage,
                                              std::vector<int>* rule_of_subject = nullptr);

// One completed dataset from a single seed: parameter draw first, then
// subjects in order.
Dataset impute_one(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                   const MmrmFit& fit, std::uint64_t seed, ParameterDraw* draw_out = nullptr);

ImputedSet impute_with_seeds(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                             const MmrmFit& fit, const std::vector<std::uint64_t>& seeds,
                             const ImputeOptions& options = {});

// M completed datasets with per-imputation seeds derive_seed(master_seed, i).
ImputedSet impute(const Dataset& dataset, const std::vector<ImputationRule>& rules,
                  const MmrmFit& fit, int m, std::uint64_t master_seed,
                  const ImputeOptions& options = {});

// M stacked copies of the long-format dataset CSV with a leading
// imputation_index column.
void write_imputed_csv(std::ostream& out, const ImputedSet& set);

}  // namespace hybridest
