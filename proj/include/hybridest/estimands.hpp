#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"
#include "hybridest/imputer.hpp"
#include "hybridest/mmrm.hpp"
#include "hybridest/pooling.hpp"
#include "hybridest/truth_bundle.hpp"

namespace hybridest {

enum class EstimandKind { Theoretic, DeFacto, Hybrid };

std::string_view to_string(EstimandKind kind);
std::optional<EstimandKind> parse_estimand_kind(std::string_view text);

// How the post-ICE outcomes of one ICE category enter the estimand.
enum class IceStrategy {
  HypotheticalMar,        // outcome had treatment continued; left to the MMRM likelihood
  NullByJumpToReference,  // no benefit: reference-arm law (+ margin) after the ICE
  ReturnToBaseline,       // no benefit: zero change from baseline after the ICE
};

std::string_view to_string(IceStrategy strategy);

// Index 0 is Category 1 (safety), 1 efficacy, 2 administrative.
using StrategyMap = std::array<IceStrategy, 3>;

constexpr StrategyMap kHybridStrategies = {IceStrategy::NullByJumpToReference,
                                           IceStrategy::HypotheticalMar,
                                           IceStrategy::HypotheticalMar};
constexpr StrategyMap kHypotheticalStrategies = {IceStrategy::HypotheticalMar,
                                                 IceStrategy::HypotheticalMar,
                                                 IceStrategy::HypotheticalMar};

struct EstimandSpec {
  EstimandKind kind = EstimandKind::Hybrid;
  double delta = 0.0;  // 0 for superiority, the non-inferiority margin otherwise
  bool smaller_is_better = true;
  int analysis_visit = 0;  // 1-based; 0 = last visit
  // Used by the Hybrid kind only; Theoretic is all-hypothetical and DeFacto
  // uses all data regardless of category.
  StrategyMap strategies = kHybridStrategies;
  CovarianceStructure covariance = CovarianceStructure::Shared;
  double alpha = 0.05;

  // The "no effect" treatment difference on the outcome scale: +delta when
  // smaller values are better, -delta otherwise.
  double null_effect() const { return smaller_is_better ? delta : -delta; }
};

// Throws InputError for negative or non-finite delta, alpha outside (0, 1),
// or a non-hybrid kind with a custom strategy map.
void validate_spec(const EstimandSpec& spec);

struct ArmMean {
  Arm arm;
  int n = 0;
  double mean = 0.0;
  double se = 0.0;
  std::optional<PooledEstimate> pooled;
};

// Experimental arm minus reference arm.
struct Difference {
  Arm arm;
  Arm reference;
  double value = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double df = 0.0;
  double p_value = 0.0;  // one-sided, H0: difference = null_effect()
  std::optional<PooledEstimate> pooled;
};

struct Provenance {
  std::string pipeline;
  std::vector<std::string> rules;
  int m = 0;  // 0 when no imputation was needed
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> imputation_seeds;
  std::string dataset_digest;
  int imputed_cells = 0;
};

struct EstimandResult {
  EstimandSpec spec;
  int analysis_visit = 0;  // resolved, 1-based
  std::vector<ArmMean> arm_means;
  std::vector<Difference> differences;
  Provenance provenance;
  // Convergence record of the fit on the analysis view (the imputation
  // model when imputation was used).
  int mmrm_iterations = 0;
  bool mmrm_converged = false;
};

struct EstimateOptions {
  unsigned threads = 1;  // 0 = hardware concurrency; results do not depend on it
};

// Theoretic: MMRM on on-treatment data.
// DeFacto: all available data; every missing experimental cell drawn by
//   jump to reference (+ margin), control cells by own-arm MAR; MMRM per
//   completed dataset; Rubin pooling.
// Hybrid: on-treatment data; post-ICE cells of categories mapped to a null
//   strategy are imputed, the rest stay missing for the MMRM likelihood;
//   pooled over imputations. Without any targeted cell the direct MMRM
//   result is returned.
// The imputation model is the MMRM fit on the on-treatment view. Errors are
// re-thrown with the pipeline stage prefixed.
EstimandResult estimate(const Dataset& dataset, const EstimandSpec& spec, int m,
                        std::uint64_t master_seed, const EstimateOptions& options = {});

// Imputation rules the pipeline for `spec` applies.
std::vector<ImputationRule> pipeline_rules(const EstimandSpec& spec);

// FNV-1a 64 of the canonical CSV serialization, as 16 hex digits.
std::string dataset_digest(const Dataset& dataset);
std::string fnv1a_hex(std::string_view bytes);

// --- Oracles over a finite population of potential outcomes -------------
// `arm` is the experimental arm compared with arm 0; `visit` is 1-based
// (0 = last).

// E[Y(1) - Y(0) | S(1) = 0] Pr(S(1) = 0) + delta Pr(S(1) = 1). Without a
// delta the margin term is taken as 0; that is an error only when nobody
// has S(1) = 0.
double true_hybrid(const TruthBundle& truth, std::optional<double> delta, Arm arm = Arm{1},
                   int visit = 0);
// Mean of (Y(1) - Y(0)) (1 - S(1)) + delta S(1).
double true_hybrid_pointwise(const TruthBundle& truth, double delta, Arm arm = Arm{1}, int visit = 0);
// {Pr(S(1)=0) E[Y(1)] + Pr(S(1)=1) (delta + E[Y(0)])} - E[Y(0)]: replaces the
// stratum-specific contrast by the marginal one.
double naive_decomposition(const TruthBundle& truth, double delta, Arm arm = Arm{1}, int visit = 0);
double true_theoretic(const TruthBundle& truth, Arm arm = Arm{1}, int visit = 0);
double true_defacto(const TruthBundle& truth, Arm arm = Arm{1}, int visit = 0);
// Pr(S(arm) = 1).
double safety_proportion(const TruthBundle& truth, Arm arm = Arm{1});

// --- Direct plug-in computation ------------------------------------------

// Per completed dataset:
//   mean over the arm of [(1 - S) Y + S (Y + null_effect)] - mean of arm 0,
// where S marks Category 1 subjects whose ICE precedes the analysis visit
// and whose completed value therefore stands for Y(0). Returns the average
// over datasets. Throws InputError when an experimental subject with an ICE
// has no category or the analysis-visit value is missing.
double plug_in_mu_hat(const std::vector<Dataset>& completed, const Dataset& classified,
                      double null_effect, Arm arm = Arm{1}, int visit = 0,
                      std::vector<double>* per_dataset = nullptr);

struct PlugInResult {
  double value = 0.0;
  std::vector<double> per_imputation;
  double mc_se = 0.0;  // between-imputation sd / sqrt(M)
};

// Completes the on-treatment view (J2R without margin for Category 1
// experimental subjects, own-arm MAR elsewhere) and evaluates the plug-in.
PlugInResult hybrid_plug_in(const Dataset& dataset, const EstimandSpec& spec, int m,
                            std::uint64_t master_seed, Arm arm = Arm{1},
                            const EstimateOptions& options = {});

}  // namespace hybridest
