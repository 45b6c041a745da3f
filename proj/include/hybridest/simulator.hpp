#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"
#include "hybridest/truth_bundle.hpp"

namespace hybridest {

// Published marginal quantities a preset is tuned to reproduce. Documentation
// only; the simulator does not read them.
struct PresetTargets {
  std::vector<double> safety_rate;          // proportion with Category 1 ICE, per arm
  std::vector<double> efficacy_rate;        // Category 2
  std::vector<double> administrative_rate;  // Category 3
  std::vector<double> final_mean_change;    // hypothetical-strategy arm means at the last visit
};

// Generative model, per subject and arm z:
//
//   Y_t(z) = mean_change[z][t] + baseline_slope (b - baseline_mean) + e_t
//            + [z > 0] effect_heterogeneity_sd * u * week_t / week_T
//   e ~ N(0, residual_covariance), u ~ N(0, 1)
//
// Y(0) and Y(z) share e, so the reference-arm conditional law of Y(0) given
// a subject's on-treatment residuals is exactly the jump-to-reference law.
//
// ICEs are drawn at decision points k = 0..T-1 (after visit k): Category 1
// with per-visit hazard safety_hazard[z][k] (logit-shifted by
// frailty_log_odds * u when principal ignorability is off), Category 2 when
// the on-treatment value Y_k(z) is worse than efficacy_threshold[z] (k >= 1),
// Category 3 with hazard administrative_hazard[z][k]. Simultaneous triggers
// resolve as Category 1 > 2 > 3. Uniforms are shared across arms so S(0) and
// S(1) are coupled.
//
// After an ICE at k, the policy trajectory for t > k is
//   Y*_t(z) = Y_t(z) + w_(t-k) (Y_t(0) - Y_t(z)) + offset,
//   w_j = 1 - (1 - rescue_pull)^j,
// with offset = rescue_effect after Category 2 and safety_drift after
// Category 1. Post-ICE values are observed with probability retrieval_rate
// (never after death). Post-onset cells are flagged post-ICE whether or not
// they were observed.
struct ScenarioConfig {
  std::string name = "custom";
  std::vector<int> n_per_arm;
  std::vector<double> weeks;
  std::vector<std::vector<double>> mean_change;  // [arm][visit]
  Eigen::MatrixXd residual_covariance;
  double baseline_mean = 8.0;
  double baseline_sd = 1.0;
  double baseline_slope = 0.0;
  double effect_heterogeneity_sd = 0.0;

  std::vector<std::vector<double>> safety_hazard;          // [arm][decision point]
  std::vector<double> efficacy_threshold;                  // per arm; +inf disables
  std::vector<std::vector<double>> administrative_hazard;  // [arm][decision point]
  bool principal_ignorability = true;
  double frailty_log_odds = 0.0;

  double rescue_pull = 1.0;
  double rescue_effect = 0.0;
  double safety_drift = 0.0;
  double retrieval_rate = 0.0;
  double intermittent_missing_rate = 0.0;  // MCAR gaps at on-treatment visits before the last
  double death_fraction = 0.0;             // share of Category 1 ICEs that are deaths

  bool smaller_is_better = true;
  double delta = 0.0;  // margin the scenario is meant to be analyzed with
  std::string endpoint_name = "change in HbA1c (%)";
  std::uint64_t master_seed = 1;

  PresetTargets targets;

  int n_arms() const { return static_cast<int>(n_per_arm.size()); }
  int n_visits() const { return static_cast<int>(weeks.size()); }
};

// Throws InputError naming the first invalid field.
void validate_config(const ScenarioConfig& config);

struct SimulationResult {
  Dataset dataset;  // observed world, ICE categories filled
  TruthBundle truth;
};

// Deterministic in config.master_seed; subject i draws from its own stream
// derive_seed(master_seed, i).
SimulationResult simulate(const ScenarioConfig& config);

// Same hazard per decision point for every arm-specific rate given.
std::vector<std::vector<double>> constant_hazards(const std::vector<double>& per_arm, int n_visits);

// Per-decision-point hazard giving cumulative probability `total` over
// `n_visits` decision points.
double hazard_for_total(double total, int n_visits);

// Frozen configurations. award1_like and imagine3_like target the published
// ICE proportions and arm means of the two example trials; j2r_correct,
// mar_only and null are verification scenarios. Throws InputError for an
// unknown name.
ScenarioConfig calibrate_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace hybridest
