#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"
#include "hybridest/errors.hpp"

namespace hybridest {

enum class CovarianceStructure { Shared, PerArm };

struct MmrmModelSpec {
  CovarianceStructure covariance = CovarianceStructure::Shared;
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
  double gradient_tolerance = 1e-6;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct ContrastEstimate {
  double value = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double df = 0.0;
};

// REML fit of the repeated-measures model
//
//   y_it = b0_t + sum_k b_kt [arm_i == k] + b_Bt (baseline_i - mean baseline) + e_it,
//   e_i ~ N(0, Sigma)
//
// i.e. visit, treatment-by-visit and baseline-by-visit effects, with an
// unstructured covariance shared by all arms or estimated per arm. The
// coefficient vector is stored visit-major: block t holds
// [intercept, arm dummies..., centered baseline].
struct MmrmFit {
  std::vector<Arm> arms;  // arms[0] is the reference arm
  int n_visits = 0;
  int n_subjects = 0;
  int n_observations = 0;
  double baseline_mean = 0.0;
  bool outcome_is_change = true;
  CovarianceStructure covariance = CovarianceStructure::Shared;

  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov_beta;
  std::vector<Eigen::MatrixXd> sigma;  // one per covariance group
  Eigen::VectorXd theta;               // log-Cholesky parameters, groups concatenated
  Eigen::MatrixXd theta_vcov;          // inverse observed information; empty if not PD

  double reml_loglik = 0.0;
  bool converged = false;
  int n_iterations = 0;
  std::vector<double> loglik_trace;
  int residual_df = 0;
  std::vector<std::string> column_names;

  int columns_per_visit() const { return static_cast<int>(arms.size()) + 1; }
  // Position of `arm` in `arms`, or -1.
  int arm_position(Arm arm) const;
  int covariance_group(Arm arm) const;
  const Eigen::MatrixXd& sigma_for(Arm arm) const;
  // Between-subject covariate row [1, arm dummies..., baseline - mean].
  Eigen::VectorXd design_row(Arm arm, double baseline) const;
  // Model mean at every visit for a subject of `arm` with `baseline`, using
  // the supplied coefficient vector (point estimate or a posterior draw).
  Eigen::VectorXd mean_profile(const Eigen::VectorXd& coefficients, Arm arm, double baseline) const;
};

// Thrown when the optimizer exhausts its iteration budget or stalls short of
// the convergence criteria. Carries the last iterate.
class MmrmConvergenceError : public NumericalError {
 public:
  MmrmConvergenceError(const std::string& what, MmrmFit last)
      : NumericalError(what), last_iterate(std::move(last)) {}
  MmrmFit last_iterate;
};

// Unconstrained parameterization of an SPD matrix: lower Cholesky factor in
// row-major lower-triangle order with log-transformed diagonal.
Eigen::VectorXd pack_log_cholesky(const Eigen::MatrixXd& sigma);
Eigen::MatrixXd unpack_log_cholesky(const Eigen::Ref<const Eigen::VectorXd>& theta, int dim);
Eigen::MatrixXd cholesky_from_theta(const Eigen::Ref<const Eigen::VectorXd>& theta, int dim);

// Restricted log-likelihood with beta profiled out, computed from
// per-missingness-pattern sufficient statistics.
class RemlObjective {
 public:
  RemlObjective(const Dataset& dataset, CovarianceStructure covariance);

  struct Evaluation {
    double loglik = 0.0;
    Eigen::VectorXd gradient;  // empty unless requested
    Eigen::VectorXd beta;
    Eigen::MatrixXd a_inverse;  // (X' V^-1 X)^-1, empty unless gradient requested
  };

  int n_params() const;
  int n_groups() const { return n_groups_; }
  int n_visits() const { return n_visits_; }
  int n_columns() const { return n_visits_ * q_; }

  // Throws NumericalError when a covariance block or the fixed-effect
  // information matrix is not positive definite.
  Evaluation evaluate(const Eigen::VectorXd& theta, bool with_gradient) const;
  double loglik(const Eigen::VectorXd& theta) const { return evaluate(theta, false).loglik; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const { return evaluate(theta, true).gradient; }

  // Central differences of the analytic gradient.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;

  // Per-visit least squares for beta, pairwise-deletion residual covariance
  // projected to SPD for Sigma.
  Eigen::VectorXd starting_theta() const;

  // Index of the first aliased design column, or -1.
  int aliased_column() const;

  const std::vector<Arm>& arms() const { return arms_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  double baseline_mean() const { return baseline_mean_; }
  int n_subjects() const { return n_subjects_; }
  int n_observations() const { return n_observations_; }

 private:
  struct Cell {
    int group = 0;
    std::vector<int> observed;
    int n = 0;
    Eigen::MatrixXd syy;  // T x T
    Eigen::MatrixXd syc;  // T x q
    Eigen::MatrixXd scc;  // q x q
  };
  struct SubjectRow {
    int group = 0;
    std::uint64_t mask = 0;
    Eigen::VectorXd c;
    Eigen::VectorXd y;  // zero where missing
  };

  std::vector<Arm> arms_;
  std::vector<std::string> column_names_;
  int n_visits_ = 0;
  int q_ = 0;
  int n_groups_ = 1;
  int n_subjects_ = 0;
  int n_observations_ = 0;
  double baseline_mean_ = 0.0;
  std::vector<Cell> cells_;
  std::vector<SubjectRow> rows_;
};

MmrmFit fit(const Dataset& dataset, const MmrmModelSpec& spec = {});

// Model-based mean change at `visit` (1-based) for `arm`, evaluated at the
// overall mean baseline.
Estimate ls_mean_change(const MmrmFit& fit, Arm arm, int visit);

// LS-mean difference arm_a - arm_b with a two-sided (1 - alpha) t interval
// on the residual degrees of freedom.
ContrastEstimate contrast(const MmrmFit& fit, Arm arm_a, Arm arm_b, int visit, double alpha = 0.05);

}  // namespace hybridest
