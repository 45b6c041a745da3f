#include "hybridest/mmrm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "hybridest/stats.hpp"

namespace hybridest {

namespace {

int triangle(int dim) { return dim * (dim + 1) / 2; }

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::MatrixXd project_spd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(m));
  const double trace = m.trace();
  if (!(trace > 0) || !std::isfinite(trace)) {
    throw NumericalError("singular fit: residual covariance is zero or not finite");
  }
  const double floor = 1e-6 * trace / static_cast<double>(m.rows());
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// Log-Cholesky parameterization

Eigen::MatrixXd cholesky_from_theta(const Eigen::Ref<const Eigen::VectorXd>& theta, int dim) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, dim);
  int k = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) l(i, j) = (i == j) ? std::exp(theta(k++)) : theta(k++);
  }
  return l;
}

Eigen::MatrixXd unpack_log_cholesky(const Eigen::Ref<const Eigen::VectorXd>& theta, int dim) {
  Eigen::MatrixXd l = cholesky_from_theta(theta, dim);
  return l * l.transpose();
}

Eigen::VectorXd pack_log_cholesky(const Eigen::MatrixXd& sigma) {
  const int dim = static_cast<int>(sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  Eigen::MatrixXd l = llt.matrixL();
  Eigen::VectorXd theta(triangle(dim));
  int k = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) theta(k++) = (i == j) ? std::log(l(i, i)) : l(i, j);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// MmrmFit helpers

int MmrmFit::arm_position(Arm arm) const {
  auto it = std::find(arms.begin(), arms.end(), arm);
  return it == arms.end() ? -1 : static_cast<int>(it - arms.begin());
}

int MmrmFit::covariance_group(Arm arm) const {
  if (covariance == CovarianceStructure::Shared) return 0;
  const int pos = arm_position(arm);
  if (pos < 0) throw InputError("arm " + std::to_string(arm.z) + " is not in the fit");
  return pos;
}

const Eigen::MatrixXd& MmrmFit::sigma_for(Arm arm) const { return sigma.at(covariance_group(arm)); }

Eigen::VectorXd MmrmFit::design_row(Arm arm, double baseline) const {
  const int pos = arm_position(arm);
  if (pos < 0) throw InputError("arm " + std::to_string(arm.z) + " is not in the fit");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(columns_per_visit());
  c(0) = 1.0;
  if (pos > 0) c(pos) = 1.0;
  c(columns_per_visit() - 1) = baseline - baseline_mean;
  return c;
}

Eigen::VectorXd MmrmFit::mean_profile(const Eigen::VectorXd& coefficients, Arm arm,
                                      double baseline) const {
  const Eigen::VectorXd c = design_row(arm, baseline);
  const int q = columns_per_visit();
  Eigen::VectorXd mu(n_visits);
  for (int t = 0; t < n_visits; ++t) mu(t) = coefficients.segment(t * q, q).dot(c);
  return mu;
}

// ---------------------------------------------------------------------------
// RemlObjective

RemlObjective::RemlObjective(const Dataset& dataset, CovarianceStructure covariance) {
  n_visits_ = dataset.n_visits();
  if (n_visits_ < 1) throw InputError("dataset has no visits");
  if (n_visits_ > 62) throw InputError("at most 62 visits are supported");
  arms_ = dataset.arms();
  if (arms_.size() < 2) throw InputError("MMRM requires at least two arms");
  if (arms_.front() != Arm{0}) throw InputError("reference arm 0 is absent");
  q_ = static_cast<int>(arms_.size()) + 1;
  n_groups_ = covariance == CovarianceStructure::Shared ? 1 : static_cast<int>(arms_.size());

  for (int t = 1; t <= n_visits_; ++t) {
    const std::string v = "visit" + std::to_string(t);
    column_names_.push_back(v + ":intercept");
    for (std::size_t k = 1; k < arms_.size(); ++k) {
      column_names_.push_back(v + ":arm" + std::to_string(arms_[k].z));
    }
    column_names_.push_back(v + ":baseline");
  }

  double baseline_sum = 0.0;
  int with_data = 0;
  for (const auto& s : dataset.subjects) {
    for (const auto& y : s.outcomes) {
      if (y) {
        baseline_sum += s.baseline;
        ++with_data;
        break;
      }
    }
  }
  if (with_data == 0) throw InputError("dataset has no observed outcomes");
  baseline_mean_ = baseline_sum / with_data;

  std::map<std::pair<int, std::uint64_t>, std::size_t> cell_index;
  std::vector<int> per_visit(n_visits_, 0);
  for (const auto& s : dataset.subjects) {
    SubjectRow row;
    const int pos = static_cast<int>(std::find(arms_.begin(), arms_.end(), s.arm) - arms_.begin());
    row.group = n_groups_ == 1 ? 0 : pos;
    row.c = Eigen::VectorXd::Zero(q_);
    row.c(0) = 1.0;
    if (pos > 0) row.c(pos) = 1.0;
    row.c(q_ - 1) = s.baseline - baseline_mean_;
    row.y = Eigen::VectorXd::Zero(n_visits_);
    for (int t = 0; t < n_visits_; ++t) {
      if (s.outcomes[t]) {
        row.mask |= (std::uint64_t{1} << t);
        row.y(t) = *s.outcomes[t];
        ++per_visit[t];
      }
    }
    if (row.mask == 0) continue;
    ++n_subjects_;
    n_observations_ += std::popcount(row.mask);

    auto [it, inserted] = cell_index.try_emplace({row.group, row.mask}, cells_.size());
    if (inserted) {
      Cell cell;
      cell.group = row.group;
      for (int t = 0; t < n_visits_; ++t) {
        if (row.mask & (std::uint64_t{1} << t)) cell.observed.push_back(t);
      }
      cell.syy = Eigen::MatrixXd::Zero(n_visits_, n_visits_);
      cell.syc = Eigen::MatrixXd::Zero(n_visits_, q_);
      cell.scc = Eigen::MatrixXd::Zero(q_, q_);
      cells_.push_back(std::move(cell));
    }
    Cell& cell = cells_[it->second];
    ++cell.n;
    cell.syy.noalias() += row.y * row.y.transpose();
    cell.syc.noalias() += row.y * row.c.transpose();
    cell.scc.noalias() += row.c * row.c.transpose();
    rows_.push_back(std::move(row));
  }
  for (int t = 0; t < n_visits_; ++t) {
    if (per_visit[t] == 0) {
      throw InputError("visit " + std::to_string(t + 1) + " has no observed outcomes");
    }
  }
}

int RemlObjective::n_params() const { return n_groups_ * triangle(n_visits_); }

RemlObjective::Evaluation RemlObjective::evaluate(const Eigen::VectorXd& theta,
                                                  bool with_gradient) const {
  const int T = n_visits_;
  const int q = q_;
  const int p = T * q;
  const int per_group = triangle(T);

  std::vector<Eigen::MatrixXd> chol(n_groups_);
  std::vector<Eigen::MatrixXd> sigma(n_groups_);
  for (int g = 0; g < n_groups_; ++g) {
    chol[g] = cholesky_from_theta(theta.segment(g * per_group, per_group), T);
    sigma[g] = chol[g] * chol[g].transpose();
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::vector<Eigen::MatrixXd> precision(cells_.size());
  double logdet = 0.0;

  for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
    const Cell& cell = cells_[ci];
    const int m = static_cast<int>(cell.observed.size());
    Eigen::MatrixXd block(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) block(i, j) = sigma[cell.group](cell.observed[i], cell.observed[j]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance block is not positive definite");
    const Eigen::MatrixXd lm = llt.matrixL();
    logdet += cell.n * 2.0 * lm.diagonal().array().log().sum();
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m, m));

    Eigen::MatrixXd& P = precision[ci];
    P = Eigen::MatrixXd::Zero(T, T);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) P(cell.observed[i], cell.observed[j]) = inv(i, j);
    }
    for (int ti : cell.observed) {
      for (int si : cell.observed) a.block(ti * q, si * q, q, q) += P(ti, si) * cell.scc;
    }
    const Eigen::MatrixXd ps = P * cell.syc;
    for (int ti : cell.observed) b.segment(ti * q, q) += ps.row(ti).transpose();
  }

  Eigen::LLT<Eigen::MatrixXd> a_llt(a);
  if (a_llt.info() != Eigen::Success) {
    throw NumericalError("fixed-effect information matrix is singular");
  }
  const Eigen::MatrixXd a_l = a_llt.matrixL();
  const double logdet_a = 2.0 * a_l.diagonal().array().log().sum();

  Evaluation ev;
  ev.beta = a_llt.solve(b);
  Eigen::MatrixXd coef(T, q);
  for (int t = 0; t < T; ++t) coef.row(t) = ev.beta.segment(t * q, q).transpose();

  double quad = 0.0;
  std::vector<Eigen::MatrixXd> resid(cells_.size());
  for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
    const Cell& cell = cells_[ci];
    const Eigen::MatrixXd cross = cell.syc * coef.transpose();
    resid[ci] = cell.syy - cross - cross.transpose() + coef * cell.scc * coef.transpose();
    quad += precision[ci].cwiseProduct(resid[ci]).sum();
  }

  const double n_minus_p = static_cast<double>(n_observations_ - p);
  ev.loglik = -0.5 * (n_minus_p * std::log(2.0 * std::numbers::pi) + logdet + logdet_a + quad);
  if (!std::isfinite(ev.loglik)) throw NumericalError("restricted log-likelihood is not finite");
  if (!with_gradient) return ev;

  ev.a_inverse = a_llt.solve(Eigen::MatrixXd::Identity(p, p));
  std::vector<Eigen::MatrixXd> grad_sigma(n_groups_, Eigen::MatrixXd::Zero(T, T));
  for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
    const Cell& cell = cells_[ci];
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(T, T);
    for (int ti : cell.observed) {
      for (int si : cell.observed) {
        h(ti, si) = ev.a_inverse.block(ti * q, si * q, q, q).cwiseProduct(cell.scc).sum();
      }
    }
    const Eigen::MatrixXd& P = precision[ci];
    grad_sigma[cell.group] -=
        0.5 * (static_cast<double>(cell.n) * P - P * h * P - P * resid[ci] * P);
  }

  ev.gradient.resize(n_params());
  for (int g = 0; g < n_groups_; ++g) {
    const Eigen::MatrixXd gl = 2.0 * symmetrize(grad_sigma[g]) * chol[g];
    int k = g * per_group;
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j <= i; ++j) {
        ev.gradient(k++) = (i == j) ? gl(i, i) * chol[g](i, i) : gl(i, j);
      }
    }
  }
  return ev;
}

Eigen::MatrixXd RemlObjective::hessian(const Eigen::VectorXd& theta) const {
  const int n = static_cast<int>(theta.size());
  Eigen::MatrixXd h(n, n);
  for (int i = 0; i < n; ++i) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta(i)));
    Eigen::VectorXd plus = theta, minus = theta;
    plus(i) += step;
    minus(i) -= step;
    h.col(i) = (gradient(plus) - gradient(minus)) / (2.0 * step);
  }
  return symmetrize(h);
}

int RemlObjective::aliased_column() const {
  const int T = n_visits_;
  const int q = q_;
  const int p = T * q;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (const Cell& cell : cells_) {
    for (int t : cell.observed) a.block(t * q, t * q, q, q) += cell.scc;
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 1e-10 * std::max(a(j, j), 1e-300))) return j;
    l(j, j) = std::sqrt(pivot);
    for (int i = j + 1; i < p; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return -1;
}

Eigen::VectorXd RemlObjective::starting_theta() const {
  const int T = n_visits_;
  const int q = q_;

  // Per-visit ordinary least squares.
  Eigen::MatrixXd coef(T, q);
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(q);
    for (const Cell& cell : cells_) {
      if (std::find(cell.observed.begin(), cell.observed.end(), t) == cell.observed.end()) continue;
      xtx += cell.scc;
      xty += cell.syc.row(t).transpose();
    }
    coef.row(t) = xtx.ldlt().solve(xty).transpose();
  }

  const double q_eff = n_groups_ == 1 ? static_cast<double>(q) : 2.0;
  Eigen::VectorXd theta(n_params());
  for (int g = 0; g < n_groups_; ++g) {
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(T, T);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(T, T);
    for (const SubjectRow& row : rows_) {
      if (row.group != g) continue;
      Eigen::VectorXd r = row.y - coef * row.c;
      for (int t = 0; t < T; ++t) {
        if (!(row.mask & (std::uint64_t{1} << t))) continue;
        for (int s = 0; s < T; ++s) {
          if (!(row.mask & (std::uint64_t{1} << s))) continue;
          cross(t, s) += r(t) * r(s);
          counts(t, s) += 1.0;
        }
      }
    }
    Eigen::MatrixXd start = Eigen::MatrixXd::Zero(T, T);
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < T; ++s) {
        if (counts(t, s) > 0) start(t, s) = cross(t, s) / std::max(counts(t, s) - q_eff, 1.0);
      }
    }
    theta.segment(g * triangle(T), triangle(T)) = pack_log_cholesky(project_spd(start));
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Iterate {
  Eigen::VectorXd theta;
  RemlObjective::Evaluation ev;
};

bool try_evaluate(const RemlObjective& objective, const Eigen::VectorXd& theta,
                  RemlObjective::Evaluation& out) {
  try {
    out = objective.evaluate(theta, true);
    return std::isfinite(out.loglik) && out.gradient.allFinite();
  } catch (const NumericalError&) {
    return false;
  }
}

MmrmFit assemble(const RemlObjective& objective, const Dataset& dataset, const MmrmModelSpec& spec,
                 const Iterate& it) {
  MmrmFit f;
  f.arms = objective.arms();
  f.n_visits = objective.n_visits();
  f.n_subjects = objective.n_subjects();
  f.n_observations = objective.n_observations();
  f.baseline_mean = objective.baseline_mean();
  f.outcome_is_change = dataset.outcome_is_change;
  f.covariance = spec.covariance;
  f.beta = it.ev.beta;
  f.vcov_beta = symmetrize(it.ev.a_inverse);
  f.theta = it.theta;
  const int per_group = triangle(f.n_visits);
  for (int g = 0; g < objective.n_groups(); ++g) {
    f.sigma.push_back(unpack_log_cholesky(it.theta.segment(g * per_group, per_group), f.n_visits));
  }
  f.reml_loglik = it.ev.loglik;
  f.residual_df = f.n_subjects - f.columns_per_visit();
  f.column_names = objective.column_names();
  return f;
}

}  // namespace

MmrmFit fit(const Dataset& dataset, const MmrmModelSpec& spec) {
  const RemlObjective objective(dataset, spec.covariance);
  if (int col = objective.aliased_column(); col >= 0) {
    throw NumericalError("rank-deficient design: column '" + objective.column_names()[col] +
                         "' is aliased");
  }
  if (objective.n_subjects() <= objective.n_columns() / objective.n_visits()) {
    throw InputError("too few subjects for the between-subject design");
  }

  Iterate cur;
  cur.theta = objective.starting_theta();
  if (!try_evaluate(objective, cur.theta, cur.ev)) {
    throw NumericalError("singular fit: restricted likelihood undefined at starting values");
  }

  std::vector<double> trace{cur.ev.loglik};
  const int n = objective.n_params();
  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  bool converged = cur.ev.gradient.norm() < spec.gradient_tolerance;
  int iterations = 0;
  bool stalled = false;
  int flat_steps = 0;

  // BFGS ascent on the restricted log-likelihood.
  while (!converged && iterations < spec.max_iterations) {
    Eigen::VectorXd dir = inv_hessian * cur.ev.gradient;
    double slope = cur.ev.gradient.dot(dir);
    if (!(slope > 0)) {
      inv_hessian.setIdentity();
      dir = cur.ev.gradient;
      slope = dir.squaredNorm();
    }
    Iterate next;
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      next.theta = cur.theta + step * dir;
      if (try_evaluate(objective, next.theta, next.ev) &&
          next.ev.loglik >= cur.ev.loglik + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    const Eigen::VectorXd s = next.theta - cur.theta;
    const Eigen::VectorXd y = cur.ev.gradient - next.ev.gradient;  // gradient change of -loglik
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hessian = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
      inv_hessian = (i_n - rho * s * y.transpose()) * inv_hessian * (i_n - rho * y * s.transpose()) +
                    rho * s * s.transpose();
    }
    const double rel = std::abs(next.ev.loglik - cur.ev.loglik) / std::max(std::abs(cur.ev.loglik), 1.0);
    cur = std::move(next);
    trace.push_back(cur.ev.loglik);
    ++iterations;
    converged = rel < spec.relative_tolerance && cur.ev.gradient.norm() < spec.gradient_tolerance;
    // Flat objective with a gradient above tolerance: the line search is
    // working at round-off level, so hand over to Newton.
    flat_steps = rel < spec.relative_tolerance ? flat_steps + 1 : 0;
    if (!converged && flat_steps >= 3) break;
  }

  // Newton polishing with a finite-difference Hessian when BFGS stalls on
  // round-off short of the gradient tolerance. Near the optimum the
  // likelihood gain of a step can be below round-off, so a step is also
  // accepted when it keeps the likelihood within the noise band and shrinks
  // the gradient.
  if (!converged) {
    const double noise = 1e-11 * std::max(1.0, std::abs(cur.ev.loglik));
    // Newton steps count against the same iteration budget.
    for (int k = 0; k < 20 && iterations < spec.max_iterations; ++k) {
      Eigen::MatrixXd neg_h = -objective.hessian(cur.theta);
      Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
      if (llt.info() != Eigen::Success) break;
      const Eigen::VectorXd dir = llt.solve(cur.ev.gradient);
      Iterate next;
      bool accepted = false;
      double step = 1.0;
      for (int j = 0; j < 30; ++j, step *= 0.5) {
        next.theta = cur.theta + step * dir;
        if (try_evaluate(objective, next.theta, next.ev) &&
            (next.ev.loglik > cur.ev.loglik + noise ||
             (next.ev.loglik >= cur.ev.loglik - noise &&
              next.ev.gradient.norm() < cur.ev.gradient.norm()))) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double rel = std::abs(next.ev.loglik - cur.ev.loglik) / std::max(std::abs(cur.ev.loglik), 1.0);
      cur = std::move(next);
      trace.push_back(cur.ev.loglik);
      ++iterations;
      if (rel < spec.relative_tolerance && cur.ev.gradient.norm() < spec.gradient_tolerance) {
        converged = true;
        break;
      }
    }
  }

  MmrmFit result = assemble(objective, dataset, spec, cur);
  result.loglik_trace = std::move(trace);
  result.n_iterations = iterations;
  result.converged = converged;
  if (!converged) {
    throw MmrmConvergenceError(
        std::string("REML optimizer did not converge") + (stalled ? " (line search stalled)" : "") +
            " after " + std::to_string(iterations) + " iterations; gradient norm " +
            std::to_string(cur.ev.gradient.norm()),
        std::move(result));
  }

  for (const auto& s : result.sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    const double smallest = eig.eigenvalues().minCoeff();
    if (!(smallest > 1e-10 * eig.eigenvalues().maxCoeff())) {
      throw NumericalError("singular fit: estimated covariance is not positive definite");
    }
  }

  Eigen::MatrixXd neg_h = -objective.hessian(cur.theta);
  Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
  if (llt.info() == Eigen::Success) {
    result.theta_vcov = symmetrize(llt.solve(Eigen::MatrixXd::Identity(n, n)));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

Eigen::VectorXd ls_mean_gradient(const MmrmFit& fit, Arm arm, int visit) {
  if (visit < 1 || visit > fit.n_visits) {
    throw InputError("visit " + std::to_string(visit) + " is outside the schedule");
  }
  const int q = fit.columns_per_visit();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(fit.beta.size());
  g.segment((visit - 1) * q, q) = fit.design_row(arm, fit.baseline_mean);
  return g;
}

}  // namespace

Estimate ls_mean_change(const MmrmFit& fit, Arm arm, int visit) {
  const Eigen::VectorXd g = ls_mean_gradient(fit, arm, visit);
  Estimate e;
  e.value = g.dot(fit.beta) - (fit.outcome_is_change ? 0.0 : fit.baseline_mean);
  e.se = std::sqrt(std::max(0.0, g.dot(fit.vcov_beta * g)));
  return e;
}

ContrastEstimate contrast(const MmrmFit& fit, Arm arm_a, Arm arm_b, int visit, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
  const Eigen::VectorXd g = ls_mean_gradient(fit, arm_a, visit) - ls_mean_gradient(fit, arm_b, visit);
  ContrastEstimate c;
  c.value = g.dot(fit.beta);
  c.se = std::sqrt(std::max(0.0, g.dot(fit.vcov_beta * g)));
  c.df = fit.residual_df;
  const double half = stats::t_quantile(c.df, 1.0 - alpha / 2.0) * c.se;
  c.ci_low = c.value - half;
  c.ci_high = c.value + half;
  return c;
}

}  // namespace hybridest
