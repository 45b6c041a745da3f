#include "hybridest/pooling.hpp"

#include <cmath>
#include <limits>

#include "hybridest/errors.hpp"
#include "hybridest/stats.hpp"

namespace hybridest {

double PooledEstimate::se() const { return std::sqrt(total); }

double barnard_rubin_df(int m, double lambda, double complete_df) {
  const double inf = std::numeric_limits<double>::infinity();
  const double df_old = lambda > 0 ? (m - 1) / (lambda * lambda) : inf;
  if (!std::isfinite(complete_df)) return df_old;
  const double df_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
  if (!std::isfinite(df_old)) return df_obs;
  return df_old * df_obs / (df_old + df_obs);
}

PooledEstimate pool(const std::vector<CompleteDataEstimate>& estimates, double alpha,
                    const Hypothesis& hypothesis) {
  const int m = static_cast<int>(estimates.size());
  if (m < 2) throw InputError("Rubin pooling requires at least two estimates");
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
  const double complete_df = estimates.front().complete_df;
  for (const auto& e : estimates) {
    if (!(e.se > 0)) throw InputError("every standard error must be positive");
    if (!(e.complete_df > 0)) throw InputError("complete-data df must be positive");
    if (e.complete_df != complete_df) throw InputError("complete-data df differs between imputations");
  }

  PooledEstimate p;
  p.m = m;
  for (const auto& e : estimates) {
    p.q_bar += e.value;
    p.within += e.se * e.se;
  }
  p.q_bar /= m;
  p.within /= m;
  for (const auto& e : estimates) p.between += (e.value - p.q_bar) * (e.value - p.q_bar);
  p.between /= (m - 1);
  p.total = p.within + (1.0 + 1.0 / m) * p.between;

  const double lambda = (1.0 + 1.0 / m) * p.between / p.total;
  p.df = barnard_rubin_df(m, lambda, complete_df);

  const double se = std::sqrt(p.total);
  const double half = stats::t_quantile(p.df, 1.0 - alpha / 2.0) * se;
  p.ci_low = p.q_bar - half;
  p.ci_high = p.q_bar + half;
  const double t = (p.q_bar - hypothesis.null_value) / se;
  p.p_value = hypothesis.lower_is_better ? stats::t_cdf(p.df, t) : 1.0 - stats::t_cdf(p.df, t);
  return p;
}

}  // namespace hybridest
