#pragma once

#include <vector>

namespace hybridest {

struct CompleteDataEstimate {
  double value = 0.0;
  double se = 0.0;
  double complete_df = 0.0;  // infinity allowed
};

// One-sided hypothesis H0: mu = null_value against the alternative
// mu < null_value (`lower_is_better`) or mu > null_value.
struct Hypothesis {
  double null_value = 0.0;
  bool lower_is_better = true;
};

struct PooledEstimate {
  int m = 0;
  double q_bar = 0.0;
  double within = 0.0;    // W
  double between = 0.0;   // B
  double total = 0.0;     // W + (1 + 1/M) B
  double df = 0.0;        // Barnard-Rubin
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 0.0;   // one-sided per Hypothesis
  double se() const;
};

// Rubin's rules with the Barnard-Rubin small-sample degrees of freedom.
// All estimates must share the same complete-data df. Throws InputError
// when fewer than two estimates are given or an se is not positive.
PooledEstimate pool(const std::vector<CompleteDataEstimate>& estimates, double alpha = 0.05,
                    const Hypothesis& hypothesis = {});

// Barnard-Rubin df for M imputations, fraction of missing information
// lambda = (1 + 1/M) B / T and complete-data df.
double barnard_rubin_df(int m, double lambda, double complete_df);

}  // namespace hybridest
