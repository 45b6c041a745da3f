#pragma once

// Converts library datasets to the plain structures the oracles use.

#include "hybridest/core_data.hpp"
#include "oracles/dense_mmrm.hpp"

namespace oracle {

inline Problem to_problem(const hybridest::Dataset& d) {
  Problem p;
  p.n_visits = d.n_visits();
  p.n_arms = static_cast<int>(d.arms().size());
  for (const auto& s : d.subjects) {
    Subject o;
    o.arm = s.arm.z;
    o.baseline = s.baseline;
    o.y = Eigen::VectorXd::Zero(p.n_visits);
    for (int t = 0; t < p.n_visits; ++t) {
      o.observed.push_back(s.outcomes[t].has_value());
      if (s.outcomes[t]) o.y(t) = *s.outcomes[t];
    }
    p.subjects.push_back(std::move(o));
  }
  return p;
}

}  // namespace oracle
