#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"

namespace hybridest {

// Full potential-outcome record for one simulated subject. Every vector is
// indexed by arm first, so potential[z][t] is Y_t(z).
struct SubjectTruth {
  std::string id;
  Arm assigned;
  double baseline = 0.0;
  // Outcomes had the subject completed treatment z.
  std::vector<std::vector<double>> potential;
  // Observed-world trajectory under treatment z, including post-ICE drift.
  std::vector<std::vector<double>> policy;
  // S(z): governing ICE under treatment z is safety related.
  std::vector<int> safety_ice;
  std::vector<std::optional<Category>> category;
  std::vector<int> onset;  // -1 when no ICE under that arm
};

struct TruthBundle {
  int n_arms = 0;
  int n_visits = 0;
  std::vector<SubjectTruth> subjects;
};

}  // namespace hybridest
