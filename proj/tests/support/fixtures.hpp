#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"

namespace fixtures {

inline hybridest::VisitSchedule schedule(int n_visits) {
  hybridest::VisitSchedule s;
  for (int t = 1; t <= n_visits; ++t) s.visits.push_back({t, 4.0 * t});
  return s;
}

inline hybridest::SubjectRecord subject(std::string id, int arm, double baseline,
                                        std::vector<std::optional<double>> outcomes) {
  hybridest::SubjectRecord r;
  r.id = std::move(id);
  r.arm = hybridest::Arm{arm};
  r.baseline = baseline;
  r.post_ice.assign(outcomes.size(), false);
  r.outcomes = std::move(outcomes);
  return r;
}

// Marks cells from `onset` (0-based index) on as post-ICE.
inline void add_ice(hybridest::SubjectRecord& r, int onset, hybridest::IceReason reason) {
  r.ice = hybridest::IceEvent{onset, reason, false, false};
  for (std::size_t t = static_cast<std::size_t>(onset); t < r.outcomes.size(); ++t) r.post_ice[t] = true;
}

// Complete data: 2+ arms, correlated normal residuals, arm effect growing
// over visits, baseline slope -0.3.
inline hybridest::Dataset random_complete(std::uint64_t seed, int n_per_arm, int n_visits, int n_arms = 2) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  hybridest::Dataset d;
  d.schedule = schedule(n_visits);
  int id = 0;
  for (int a = 0; a < n_arms; ++a) {
    for (int i = 0; i < n_per_arm; ++i) {
      const double b = 8.0 + z(gen);
      std::vector<std::optional<double>> y(n_visits);
      double carry = 0.0;
      for (int t = 0; t < n_visits; ++t) {
        carry = 0.7 * carry + std::sqrt(1 - 0.49) * z(gen);
        y[t] = -0.1 * (t + 1) - 0.25 * a * (t + 1) - 0.3 * (b - 8.0) + (0.5 + 0.1 * t) * carry;
      }
      d.subjects.push_back(subject("S" + std::to_string(++id), a, b, y));
    }
  }
  return d;
}

}  // namespace fixtures
