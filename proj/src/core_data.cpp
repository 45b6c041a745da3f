#include "hybridest/core_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "hybridest/errors.hpp"

namespace hybridest {

namespace {

constexpr std::array<std::pair<IceReason, std::string_view>, 9> kReasonNames{{
    {IceReason::AdverseEvent, "AE"},
    {IceReason::LackOfEfficacy, "LoE"},
    {IceReason::RescueMedication, "rescue_medication"},
    {IceReason::InvestigatorDecision, "investigator_decision"},
    {IceReason::SubjectDecision, "subject_decision"},
    {IceReason::LostToFollowup, "lost_to_followup"},
    {IceReason::ProtocolAdmin, "protocol_admin"},
    {IceReason::Death, "death"},
    {IceReason::Other, "other"},
}};

}  // namespace

std::string_view to_string(IceReason reason) {
  for (const auto& [r, name] : kReasonNames) {
    if (r == reason) return name;
  }
  return "other";
}

std::optional<IceReason> parse_ice_reason(std::string_view text) {
  for (const auto& [r, name] : kReasonNames) {
    if (name == text) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::Safety: return "Category 1";
    case Category::Efficacy: return "Category 2";
    case Category::Administrative: return "Category 3";
  }
  return "unknown";
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::EmptySchedule: return "empty-schedule";
    case ViolationKind::ScheduleOrder: return "schedule-order";
    case ViolationKind::AnalysisVisitOutOfRange: return "analysis-visit-out-of-range";
    case ViolationKind::DuplicateId: return "duplicate-id";
    case ViolationKind::NegativeArm: return "negative-arm";
    case ViolationKind::MissingReferenceArm: return "missing-reference-arm";
    case ViolationKind::OutcomeLength: return "outcome-length";
    case ViolationKind::NonFiniteValue: return "non-finite-value";
    case ViolationKind::FlagsWithoutIce: return "post-ice-flag-without-ice";
    case ViolationKind::FlagsNotMonotone: return "post-ice-flags-not-monotone";
    case ViolationKind::FlagBeforeOnset: return "post-ice-flag-before-onset";
    case ViolationKind::OnsetOutOfRange: return "ice-onset-out-of-range";
  }
  return "unknown";
}

std::vector<Arm> Dataset::arms() const {
  std::set<Arm> seen;
  for (const auto& s : subjects) seen.insert(s.arm);
  return {seen.begin(), seen.end()};
}

int Dataset::count(Arm arm) const {
  return static_cast<int>(std::count_if(subjects.begin(), subjects.end(),
                                        [&](const SubjectRecord& s) { return s.arm == arm; }));
}

int ValidationReport::count(ViolationKind kind) const {
  return static_cast<int>(std::count_if(violations.begin(), violations.end(),
                                        [&](const Violation& v) { return v.kind == kind; }));
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  out << violations.size() << " violation(s)";
  std::size_t shown = 0;
  for (const auto& v : violations) {
    if (shown++ == 5) {
      out << "; ...";
      break;
    }
    out << "; " << to_string(v.kind);
    if (!v.subject_id.empty()) out << " [" << v.subject_id << "]";
    if (!v.detail.empty()) out << ": " << v.detail;
  }
  return out.str();
}

ValidationReport validate(const Dataset& dataset) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string id, std::string detail) {
    report.violations.push_back({kind, std::move(id), std::move(detail)});
  };

  const auto& visits = dataset.schedule.visits;
  const int n_visits = dataset.schedule.size();
  if (visits.empty()) add(ViolationKind::EmptySchedule, "", "no scheduled visits");
  for (int i = 0; i < n_visits; ++i) {
    if (visits[i].index != i + 1) {
      add(ViolationKind::ScheduleOrder, "", "visit indices must run 1..T");
      break;
    }
    if (i > 0 && !(visits[i].week > visits[i - 1].week)) {
      add(ViolationKind::ScheduleOrder, "", "visit weeks must be strictly increasing");
      break;
    }
  }
  if (dataset.schedule.analysis_visit < 0 || dataset.schedule.analysis_visit > n_visits) {
    add(ViolationKind::AnalysisVisitOutOfRange, "",
        "analysis visit " + std::to_string(dataset.schedule.analysis_visit));
  }

  std::set<std::string> ids;
  bool has_reference = false;
  for (const auto& s : dataset.subjects) {
    if (!ids.insert(s.id).second) add(ViolationKind::DuplicateId, s.id, "");
    if (s.arm.z < 0) add(ViolationKind::NegativeArm, s.id, "");
    if (s.arm.is_reference()) has_reference = true;
    if (static_cast<int>(s.outcomes.size()) != n_visits ||
        static_cast<int>(s.post_ice.size()) != n_visits) {
      add(ViolationKind::OutcomeLength, s.id, "");
      continue;
    }
    if (!std::isfinite(s.baseline)) add(ViolationKind::NonFiniteValue, s.id, "baseline");
    for (const auto& y : s.outcomes) {
      if (y && !std::isfinite(*y)) {
        add(ViolationKind::NonFiniteValue, s.id, "outcome");
        break;
      }
    }
    for (int t = 1; t < n_visits; ++t) {
      if (s.post_ice[t - 1] && !s.post_ice[t]) {
        add(ViolationKind::FlagsNotMonotone, s.id, "visit " + std::to_string(t + 1));
        break;
      }
    }
    const bool any_flag = std::find(s.post_ice.begin(), s.post_ice.end(), true) != s.post_ice.end();
    if (!s.ice) {
      if (any_flag) add(ViolationKind::FlagsWithoutIce, s.id, "");
      continue;
    }
    const int onset = s.ice->visit_of_onset;
    if (onset < 0 || onset > n_visits) {
      add(ViolationKind::OnsetOutOfRange, s.id, std::to_string(onset));
      continue;
    }
    for (int t = 0; t < n_visits; ++t) {
      if (s.post_ice[t] && t + 1 < onset) {
        add(ViolationKind::FlagBeforeOnset, s.id, "visit " + std::to_string(t + 1));
        break;
      }
    }
  }
  if (!dataset.subjects.empty() && !has_reference) {
    add(ViolationKind::MissingReferenceArm, "", "arm 0 has no subjects");
  }
  return report;
}

void require_valid(const Dataset& dataset) {
  auto report = validate(dataset);
  if (!report.ok()) throw InputError("invalid dataset: " + report.summary());
}

Dataset analysis_view(const Dataset& dataset, DataInclusionPolicy policy) {
  require_valid(dataset);
  Dataset view = dataset;
  if (policy == DataInclusionPolicy::AllAvailable) return view;
  for (auto& s : view.subjects) {
    for (std::size_t t = 0; t < s.outcomes.size(); ++t) {
      if (s.post_ice[t]) s.outcomes[t].reset();
    }
  }
  return view;
}

}  // namespace hybridest
