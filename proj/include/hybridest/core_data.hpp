#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hybridest {

// Treatment arm. 0 is the control/reference arm, 1..K are experimental arms.
struct Arm {
  int z = 0;

  bool is_reference() const { return z == 0; }
  auto operator<=>(const Arm&) const = default;
};

struct Visit {
  int index = 0;  // 1-based
  double week = 0.0;
};

struct VisitSchedule {
  std::vector<Visit> visits;
  // 0 selects the last scheduled visit.
  int analysis_visit = 0;

  int size() const { return static_cast<int>(visits.size()); }
  int resolved_analysis_visit() const { return analysis_visit > 0 ? analysis_visit : size(); }
};

enum class IceReason {
  AdverseEvent,
  LackOfEfficacy,
  RescueMedication,
  InvestigatorDecision,
  SubjectDecision,
  LostToFollowup,
  ProtocolAdmin,
  Death,
  Other,
};

std::string_view to_string(IceReason reason);
std::optional<IceReason> parse_ice_reason(std::string_view text);

enum class Category { Safety = 1, Efficacy = 2, Administrative = 3 };

std::string_view to_string(Category category);

// Intercurrent event. Data at visits after `visit_of_onset` are affected;
// onset 0 means no on-treatment post-baseline visit exists.
struct IceEvent {
  int visit_of_onset = 0;
  IceReason reason = IceReason::Other;
  bool persistent_ae_before_dc = false;
  bool efficacy_deteriorated_before_dc = false;
};

struct SubjectRecord {
  std::string id;
  Arm arm;
  double baseline = 0.0;
  std::vector<std::optional<double>> outcomes;  // one per scheduled visit
  std::vector<bool> post_ice;                   // one per scheduled visit
  std::optional<IceEvent> ice;
  std::optional<Category> category;

  // Last on-treatment visit: the ICE onset, or the number of visits when
  // the subject has no ICE.
  int deviation_visit() const {
    return ice ? ice->visit_of_onset : static_cast<int>(outcomes.size());
  }
  bool missing(int pos) const { return !outcomes[static_cast<std::size_t>(pos)].has_value(); }
};

struct Dataset {
  VisitSchedule schedule;
  std::vector<SubjectRecord> subjects;
  std::string endpoint_name = "endpoint";
  bool smaller_is_better = true;
  // Outcomes are changes from baseline; otherwise raw values. Analyses
  // always adjust for baseline either way.
  bool outcome_is_change = true;

  int n_visits() const { return schedule.size(); }
  // Distinct arms in ascending order.
  std::vector<Arm> arms() const;
  int count(Arm arm) const;
};

enum class ViolationKind {
  EmptySchedule,
  ScheduleOrder,
  AnalysisVisitOutOfRange,
  DuplicateId,
  NegativeArm,
  MissingReferenceArm,
  OutcomeLength,
  NonFiniteValue,
  FlagsWithoutIce,
  FlagsNotMonotone,
  FlagBeforeOnset,
  OnsetOutOfRange,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string subject_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  int count(ViolationKind kind) const;
  std::string summary() const;
};

ValidationReport validate(const Dataset& dataset);

// Throws InputError carrying the report summary when the dataset is invalid.
void require_valid(const Dataset& dataset);

enum class DataInclusionPolicy { OnTreatmentOnly, AllAvailable };

// OnTreatmentOnly blanks every outcome collected after ICE onset;
// AllAvailable returns the outcomes unchanged.
Dataset analysis_view(const Dataset& dataset, DataInclusionPolicy policy);

}  // namespace hybridest
