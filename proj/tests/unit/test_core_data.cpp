#include "doctest.h"

#include <sstream>

#include "hybridest/core_data.hpp"
#include "hybridest/csv_io.hpp"
#include "hybridest/errors.hpp"
#include "hybridest/simulator.hpp"
#include "support/fixtures.hpp"

using namespace hybridest;

namespace {

Dataset two_subjects() {
  Dataset d;
  d.schedule = fixtures::schedule(4);
  d.subjects.push_back(fixtures::subject("S01", 0, 8.0, {-0.1, -0.2, -0.3, -0.4}));
  auto s = fixtures::subject("S02", 1, 8.5, {-0.5, -0.7, -0.6, -0.2});
  fixtures::add_ice(s, 2, IceReason::AdverseEvent);
  d.subjects.push_back(s);
  return d;
}

}  // namespace

TEST_CASE("duplicate id yields exactly one violation") {
  Dataset d = two_subjects();
  d.subjects[1].id = "S01";
  const auto report = validate(d);
  CHECK(report.count(ViolationKind::DuplicateId) == 1);
  CHECK_THROWS_AS(require_valid(d), InputError);
}

TEST_CASE("post-ICE flags must not switch off") {
  Dataset d = two_subjects();
  d.subjects[1].post_ice = {false, true, false, false};
  d.subjects[1].ice->visit_of_onset = 1;
  const auto report = validate(d);
  CHECK(report.count(ViolationKind::FlagsNotMonotone) == 1);
}

TEST_CASE("flags without an ICE, flags before onset and onset range") {
  Dataset d = two_subjects();
  d.subjects[0].post_ice[3] = true;
  CHECK(validate(d).count(ViolationKind::FlagsWithoutIce) == 1);

  d = two_subjects();
  d.subjects[1].post_ice = {true, true, true, true};
  CHECK(validate(d).count(ViolationKind::FlagBeforeOnset) == 1);

  d = two_subjects();
  d.subjects[1].ice->visit_of_onset = 5;
  CHECK(validate(d).count(ViolationKind::OnsetOutOfRange) == 1);
}

TEST_CASE("schedule, arm and length checks") {
  Dataset d = two_subjects();
  d.schedule.visits[2].week = d.schedule.visits[1].week;
  CHECK(validate(d).count(ViolationKind::ScheduleOrder) == 1);

  d = two_subjects();
  d.subjects[0].arm = Arm{2};
  CHECK(validate(d).count(ViolationKind::MissingReferenceArm) == 1);

  d = two_subjects();
  d.subjects[0].outcomes.pop_back();
  CHECK(validate(d).count(ViolationKind::OutcomeLength) == 1);

  d = two_subjects();
  d.subjects[0].outcomes[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK(validate(d).count(ViolationKind::NonFiniteValue) == 1);

  d = two_subjects();
  d.schedule.analysis_visit = 7;
  CHECK(validate(d).count(ViolationKind::AnalysisVisitOutOfRange) == 1);
}

TEST_CASE("simulated datasets validate cleanly") {
  for (const auto& name : preset_names()) {
    auto cfg = calibrate_preset(name);
    const auto sim = simulate(cfg);
    const auto report = validate(sim.dataset);
    CHECK_MESSAGE(report.ok(), name << ": " << report.summary());
  }
}

TEST_CASE("on-treatment view blanks post-ICE cells only") {
  const Dataset d = two_subjects();
  const Dataset on = analysis_view(d, DataInclusionPolicy::OnTreatmentOnly);
  const auto& s = on.subjects[1];
  CHECK(s.outcomes[0].has_value());
  CHECK(s.outcomes[1].has_value());
  CHECK_FALSE(s.outcomes[2].has_value());
  CHECK_FALSE(s.outcomes[3].has_value());
  CHECK(on.subjects[0].outcomes == d.subjects[0].outcomes);

  const Dataset all = analysis_view(d, DataInclusionPolicy::AllAvailable);
  for (std::size_t i = 0; i < d.subjects.size(); ++i) CHECK(all.subjects[i].outcomes == d.subjects[i].outcomes);
}

TEST_CASE("analysis_view is idempotent and never reduces missingness") {
  const auto sim = simulate(calibrate_preset("award1_like"));
  const Dataset once = analysis_view(sim.dataset, DataInclusionPolicy::OnTreatmentOnly);
  const Dataset twice = analysis_view(once, DataInclusionPolicy::OnTreatmentOnly);
  const Dataset all = analysis_view(sim.dataset, DataInclusionPolicy::AllAvailable);
  for (std::size_t i = 0; i < once.subjects.size(); ++i) {
    CHECK(once.subjects[i].outcomes == twice.subjects[i].outcomes);
    CHECK(all.subjects[i].outcomes == sim.dataset.subjects[i].outcomes);
    for (int t = 0; t < once.n_visits(); ++t) {
      if (all.subjects[i].missing(t)) CHECK(once.subjects[i].missing(t));
    }
  }
}

TEST_CASE("analysis_view rejects invalid input") {
  Dataset d = two_subjects();
  d.subjects[1].id = "S01";
  CHECK_THROWS_AS(analysis_view(d, DataInclusionPolicy::AllAvailable), InputError);
}

TEST_CASE("CSV round trip preserves every field") {
  auto cfg = calibrate_preset("mar_only");
  cfg.n_per_arm = {30, 30};
  const auto sim = simulate(cfg);
  std::stringstream buf;
  write_dataset_csv(buf, sim.dataset);
  DatasetCsvOptions opts;
  opts.endpoint_name = sim.dataset.endpoint_name;
  const Dataset back = read_dataset_csv(buf, opts);
  REQUIRE(back.subjects.size() == sim.dataset.subjects.size());
  for (std::size_t i = 0; i < back.subjects.size(); ++i) {
    const auto& a = sim.dataset.subjects[i];
    const auto& b = back.subjects[i];
    CHECK(a.id == b.id);
    CHECK(a.arm == b.arm);
    CHECK(a.baseline == b.baseline);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.post_ice == b.post_ice);
    CHECK(a.ice.has_value() == b.ice.has_value());
    if (a.ice) {
      CHECK(a.ice->visit_of_onset == b.ice->visit_of_onset);
      CHECK(a.ice->reason == b.ice->reason);
    }
  }
  std::stringstream again;
  write_dataset_csv(again, back);
  std::stringstream first;
  write_dataset_csv(first, sim.dataset);
  CHECK(again.str() == first.str());
}

TEST_CASE("CSV reader reports the offending line") {
  std::stringstream in(
      "subject_id,arm,visit,week,baseline,value,post_ice,ice_visit,ice_reason,persistent_ae,efficacy_deteriorated\n"
      "S1,0,1,4,8,-0.1,0,,,0,0\n"
      "S1,x,2,8,8,-0.2,0,,,0,0\n");
  try {
    read_dataset_csv(in);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("ICE reason codes round trip") {
  for (auto r : {IceReason::AdverseEvent, IceReason::LackOfEfficacy, IceReason::RescueMedication,
                 IceReason::InvestigatorDecision, IceReason::SubjectDecision, IceReason::LostToFollowup,
                 IceReason::ProtocolAdmin, IceReason::Death, IceReason::Other}) {
    CHECK(parse_ice_reason(to_string(r)) == r);
  }
  CHECK_FALSE(parse_ice_reason("headache").has_value());
}

TEST_CASE("format_number round trips") {
  for (double x : {0.1, -1.0 / 3.0, 1e-17, 123456.789, 0.0}) {
    CHECK(std::stod(format_number(x)) == x);
  }
}
