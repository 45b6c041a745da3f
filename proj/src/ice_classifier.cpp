#include "hybridest/ice_classifier.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <ostream>

#include "hybridest/errors.hpp"

namespace hybridest {

Category classify(const IceEvent& event) {
  const IceReason r = event.reason;
  const bool efficacy_reason = r == IceReason::LackOfEfficacy || r == IceReason::RescueMedication;

  if (r == IceReason::AdverseEvent || r == IceReason::Death) return Category::Safety;
  if (!efficacy_reason && event.persistent_ae_before_dc) return Category::Safety;
  if (efficacy_reason) return Category::Efficacy;
  if (event.efficacy_deteriorated_before_dc && !event.persistent_ae_before_dc) {
    return Category::Efficacy;
  }
  return Category::Administrative;
}

Dataset classify_dataset(const Dataset& dataset) {
  Dataset out = dataset;
  for (auto& s : out.subjects) {
    if (s.ice) {
      s.category = classify(*s.ice);
    } else {
      s.category.reset();
    }
  }
  return out;
}

IceSummaryTable summarize(const Dataset& dataset) {
  if (dataset.subjects.empty()) throw InputError("cannot summarize ICEs of an empty dataset");
  return summarize(dataset, dataset.arms());
}

IceSummaryTable summarize(const Dataset& dataset, const std::vector<Arm>& arms) {
  IceSummaryTable table;
  for (Arm arm : arms) {
    IceSummaryRow row;
    row.arm = arm;
    for (const auto& s : dataset.subjects) {
      if (s.arm != arm) continue;
      ++row.n;
      if (!s.ice) continue;
      ++row.any;
      switch (s.category.value_or(classify(*s.ice))) {
        case Category::Safety: ++row.safety; break;
        case Category::Efficacy: ++row.efficacy; break;
        case Category::Administrative: ++row.administrative; break;
      }
    }
    if (row.n == 0) throw InputError("arm " + std::to_string(arm.z) + " has no subjects");
    table.rows.push_back(row);
  }
  return table;
}

std::string format_count_percent(int count, int n) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%d (%.1f%%)", count, n > 0 ? 100.0 * count / n : 0.0);
  return buffer;
}

void write_summary_text(std::ostream& out, const IceSummaryTable& table,
                        const std::vector<std::string>& arm_labels) {
  constexpr int kFirst = 20;
  constexpr int kWidth = 22;
  auto label = [&](std::size_t i) {
    std::string name = i < arm_labels.size() ? arm_labels[i] : "Arm " + std::to_string(table.rows[i].arm.z);
    return name + " (N=" + std::to_string(table.rows[i].n) + ")";
  };
  out << std::left << std::setw(kFirst) << "ICE Category";
  for (std::size_t i = 0; i < table.rows.size(); ++i) out << std::setw(kWidth) << label(i);
  out << '\n';
  auto line = [&](const std::string& name, auto count) {
    out << std::setw(kFirst) << name;
    for (const auto& row : table.rows) out << std::setw(kWidth) << format_count_percent(count(row), row.n);
    out << '\n';
  };
  line("Patients with ICEs", [](const IceSummaryRow& r) { return r.any; });
  line("Category 1", [](const IceSummaryRow& r) { return r.safety; });
  line("Category 2", [](const IceSummaryRow& r) { return r.efficacy; });
  line("Category 3", [](const IceSummaryRow& r) { return r.administrative; });
  out << std::right;
}

void write_summary_csv(std::ostream& out, const IceSummaryTable& table) {
  out << "arm,n,any_ice,any_ice_pct,category1,category1_pct,category2,category2_pct,category3,"
         "category3_pct\n";
  for (const auto& r : table.rows) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), "%d,%d,%d,%.1f,%d,%.1f,%d,%.1f,%d,%.1f\n", r.arm.z, r.n,
                  r.any, r.percent(r.any), r.safety, r.percent(r.safety), r.efficacy,
                  r.percent(r.efficacy), r.administrative, r.percent(r.administrative));
    out << buffer;
  }
}

}  // namespace hybridest
