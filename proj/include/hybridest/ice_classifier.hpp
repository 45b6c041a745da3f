#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hybridest/core_data.hpp"

namespace hybridest {

// Maps an ICE record to its category. Only the reason code and the two
// pre-computed flags are consulted, never arm or outcome values, so the
// mapping can be applied before unblinding. Priority is
// Safety > Efficacy > Administrative.
Category classify(const IceEvent& event);

// Copy of the dataset with `category` filled for every subject that has an
// ICE and cleared for subjects without one.
Dataset classify_dataset(const Dataset& dataset);

struct IceSummaryRow {
  Arm arm;
  int n = 0;
  int any = 0;
  int safety = 0;
  int efficacy = 0;
  int administrative = 0;

  double percent(int count) const { return n > 0 ? 100.0 * count / n : 0.0; }
};

struct IceSummaryTable {
  std::vector<IceSummaryRow> rows;  // one per arm, ascending
};

// Per-arm counts of subjects with any ICE and with each category.
// Subjects with an ICE but no category are classified on the fly.
// Throws InputError for an empty dataset or a requested arm with no subjects.
IceSummaryTable summarize(const Dataset& dataset);
IceSummaryTable summarize(const Dataset& dataset, const std::vector<Arm>& arms);

// "9 (6.4%)"
std::string format_count_percent(int count, int n);

void write_summary_text(std::ostream& out, const IceSummaryTable& table,
                        const std::vector<std::string>& arm_labels = {});
void write_summary_csv(std::ostream& out, const IceSummaryTable& table);

}  // namespace hybridest
