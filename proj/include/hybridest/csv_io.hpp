#pragma once

#include <iosfwd>
#include <string>

#include "hybridest/core_data.hpp"
#include "hybridest/truth_bundle.hpp"

namespace hybridest {

// Dataset-level metadata that the long-format CSV does not carry.
struct DatasetCsvOptions {
  std::string endpoint_name = "endpoint";
  bool smaller_is_better = true;
  bool outcome_is_change = true;
  int analysis_visit = 0;
};

// Long format, one row per subject-visit:
// subject_id,arm,visit,week,baseline,value,post_ice,ice_visit,ice_reason,
// persistent_ae,efficacy_deteriorated
//
// Throws InputError naming the offending line on schema violations.
Dataset read_dataset_csv(std::istream& in, const DatasetCsvOptions& options = {});
Dataset read_dataset_csv_file(const std::string& path, const DatasetCsvOptions& options = {});

void write_dataset_csv(std::ostream& out, const Dataset& dataset);

// One row per subject with the final-visit potential and policy outcomes
// for every arm, S(z) indicators and the assigned-arm ICE category.
void write_truth_csv(std::ostream& out, const TruthBundle& truth);

// Shortest representation that round-trips.
std::string format_number(double value);

}  // namespace hybridest
