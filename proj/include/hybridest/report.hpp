#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridest/estimands.hpp"
#include "hybridest/ice_classifier.hpp"
#include "hybridest/mmrm.hpp"
#include "hybridest/validation_run.hpp"

namespace hybridest {

// Settings that produced a result, embedded verbatim in machine-readable
// output. `config_hash` is FNV-1a over the canonical "key=value" lines.
struct RunProvenance {
  std::vector<std::pair<std::string, std::string>> settings;
  std::string config_hash;
};

RunProvenance make_provenance(std::vector<std::pair<std::string, std::string>> settings);

// Method rows x (per-arm "mean (SE)", per-difference "mean (lo, hi)")
// columns; one row per result, all results over the same arms.
void write_result_table(std::ostream& out, const std::vector<EstimandResult>& results,
                        const std::string& title);

nlohmann::ordered_json result_json(const EstimandResult& result);
nlohmann::ordered_json provenance_json(const RunProvenance& provenance);
nlohmann::ordered_json ice_summary_json(const IceSummaryTable& table);

// Key/value dump of an MMRM fit: coefficients with SEs, covariance
// matrices, likelihood and convergence record.
void write_fit_report(std::ostream& out, const MmrmFit& fit);

void write_monte_carlo_text(std::ostream& out, const MonteCarloReport& report);
nlohmann::ordered_json monte_carlo_json(const MonteCarloReport& report, bool include_records);

// Fixed two-decimal formatting used by the text tables.
std::string fixed2(double value);

}  // namespace hybridest
