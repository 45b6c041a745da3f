#include "hybridest/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "hybridest/errors.hpp"

namespace hybridest {

namespace {

const std::vector<std::string> kColumns = {
    "subject_id", "arm",        "visit",      "week",          "baseline",
    "value",      "post_ice",   "ice_visit",  "ice_reason",    "persistent_ae",
    "efficacy_deteriorated"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(long line, const std::string& what) {
  throw InputError("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, long line, const std::string& column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    fail(line, "malformed " + column + " value '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, long line, const std::string& column) {
  int value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) fail(line, "malformed " + column + " value '" + text + "'");
  return value;
}

bool parse_flag(const std::string& text, long line, const std::string& column) {
  if (text.empty() || text == "0") return false;
  if (text == "1") return true;
  fail(line, "malformed " + column + " value '" + text + "' (expected 0 or 1)");
}

struct SubjectRows {
  long first_line = 0;
  Arm arm;
  double baseline = 0.0;
  std::optional<IceEvent> ice;
  std::map<int, std::pair<std::optional<double>, bool>> by_visit;
};

}  // namespace

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) return "nan";
  return std::string(buffer, ptr);
}

Dataset read_dataset_csv(std::istream& in, const DatasetCsvOptions& options) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw InputError("line 1: missing header row");
  ++line_no;
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : kColumns) {
    if (!col.count(name)) fail(1, "missing required column '" + name + "'");
  }

  std::vector<std::string> order;
  std::map<std::string, SubjectRows> rows;
  std::map<int, double> weeks;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (fields.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    auto field = [&](const std::string& name) -> const std::string& { return fields[col.at(name)]; };

    const std::string& id = field("subject_id");
    if (id.empty()) fail(line_no, "empty subject_id");
    const int arm = parse_int(field("arm"), line_no, "arm");
    if (arm < 0) fail(line_no, "malformed arm value '" + field("arm") + "' (must be >= 0)");
    const int visit = parse_int(field("visit"), line_no, "visit");
    if (visit < 1) fail(line_no, "visit index must be >= 1");
    const double week = parse_double(field("week"), line_no, "week");
    if (week < 0) fail(line_no, "week must be nonnegative");
    const double baseline = parse_double(field("baseline"), line_no, "baseline");
    std::optional<double> value;
    if (!field("value").empty()) value = parse_double(field("value"), line_no, "value");
    const bool post_ice = parse_flag(field("post_ice"), line_no, "post_ice");

    std::optional<IceEvent> ice;
    if (!field("ice_visit").empty()) {
      IceEvent event;
      event.visit_of_onset = parse_int(field("ice_visit"), line_no, "ice_visit");
      auto reason = parse_ice_reason(field("ice_reason"));
      if (!reason) fail(line_no, "unknown ice_reason '" + field("ice_reason") + "'");
      event.reason = *reason;
      event.persistent_ae_before_dc = parse_flag(field("persistent_ae"), line_no, "persistent_ae");
      event.efficacy_deteriorated_before_dc =
          parse_flag(field("efficacy_deteriorated"), line_no, "efficacy_deteriorated");
      ice = event;
    }

    if (auto it = weeks.find(visit); it != weeks.end() && it->second != week) {
      fail(line_no, "visit " + std::to_string(visit) + " has inconsistent week");
    }
    weeks[visit] = week;

    auto [it, inserted] = rows.try_emplace(id);
    SubjectRows& s = it->second;
    if (inserted) {
      order.push_back(id);
      s.first_line = line_no;
      s.arm = Arm{arm};
      s.baseline = baseline;
      s.ice = ice;
    } else {
      if (s.arm.z != arm) fail(line_no, "subject " + id + " changes arm");
      if (s.baseline != baseline) fail(line_no, "subject " + id + " changes baseline");
      const bool same_ice =
          s.ice.has_value() == ice.has_value() &&
          (!ice || (s.ice->visit_of_onset == ice->visit_of_onset && s.ice->reason == ice->reason &&
                    s.ice->persistent_ae_before_dc == ice->persistent_ae_before_dc &&
                    s.ice->efficacy_deteriorated_before_dc == ice->efficacy_deteriorated_before_dc));
      if (!same_ice) fail(line_no, "subject " + id + " has inconsistent ICE columns");
    }
    if (!s.by_visit.emplace(visit, std::make_pair(value, post_ice)).second) {
      fail(line_no, "duplicate visit " + std::to_string(visit) + " for subject " + id);
    }
  }

  Dataset dataset;
  dataset.endpoint_name = options.endpoint_name;
  dataset.smaller_is_better = options.smaller_is_better;
  dataset.outcome_is_change = options.outcome_is_change;
  int expected = 1;
  for (const auto& [index, week] : weeks) {
    if (index != expected++) throw InputError("visit indices must be consecutive from 1");
    dataset.schedule.visits.push_back({index, week});
  }
  dataset.schedule.analysis_visit = options.analysis_visit;
  const int n_visits = dataset.schedule.size();

  for (const auto& id : order) {
    const SubjectRows& r = rows.at(id);
    SubjectRecord s;
    s.id = id;
    s.arm = r.arm;
    s.baseline = r.baseline;
    s.ice = r.ice;
    s.outcomes.assign(n_visits, std::nullopt);
    s.post_ice.assign(n_visits, false);
    for (int t = 1; t <= n_visits; ++t) {
      if (auto it = r.by_visit.find(t); it != r.by_visit.end()) {
        s.outcomes[t - 1] = it->second.first;
        s.post_ice[t - 1] = it->second.second;
      } else {
        s.post_ice[t - 1] = r.ice && t > r.ice->visit_of_onset;
      }
    }
    dataset.subjects.push_back(std::move(s));
  }
  return dataset;
}

Dataset read_dataset_csv_file(const std::string& path, const DatasetCsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file '" + path + "'");
  try {
    return read_dataset_csv(in, options);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& s : dataset.subjects) {
    for (int t = 0; t < dataset.n_visits(); ++t) {
      const auto& v = dataset.schedule.visits[t];
      out << s.id << ',' << s.arm.z << ',' << v.index << ',' << format_number(v.week) << ','
          << format_number(s.baseline) << ',';
      if (s.outcomes[t]) out << format_number(*s.outcomes[t]);
      out << ',' << (s.post_ice[t] ? 1 : 0) << ',';
      if (s.ice) {
        out << s.ice->visit_of_onset << ',' << to_string(s.ice->reason) << ','
            << (s.ice->persistent_ae_before_dc ? 1 : 0) << ','
            << (s.ice->efficacy_deteriorated_before_dc ? 1 : 0);
      } else {
        out << ",,0,0";
      }
      out << '\n';
    }
  }
}

void write_truth_csv(std::ostream& out, const TruthBundle& truth) {
  out << "subject_id,arm,baseline";
  for (int z = 0; z < truth.n_arms; ++z) {
    out << ",y_final_" << z << ",policy_final_" << z << ",s_" << z;
  }
  out << ",category,ice_visit\n";
  const int last = truth.n_visits - 1;
  for (const auto& s : truth.subjects) {
    out << s.id << ',' << s.assigned.z << ',' << format_number(s.baseline);
    for (int z = 0; z < truth.n_arms; ++z) {
      out << ',' << format_number(s.potential[z][last]) << ',' << format_number(s.policy[z][last])
          << ',' << s.safety_ice[z];
    }
    const auto& cat = s.category[s.assigned.z];
    out << ',' << (cat ? std::to_string(static_cast<int>(*cat)) : std::string());
    out << ',';
    if (s.onset[s.assigned.z] >= 0) out << s.onset[s.assigned.z];
    out << '\n';
  }
}

}  // namespace hybridest
