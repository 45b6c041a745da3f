#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hybridest/csv_io.hpp"
#include "hybridest/errors.hpp"
#include "hybridest/estimands.hpp"
#include "hybridest/ice_classifier.hpp"
#include "hybridest/mmrm.hpp"
#include "hybridest/report.hpp"
#include "hybridest/simulator.hpp"
#include "hybridest/validation_run.hpp"
#include "hybridest/version.hpp"

namespace hybridest::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputDirEnv = "HYBRIDEST_OUTPUT_DIR";

struct CommonOptions {
  std::string out_dir;
  std::string prefix;
  std::string config;  // consumed by expand_config before parsing
};

struct DataOptions {
  std::string path;
  std::string endpoint = "endpoint";
  std::string direction = "smaller";
  bool raw_values = false;
};

struct SimulateOptions {
  std::string preset = "award1_like";
  std::uint64_t seed = 0;
  bool seed_given = false;
};

struct AnalyzeOptions {
  std::string estimands = "all";
  double delta = 0.0;
  int visit = 0;
  int m = 100;
  std::uint64_t seed = 0;
  std::string covariance = "shared";
  std::string formats = "text,json";
  unsigned threads = 1;
  bool fit_report = false;
};

struct ValidateOptions {
  std::string preset = "j2r_correct";
  int replications = 200;
  int m = 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double delta = -1.0;  // < 0: scenario default
  bool records = false;
};

std::string resolve_out_dir(const CommonOptions& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return ".";
}

fs::path output_path(const CommonOptions& c, const std::string& name) {
  const fs::path dir = resolve_out_dir(c);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir / (c.prefix + name);
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot write '" + p.string() + "'");
  return f;
}

bool smaller_is_better(const std::string& direction) {
  if (direction == "smaller") return true;
  if (direction == "larger") return false;
  throw InputError("direction must be 'smaller' or 'larger', got '" + direction + "'");
}

Dataset load(const DataOptions& d, int analysis_visit = 0) {
  DatasetCsvOptions o;
  o.endpoint_name = d.endpoint;
  o.smaller_is_better = smaller_is_better(d.direction);
  o.outcome_is_change = !d.raw_values;
  o.analysis_visit = analysis_visit;
  return read_dataset_csv_file(d.path, o);
}

void add_common(CLI::App* app, CommonOptions& c) {
  app->add_option("--out-dir", c.out_dir,
                  std::string("Output directory (default: $") + kOutputDirEnv + " or the working directory)");
  app->add_option("--prefix", c.prefix, "File name prefix for outputs");
  app->add_option("--config", c.config, "Flat key = value file of long option values; command-line values win")
      ->check(CLI::ExistingFile);
}

void add_data(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.path, "Long-format dataset CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--endpoint", d.endpoint, "Endpoint label");
  app->add_option("--direction", d.direction, "smaller|larger: which outcome values are better")
      ->check(CLI::IsMember({"smaller", "larger"}));
  app->add_flag("--raw-values", d.raw_values, "Outcomes are raw values rather than changes from baseline");
}

int cmd_simulate(const CommonOptions& c, const SimulateOptions& s, std::ostream& out) {
  ScenarioConfig cfg = calibrate_preset(s.preset);
  if (s.seed_given) cfg.master_seed = s.seed;
  const SimulationResult sim = simulate(cfg);
  require_valid(sim.dataset);

  const fs::path data_path = output_path(c, "dataset.csv");
  const fs::path truth_path = output_path(c, "truth.csv");
  {
    auto f = open_output(data_path);
    write_dataset_csv(f, sim.dataset);
  }
  {
    auto f = open_output(truth_path);
    write_truth_csv(f, sim.truth);
  }
  const RunProvenance prov = make_provenance({{"command", "simulate"},
                                               {"preset", s.preset},
                                               {"seed", std::to_string(cfg.master_seed)}});
  nlohmann::ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["dataset_digest"] = dataset_digest(sim.dataset);
  j["ice_summary"] = ice_summary_json(summarize(sim.dataset));
  nlohmann::ordered_json oracles = nlohmann::ordered_json::array();
  for (int z = 1; z < cfg.n_arms(); ++z) {
    oracles.push_back({{"arm", z},
                       {"theoretic", true_theoretic(sim.truth, Arm{z})},
                       {"defacto", true_defacto(sim.truth, Arm{z})},
                       {"hybrid", true_hybrid(sim.truth, cfg.smaller_is_better ? cfg.delta : -cfg.delta, Arm{z})},
                       {"safety_proportion", safety_proportion(sim.truth, Arm{z})}});
  }
  j["oracles"] = oracles;
  {
    auto f = open_output(output_path(c, "simulate.json"));
    f << j.dump(2) << '\n';
  }
  out << "simulated " << sim.dataset.subjects.size() << " subjects (" << s.preset << ", seed "
      << cfg.master_seed << ")\n"
      << "wrote " << data_path.string() << '\n'
      << "wrote " << truth_path.string() << '\n';
  write_summary_text(out, summarize(sim.dataset));
  return kOk;
}

int cmd_classify(const CommonOptions& c, const DataOptions& d, std::ostream& out) {
  const Dataset ds = classify_dataset(load(d));
  require_valid(ds);
  const IceSummaryTable table = summarize(ds);
  {
    auto f = open_output(output_path(c, "ice_summary.txt"));
    write_summary_text(f, table);
  }
  {
    auto f = open_output(output_path(c, "ice_summary.csv"));
    write_summary_csv(f, table);
  }
  write_summary_text(out, table);
  return kOk;
}

std::vector<EstimandKind> parse_kinds(const std::string& text) {
  if (text == "all") return {EstimandKind::Theoretic, EstimandKind::DeFacto, EstimandKind::Hybrid};
  std::vector<EstimandKind> kinds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto k = parse_estimand_kind(item);
    if (!k) throw InputError("unknown estimand '" + item + "'");
    kinds.push_back(*k);
  }
  if (kinds.empty()) throw InputError("no estimand requested");
  return kinds;
}

int cmd_analyze(const CommonOptions& c, const DataOptions& d, const AnalyzeOptions& a, bool seed_given,
                std::ostream& out) {
  const std::vector<EstimandKind> kinds = parse_kinds(a.estimands);
  const bool needs_seed = std::any_of(kinds.begin(), kinds.end(), [](EstimandKind k) { return k != EstimandKind::Theoretic; });
  if (needs_seed && !seed_given) {
    throw InputError("--seed is required for the de facto and hybrid pipelines");
  }
  bool text = false, json = false;
  {
    std::stringstream ss(a.formats);
    std::string f;
    while (std::getline(ss, f, ',')) {
      if (f == "text") text = true;
      else if (f == "json") json = true;
      else throw InputError("unknown report format '" + f + "'");
    }
  }
  const Dataset ds = load(d, a.visit);

  std::vector<EstimandResult> results;
  for (const EstimandKind k : kinds) {
    EstimandSpec spec;
    spec.kind = k;
    spec.delta = a.delta;
    spec.smaller_is_better = smaller_is_better(d.direction);
    spec.analysis_visit = a.visit;
    spec.covariance = a.covariance == "per-arm" ? CovarianceStructure::PerArm : CovarianceStructure::Shared;
    results.push_back(estimate(ds, spec, a.m, a.seed, EstimateOptions{a.threads}));
  }

  std::ostringstream table;
  write_result_table(table, results,
                     "Estimated mean change at visit " + std::to_string(results.front().analysis_visit) +
                         " (" + ds.endpoint_name + ")");
  out << table.str();
  if (text) {
    auto f = open_output(output_path(c, "analysis.txt"));
    f << table.str();
  }
  if (json) {
    const RunProvenance prov = make_provenance({{"command", "analyze"},
                                                 {"data", d.path},
                                                 {"endpoint", d.endpoint},
                                                 {"direction", d.direction},
                                                 {"raw_values", d.raw_values ? "true" : "false"},
                                                 {"estimands", a.estimands},
                                                 {"delta", format_number(a.delta)},
                                                 {"visit", std::to_string(a.visit)},
                                                 {"m", std::to_string(a.m)},
                                                 {"seed", seed_given ? std::to_string(a.seed) : ""},
                                                 {"covariance", a.covariance}});
    nlohmann::ordered_json j;
    j["provenance"] = provenance_json(prov);
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const auto& r : results) rs.push_back(result_json(r));
    j["results"] = rs;
    auto f = open_output(output_path(c, "analysis.json"));
    f << j.dump(2) << '\n';
  }
  if (a.fit_report) {
    EstimandSpec spec;
    spec.analysis_visit = a.visit;
    const Dataset view = analysis_view(ds, DataInclusionPolicy::OnTreatmentOnly);
    const MmrmFit f = fit(view, MmrmModelSpec{a.covariance == "per-arm" ? CovarianceStructure::PerArm
                                                                        : CovarianceStructure::Shared});
    auto file = open_output(output_path(c, "mmrm_fit.txt"));
    write_fit_report(file, f);
  }
  return kOk;
}

int cmd_validate(const CommonOptions& c, const ValidateOptions& v, std::ostream& out) {
  if (v.replications < 50) throw InputError("validate needs at least 50 replications");
  const ScenarioConfig cfg = calibrate_preset(v.preset);
  MonteCarloOptions o;
  o.replications = v.replications;
  o.m = v.m;
  o.master_seed = v.seed;
  o.threads = v.threads;
  if (v.delta >= 0) o.delta = v.delta;
  const MonteCarloReport report = run_monte_carlo(cfg, o);

  std::ostringstream text;
  write_monte_carlo_text(text, report);
  out << text.str();
  {
    auto f = open_output(output_path(c, "validation.txt"));
    f << text.str();
  }
  const RunProvenance prov = make_provenance({{"command", "validate"},
                                               {"preset", v.preset},
                                               {"replications", std::to_string(v.replications)},
                                               {"m", std::to_string(v.m)},
                                               {"seed", std::to_string(v.seed)},
                                               {"delta", v.delta >= 0 ? format_number(v.delta) : ""}});
  nlohmann::ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["report"] = monte_carlo_json(report, v.records);
  auto f = open_output(output_path(c, "validation.json"));
  f << j.dump(2) << '\n';
  return kOk;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// A config file holds "key = value" lines naming long options ('#' starts a
// comment). Its entries are spliced in after the subcommand unless the same
// option is already on the command line, so the command line wins over the
// file and the file over defaults. "true"/"false" switch flags.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file '" + path + "'");
  std::vector<std::string> extra;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty() || key == "config") {
      throw InputError(path + ":" + std::to_string(number) + ": invalid key '" + key + "'");
    }
    const std::string flag = "--" + key;
    if (given(args, flag)) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Theoretic, de facto and hybrid estimands for longitudinal trials with intercurrent events",
               "hybridest"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonOptions common;
  DataOptions data;
  SimulateOptions sim;
  AnalyzeOptions ana;
  ValidateOptions val;

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Simulate a trial from a preset scenario");
  add_common(simulate_cmd, common);
  simulate_cmd->add_option("--preset", sim.preset, "Scenario preset")->check(CLI::IsMember(preset_names()));
  auto* sim_seed = simulate_cmd->add_option("--seed", sim.seed, "Master seed (default: the preset's)");

  CLI::App* classify_cmd = app.add_subcommand("classify", "Classify ICEs and summarize them per arm");
  add_common(classify_cmd, common);
  add_data(classify_cmd, data);

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "Estimate theoretic, de facto and hybrid estimands");
  add_common(analyze_cmd, common);
  add_data(analyze_cmd, data);
  analyze_cmd->add_option("--estimand", ana.estimands, "theoretic, defacto, hybrid, a comma list, or all");
  analyze_cmd->add_option("--delta", ana.delta, "Non-inferiority margin (0 for superiority)")->check(CLI::NonNegativeNumber);
  analyze_cmd->add_option("--visit", ana.visit, "Analysis visit, 1-based (0: last)")->check(CLI::NonNegativeNumber);
  analyze_cmd->add_option("--m", ana.m, "Number of imputations")->check(CLI::Range(2, 100000));
  auto* ana_seed = analyze_cmd->add_option("--seed", ana.seed, "Master seed; required for imputation pipelines");
  analyze_cmd->add_option("--covariance", ana.covariance, "shared|per-arm")
      ->check(CLI::IsMember({"shared", "per-arm"}));
  analyze_cmd->add_option("--format", ana.formats, "Comma list of text, json");
  analyze_cmd->add_option("--threads", ana.threads, "Worker threads (0: all cores)");
  analyze_cmd->add_flag("--fit-report", ana.fit_report, "Also write the on-treatment MMRM fit");

  CLI::App* validate_cmd = app.add_subcommand("validate", "Monte Carlo check of every pipeline against its oracle");
  add_common(validate_cmd, common);
  validate_cmd->add_option("--preset", val.preset, "Scenario preset")->check(CLI::IsMember(preset_names()));
  validate_cmd->add_option("--replications", val.replications, "Replications (>= 50)");
  validate_cmd->add_option("--m", val.m, "Imputations per pipeline")->check(CLI::Range(2, 100000));
  validate_cmd->add_option("--seed", val.seed, "Master seed");
  validate_cmd->add_option("--threads", val.threads, "Worker threads (0: all cores)");
  validate_cmd->add_option("--delta", val.delta, "Margin (default: the preset's)")->check(CLI::NonNegativeNumber);
  validate_cmd->add_flag("--records", val.records, "Include per-replication records in the JSON output");

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend() - (expanded.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*simulate_cmd) {
      sim.seed_given = sim_seed->count() > 0;
      return cmd_simulate(common, sim, out);
    }
    if (*classify_cmd) return cmd_classify(common, data, out);
    if (*analyze_cmd) return cmd_analyze(common, data, ana, ana_seed->count() > 0, out);
    if (*validate_cmd) return cmd_validate(common, val, out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kOtherFailure;
  }
  return kOtherFailure;
}

}  // namespace hybridest::cli
