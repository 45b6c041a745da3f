#include "hybridest/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "hybridest/csv_io.hpp"
#include "hybridest/version.hpp"

namespace hybridest {

using nlohmann::ordered_json;

std::string fixed2(double value) {
  char buf[64];
  // Avoid "-0.00".
  if (std::fabs(value) < 0.005) value = 0.0;
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

RunProvenance make_provenance(std::vector<std::pair<std::string, std::string>> settings) {
  RunProvenance p;
  std::sort(settings.begin(), settings.end());
  std::string canonical;
  for (const auto& [k, v] : settings) canonical += k + "=" + v + "\n";
  p.settings = std::move(settings);
  p.config_hash = fnv1a_hex(canonical);
  return p;
}

namespace {

std::string method_label(const EstimandResult& r) {
  switch (r.spec.kind) {
    case EstimandKind::Theoretic: return "MMRM (MAR), theoretic";
    case EstimandKind::DeFacto: return "Reference-based MI, de facto";
    case EstimandKind::Hybrid: return "Mixed imputation, hybrid";
  }
  return "?";
}

void pad(std::ostream& out, const std::string& s, std::size_t width) {
  out << s;
  for (std::size_t i = s.size(); i < width; ++i) out << ' ';
}

}  // namespace

void write_result_table(std::ostream& out, const std::vector<EstimandResult>& results,
                        const std::string& title) {
  if (results.empty()) return;
  const EstimandResult& first = results.front();
  std::vector<std::string> header = {"Method"};
  for (const auto& a : first.arm_means) {
    header.push_back("Arm " + std::to_string(a.arm.z) + " (N=" + std::to_string(a.n) + ") Mean (SE)");
  }
  const int level = static_cast<int>(std::lround(100.0 * (1.0 - first.spec.alpha)));
  for (const auto& d : first.differences) {
    header.push_back("Arm " + std::to_string(d.arm.z) + " vs " + std::to_string(d.reference.z) +
                     " Mean (" + std::to_string(level) + "% CI)");
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : results) {
    std::vector<std::string> row = {method_label(r)};
    for (const auto& a : r.arm_means) row.push_back(fixed2(a.mean) + " (" + fixed2(a.se) + ")");
    for (const auto& d : r.differences) {
      row.push_back(fixed2(d.value) + " (" + fixed2(d.ci_low) + ", " + fixed2(d.ci_high) + ")");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) {
      if (c < row.size()) width[c] = std::max(width[c], row[c].size());
    }
  }
  out << title << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c + 1 < cells.size()) {
        pad(out, cells[c], width[c] + 2);
      } else {
        out << cells[c];
      }
    }
    out << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
}

namespace {

ordered_json pooled_json(const PooledEstimate& p) {
  return ordered_json{{"m", p.m},         {"q_bar", p.q_bar}, {"within", p.within},
                      {"between", p.between}, {"total", p.total}, {"df", p.df}};
}

}  // namespace

ordered_json result_json(const EstimandResult& r) {
  ordered_json j;
  j["estimand"] = std::string(to_string(r.spec.kind));
  j["delta"] = r.spec.delta;
  j["smaller_is_better"] = r.spec.smaller_is_better;
  j["analysis_visit"] = r.analysis_visit;
  j["alpha"] = r.spec.alpha;
  j["covariance"] = r.spec.covariance == CovarianceStructure::Shared ? "shared" : "per-arm";
  if (r.spec.kind == EstimandKind::Hybrid) {
    ordered_json s;
    for (int c = 0; c < 3; ++c) s["category_" + std::to_string(c + 1)] = std::string(to_string(r.spec.strategies[c]));
    j["strategies"] = s;
  }
  ordered_json means = ordered_json::array();
  for (const auto& a : r.arm_means) {
    ordered_json m{{"arm", a.arm.z}, {"n", a.n}, {"mean", a.mean}, {"se", a.se}};
    if (a.pooled) m["pooling"] = pooled_json(*a.pooled);
    means.push_back(m);
  }
  j["arm_means"] = means;
  ordered_json diffs = ordered_json::array();
  for (const auto& d : r.differences) {
    ordered_json x{{"arm", d.arm.z},         {"reference", d.reference.z}, {"estimate", d.value},
                   {"se", d.se},             {"ci_low", d.ci_low},         {"ci_high", d.ci_high},
                   {"df", d.df},             {"p_value_one_sided", d.p_value}};
    if (d.pooled) x["pooling"] = pooled_json(*d.pooled);
    diffs.push_back(x);
  }
  j["differences"] = diffs;
  const Provenance& p = r.provenance;
  ordered_json seeds = ordered_json::array();
  for (auto s : p.imputation_seeds) seeds.push_back(s);
  j["pipeline"] = ordered_json{{"name", p.pipeline},
                               {"rules", p.rules},
                               {"m", p.m},
                               {"master_seed", p.master_seed},
                               {"imputation_seeds", seeds},
                               {"imputed_cells", p.imputed_cells},
                               {"dataset_digest", p.dataset_digest},
                               {"mmrm_iterations", r.mmrm_iterations},
                               {"mmrm_converged", r.mmrm_converged}};
  return j;
}

ordered_json provenance_json(const RunProvenance& provenance) {
  ordered_json settings;
  for (const auto& [k, v] : provenance.settings) settings[k] = v;
  return ordered_json{{"version", std::string(kVersion)},
                      {"config_hash", provenance.config_hash},
                      {"settings", settings}};
}

ordered_json ice_summary_json(const IceSummaryTable& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    rows.push_back(ordered_json{{"arm", r.arm.z},
                                {"n", r.n},
                                {"any", r.any},
                                {"category_1", r.safety},
                                {"category_2", r.efficacy},
                                {"category_3", r.administrative}});
  }
  return rows;
}

void write_fit_report(std::ostream& out, const MmrmFit& fit) {
  out << "subjects = " << fit.n_subjects << '\n'
      << "observations = " << fit.n_observations << '\n'
      << "visits = " << fit.n_visits << '\n'
      << "covariance = " << (fit.covariance == CovarianceStructure::Shared ? "shared" : "per-arm") << '\n'
      << "baseline_mean = " << format_number(fit.baseline_mean) << '\n'
      << "reml_loglik = " << format_number(fit.reml_loglik) << '\n'
      << "converged = " << (fit.converged ? "true" : "false") << '\n'
      << "iterations = " << fit.n_iterations << '\n'
      << "residual_df = " << fit.residual_df << '\n';
  for (Eigen::Index c = 0; c < fit.beta.size(); ++c) {
    out << "beta." << fit.column_names[c] << " = " << format_number(fit.beta(c)) << " (se "
        << format_number(std::sqrt(std::max(0.0, fit.vcov_beta(c, c)))) << ")\n";
  }
  for (std::size_t g = 0; g < fit.sigma.size(); ++g) {
    for (Eigen::Index a = 0; a < fit.sigma[g].rows(); ++a) {
      out << "sigma" << g << ".row" << a + 1 << " =";
      for (Eigen::Index b = 0; b < fit.sigma[g].cols(); ++b) out << ' ' << format_number(fit.sigma[g](a, b));
      out << '\n';
    }
  }
  for (const Arm a : fit.arms) {
    for (int v = 1; v <= fit.n_visits; ++v) {
      const Estimate e = ls_mean_change(fit, a, v);
      out << "lsmean.arm" << a.z << ".visit" << v << " = " << format_number(e.value) << " (se "
          << format_number(e.se) << ")\n";
    }
  }
}

void write_monte_carlo_text(std::ostream& out, const MonteCarloReport& report) {
  out << "scenario " << report.scenario << ", R = " << report.options.replications
      << ", M = " << report.options.m << ", delta = " << format_number(report.delta)
      << ", seed = " << report.options.master_seed << '\n';
  out << std::left << std::setw(11) << "pipeline" << std::setw(5) << "arm" << std::right
      << std::setw(10) << "estimate" << std::setw(10) << "oracle" << std::setw(10) << "bias"
      << std::setw(10) << "mc_se" << std::setw(10) << "emp_sd" << std::setw(10) << "mean_se"
      << std::setw(10) << "coverage" << std::setw(10) << "reject" << '\n';
  auto f4 = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return std::string(buf);
  };
  for (const auto& s : report.summaries) {
    out << std::left << std::setw(11) << std::string(to_string(s.kind)) << std::setw(5) << s.arm.z
        << std::right << std::setw(10) << f4(s.mean_estimate) << std::setw(10) << f4(s.mean_oracle)
        << std::setw(10) << f4(s.bias) << std::setw(10) << f4(s.bias_mc_se) << std::setw(10)
        << f4(s.empirical_sd) << std::setw(10) << f4(s.mean_se) << std::setw(10) << f4(s.coverage)
        << std::setw(10) << f4(s.rejection_rate) << '\n';
  }
}

ordered_json monte_carlo_json(const MonteCarloReport& report, bool include_records) {
  ordered_json j;
  j["scenario"] = report.scenario;
  j["replications"] = report.options.replications;
  j["m"] = report.options.m;
  j["master_seed"] = report.options.master_seed;
  j["delta"] = report.delta;
  j["alpha"] = report.options.alpha;
  ordered_json sums = ordered_json::array();
  for (const auto& s : report.summaries) {
    sums.push_back(ordered_json{{"pipeline", std::string(to_string(s.kind))},
                                {"arm", s.arm.z},
                                {"replications", s.replications},
                                {"mean_estimate", s.mean_estimate},
                                {"mean_oracle", s.mean_oracle},
                                {"bias", s.bias},
                                {"bias_mc_se", s.bias_mc_se},
                                {"empirical_sd", s.empirical_sd},
                                {"mean_se", s.mean_se},
                                {"coverage", s.coverage},
                                {"coverage_own_oracle", s.coverage_own_oracle},
                                {"rejection_rate", s.rejection_rate}});
  }
  j["summaries"] = sums;
  if (include_records) {
    ordered_json recs = ordered_json::array();
    for (const auto& r : report.records) {
      ordered_json outs = ordered_json::array();
      for (const auto& o : r.outcomes) {
        outs.push_back(ordered_json{{"pipeline", std::string(to_string(o.kind))},
                                    {"arm", o.arm.z},
                                    {"estimate", o.estimate},
                                    {"se", o.se},
                                    {"ci_low", o.ci_low},
                                    {"ci_high", o.ci_high},
                                    {"p_value", o.p_value},
                                    {"oracle", o.oracle}});
      }
      recs.push_back(ordered_json{{"index", r.index},
                                  {"scenario_seed", r.scenario_seed},
                                  {"imputation_seed", r.imputation_seed},
                                  {"safety_proportion", r.safety_proportion},
                                  {"outcomes", outs}});
    }
    j["records"] = recs;
  }
  return j;
}

}  // namespace hybridest
