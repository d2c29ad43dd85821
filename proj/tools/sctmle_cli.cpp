// Command-line driver: run one scenario, run the invariant suite, or
// reproduce the full set of result tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sctmle/harness.hpp"
#include "sctmle/validation.hpp"

namespace {

using sctmle::Method;
using sctmle::ScenarioConfig;
using sctmle::ScenarioReport;

void apply_json_config(ScenarioConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw sctmle::config_error("cannot open config file: " + path);
  nlohmann::json j;
  is >> j;
  if (j.contains("study")) cfg.study = j["study"].get<std::string>();
  if (j.contains("scenario")) cfg.scenario = j["scenario"].get<std::string>();
  if (j.contains("n")) cfg.n = j["n"].get<long>();
  if (j.contains("replications")) cfg.replications = j["replications"].get<int>();
  if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
  if (j.contains("v_folds")) cfg.v_folds = j["v_folds"].get<int>();
  if (j.contains("c_constant")) cfg.c_constant = j["c_constant"].get<double>();
  if (j.contains("mc_draws")) cfg.mc_draws = j["mc_draws"].get<int>();
  if (j.contains("n_perm")) cfg.n_perm = j["n_perm"].get<int>();
  if (j.contains("df")) cfg.df_override = j["df"].get<int>();
  if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
  if (j.contains("targeting")) {
    const auto t = j["targeting"].get<std::string>();
    if (t == "pooled")
      cfg.targeting = sctmle::Targeting::pooled;
    else if (t == "per_fold")
      cfg.targeting = sctmle::Targeting::per_fold;
    else
      throw sctmle::config_error("targeting must be 'pooled' or 'per_fold'");
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"])
      cfg.methods.push_back(sctmle::method_from_name(m.get<std::string>()));
  }
}

void write_report(const ScenarioReport& report, const std::string& out,
                  const std::string& format) {
  std::ostringstream body;
  if (format == "markdown")
    sctmle::emit_report_markdown(report, body);
  else
    sctmle::emit_report_csv(report, body);
  if (out.empty() || out == "-") {
    std::cout << body.str();
  } else {
    std::ofstream os(out);
    if (!os) throw sctmle::config_error("cannot write to " + out);
    os << body.str();
  }
}

int cmd_run(const ScenarioConfig& cfg, const std::string& out, const std::string& format,
            const std::string& dump) {
  const ScenarioReport report = sctmle::run_scenario(cfg, !dump.empty());
  write_report(report, out, format);
  if (!dump.empty()) {
    std::ofstream os(dump);
    if (!os) throw sctmle::config_error("cannot write to " + dump);
    sctmle::emit_records_csv(report, os);
  }
  std::cerr << "done: " << cfg.study << "/" << cfg.scenario << " " << report.replications
            << " replications in " << report.wall_seconds << " s\n";
  return 0;
}

int cmd_validate() {
  const auto results = sctmle::validation::run_all();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
    all = all && r.pass;
  }
  return all ? 0 : 2;
}

int cmd_tables(int reps, int jobs, const std::string& outdir) {
  struct Cell {
    std::string study, scenario;
  };
  const std::vector<Cell> cells = {{"study1", "S1"}, {"study1", "S2"}, {"study1", "S3"},
                                   {"study1", "S4"}, {"study2", "global_null"},
                                   {"study2", "calibrated_alternative"}};
  std::vector<ScenarioReport> reports;
  for (const auto& cell : cells) {
    ScenarioConfig cfg = sctmle::scenario_preset(cell.study, cell.scenario);
    cfg.replications = reps;
    cfg.jobs = jobs;
    std::cerr << "running " << cell.study << "/" << cell.scenario << "...\n";
    reports.push_back(sctmle::run_scenario(cfg));
  }

  const auto rate = [&](const ScenarioReport& r, Method m) {
    for (const auto& ms : r.per_method)
      if (ms.method == m) return ms.rate;
    return -1.0;
  };
  char buf[256];
  std::ostringstream t1, t2, t3;
  t1 << "# Study 1: rejection rates (n=50, gamma=0.025, " << reps << " replications)\n\n"
     << "| Scenario | Holm | Hochberg | O'Brien | Stab. CV-TMLE | Unadj. O'Brien |\n"
     << "|---|---|---|---|---|---|\n";
  t2 << "# Study 1: average stabilized composite weights\n\n"
     << "| Scenario | alpha1 | alpha2 |\n|---|---|---|\n";
  const char* labels[] = {"S1 (Type I error)", "S2 (Strong Y1)", "S3 (Equal)",
                          "S4 (Asymmetric)"};
  for (int i = 0; i < 4; ++i) {
    const auto& r = reports[i];
    std::snprintf(buf, sizeof(buf), "| %s | %.3f | %.3f | %.3f | %.3f | %.3f |\n", labels[i],
                  rate(r, Method::holm), rate(r, Method::hochberg),
                  rate(r, Method::obrien_ols), rate(r, Method::stab_cvtmle),
                  rate(r, Method::ranksum));
    t1 << buf;
    std::snprintf(buf, sizeof(buf), "| %s | %.3f | %.3f |\n", labels[i],
                  r.avg_weights[0], r.avg_weights[1]);
    t2 << buf;
  }
  t3 << "# Study 2: rejection rates (n=60, gamma=0.025, " << reps << " replications)\n\n"
     << "| Scenario | Metric | O'Brien (unadj.) | Stab. CV-TMLE |\n|---|---|---|---|\n";
  std::snprintf(buf, sizeof(buf), "| Global null | Type I error | %.3f | %.3f |\n",
                rate(reports[4], Method::ranksum), rate(reports[4], Method::stab_cvtmle));
  t3 << buf;
  std::snprintf(buf, sizeof(buf), "| Trial-calibrated alternative | Power | %.3f | %.3f |\n",
                rate(reports[5], Method::ranksum), rate(reports[5], Method::stab_cvtmle));
  t3 << buf;

  const auto emit = [&](const std::string& name, const std::string& body) {
    if (outdir.empty()) {
      std::cout << body << "\n";
    } else {
      std::ofstream os(outdir + "/" + name);
      if (!os) throw sctmle::config_error("cannot write to " + outdir + "/" + name);
      os << body;
    }
  };
  emit("table1.md", t1.str());
  emit("table2.md", t2.str());
  emit("table3.md", t3.str());
  if (!outdir.empty()) {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::ofstream os(outdir + "/" + cells[i].study + "_" + cells[i].scenario + ".csv");
      sctmle::emit_report_csv(reports[i], os);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilized cross-validated TMLE global tests and simulation harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one scenario over many replications");
  ScenarioConfig cfg = sctmle::scenario_preset("study1", "S1");
  std::string study = "study1", scenario = "S1", out, format = "csv", dump, config_path;
  std::vector<std::string> method_names;
  bool explicit_c = false, explicit_n = false;
  run->add_option("--study", study, "study1 | study2");
  run->add_option("--scenario", scenario,
                  "study1: S1..S4; study2: global_null | calibrated_alternative");
  run->add_option("--reps", cfg.replications, "replications (default 1000)");
  run->add_option("--seed", cfg.base_seed, "base seed (default 202701)");
  run->add_option("--folds", cfg.v_folds, "cross-validation folds (default 10)");
  auto* copt = run->add_option("--c-const", cfg.c_constant,
                               "stabilization constant (default 0.25 / 2 by study)");
  run->add_option("--mc-draws", cfg.mc_draws, "null-distribution draws B (default 5000)");
  run->add_option("--perms", cfg.n_perm, "rank-sum permutations (default 5000)");
  run->add_option("--gamma", cfg.gamma, "one-sided level (default 0.025)");
  auto* nopt = run->add_option("--n", cfg.n, "sample size (default 50 / 60 by study)");
  run->add_option("--methods", method_names,
                  "subset of stab_cvtmle,obrien_ols,holm,hochberg,ranksum")
      ->delimiter(',');
  int df = 0;
  auto* dfopt = run->add_option("--df", df, "t degrees of freedom (default n-2)");
  std::string targeting = "pooled";
  run->add_option("--targeting", targeting, "pooled | per_fold fluctuation")
      ->check(CLI::IsMember({"pooled", "per_fold"}));
  run->add_option("--jobs", cfg.jobs, "worker threads (default: hardware)");
  run->add_option("--out", out, "output path (default stdout)");
  run->add_option("--format", format, "csv | markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  run->add_option("--dump-reps", dump, "write per-replication records to this CSV");
  run->add_option("--config", config_path, "JSON config file mirroring the scenario fields");

  auto* validate = app.add_subcommand("validate", "Run the invariant/property suite");
  auto* tables = app.add_subcommand("tables", "Run all scenarios and emit result tables");
  int treps = 1000, tjobs = 0;
  std::string outdir;
  tables->add_option("--reps", treps, "replications per scenario (default 1000)");
  tables->add_option("--jobs", tjobs, "worker threads");
  tables->add_option("--out", outdir, "directory for table1-3.md and per-scenario CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ScenarioConfig preset = sctmle::scenario_preset(study, scenario);
      explicit_c = copt->count() > 0;
      explicit_n = nopt->count() > 0;
      cfg.study = preset.study;
      cfg.scenario = preset.scenario;
      cfg.methods = preset.methods;
      if (!explicit_c) cfg.c_constant = preset.c_constant;
      if (!explicit_n) cfg.n = preset.n;
      if (dfopt->count() > 0) cfg.df_override = df;
      cfg.targeting =
          targeting == "per_fold" ? sctmle::Targeting::per_fold : sctmle::Targeting::pooled;
      if (!method_names.empty()) {
        cfg.methods.clear();
        for (const auto& mname : method_names)
          cfg.methods.push_back(sctmle::method_from_name(mname));
      }
      if (!config_path.empty()) apply_json_config(cfg, config_path);
      cfg.validate();
      return cmd_run(cfg, out, format, dump);
    }
    if (validate->parsed()) return cmd_validate();
    if (tables->parsed()) return cmd_tables(treps, tjobs, outdir);
  } catch (const sctmle::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
