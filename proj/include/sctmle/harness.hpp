#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sctmle/comparators.hpp"
#include "sctmle/cv.hpp"
#include "sctmle/dgp.hpp"
#include "sctmle/errors.hpp"
#include "sctmle/rng.hpp"

namespace sctmle {

enum class Method { stab_cvtmle, obrien_ols, holm, hochberg, ranksum };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::stab_cvtmle: return "stab_cvtmle";
    case Method::obrien_ols: return "obrien_ols";
    case Method::holm: return "holm";
    case Method::hochberg: return "hochberg";
    case Method::ranksum: return "ranksum";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  for (const Method m : {Method::stab_cvtmle, Method::obrien_ols, Method::holm,
                         Method::hochberg, Method::ranksum})
    if (s == method_name(m)) return m;
  throw config_error("unknown method '" + s +
                     "' (valid: stab_cvtmle, obrien_ols, holm, hochberg, ranksum)");
}

struct ScenarioConfig {
  std::string study = "study1";     // study1 | study2
  std::string scenario = "S1";      // S1..S4 | global_null | calibrated_alternative
  Eigen::Index n = 50;
  int replications = 1000;
  std::uint64_t base_seed = 202701;
  double gamma = 0.025;
  int v_folds = 10;
  double c_constant = 0.25;
  int mc_draws = 5000;
  int n_perm = 5000;
  std::vector<Method> methods;
  std::optional<int> df_override;
  Targeting targeting = Targeting::pooled;
  int jobs = 0;  // 0: hardware concurrency

  void validate() const {
    if (replications < 1) throw config_error("ScenarioConfig: replications >= 1");
    if (!(gamma > 0.0 && gamma < 0.5)) throw config_error("ScenarioConfig: gamma in (0, 0.5)");
    if (methods.empty()) throw config_error("ScenarioConfig: empty methods list");
    if (study != "study1" && study != "study2")
      throw config_error("ScenarioConfig: study must be study1 or study2");
    if (study == "study1") {
      if (scenario != "S1" && scenario != "S2" && scenario != "S3" && scenario != "S4")
        throw config_error("unknown study1 scenario '" + scenario +
                           "' (valid: S1, S2, S3, S4)");
    } else if (scenario != "global_null" && scenario != "calibrated_alternative") {
      throw config_error("unknown study2 scenario '" + scenario +
                         "' (valid: global_null, calibrated_alternative)");
    }
  }
};

// Default configuration for a named scenario.
inline ScenarioConfig scenario_preset(const std::string& study, const std::string& scenario) {
  ScenarioConfig cfg;
  cfg.study = study;
  cfg.scenario = scenario;
  if (study == "study1") {
    cfg.n = 50;
    cfg.c_constant = 0.25;
    cfg.methods = {Method::holm, Method::hochberg, Method::obrien_ols,
                   Method::stab_cvtmle, Method::ranksum};
  } else {
    cfg.n = 60;
    cfg.c_constant = 2.0;
    cfg.methods = {Method::ranksum, Method::stab_cvtmle};
  }
  cfg.validate();
  return cfg;
}

struct MethodStats {
  Method method = Method::stab_cvtmle;
  int rejections = 0;
  double rate = 0.0;
  double se = 0.0;
};

struct ReplicationRecord {
  int replication = 0;
  std::map<std::string, bool> reject;
  std::map<std::string, double> statistic;
  Eigen::VectorXd weights;  // fold-averaged stabilized weights (cv-tmle only)
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<MethodStats> per_method;
  Eigen::VectorXd avg_weights;  // simplex point, averaged over replications
  int replications = 0;
  double wall_seconds = 0.0;
  std::vector<ReplicationRecord> records;  // optional per-replication dump
};

namespace detail {

inline GeneratedTrial generate_for(const ScenarioConfig& cfg, RngStream& rng) {
  if (cfg.study == "study1") {
    Study1Config c;
    c.n = cfg.n;
    if (cfg.scenario == "S1") c.beta_a = {0.0, 0.0};
    else if (cfg.scenario == "S2") c.beta_a = {1.0, 0.0};
    else if (cfg.scenario == "S3") c.beta_a = {0.5, 0.5};
    else c.beta_a = {0.8, 0.2};
    return gen_study1(c, rng);
  }
  Study2Config c;
  c.n = cfg.n;
  c.global_null = cfg.scenario == "global_null";
  return gen_study2(c, rng);
}

}  // namespace detail

// One replication. Streams derive from (base seed, replication, purpose), so
// scheduling cannot perturb results. The fold plan is shared by the
// stabilized test and the cross-fitted comparator estimates.
inline ReplicationRecord run_replication(const ScenarioConfig& cfg, int rep) {
  RngStream root(cfg.base_seed);
  RngStream rep_stream = root.child(static_cast<std::uint64_t>(rep));
  RngStream data_rng = rep_stream.child("data");
  const GeneratedTrial trial = detail::generate_for(cfg, data_rng);

  ReplicationRecord rec;
  rec.replication = rep;
  const int df = cfg.df_override.value_or(static_cast<int>(trial.dataset.n()) - 2);

  RngStream fold_rng = rep_stream.child("folds");
  const FoldPlan plan = make_folds(trial.dataset.n(), cfg.v_folds, fold_rng);

  bool need_cv_est = false;
  for (const Method m : cfg.methods)
    need_cv_est = need_cv_est || m == Method::obrien_ols || m == Method::holm ||
                  m == Method::hochberg;

  if (need_cv_est) {
    const EndpointEstimates est = cv_estimate_all_endpoints(trial.dataset, plan, cfg.targeting);
    for (const Method m : cfg.methods) {
      if (m == Method::obrien_ols) {
        const auto r = obrien_ols_tmle(est, trial.dataset.n(), cfg.gamma, df);
        rec.reject[method_name(m)] = r.reject;
        rec.statistic[method_name(m)] = r.statistic;
      } else if (m == Method::holm || m == Method::hochberg) {
        const Eigen::VectorXd p = endpoint_pvalues(est, trial.dataset.n(), df);
        const auto r = m == Method::holm ? holm(p, cfg.gamma) : hochberg(p, cfg.gamma);
        rec.reject[method_name(m)] = r.reject;
        rec.statistic[method_name(m)] = r.p_value;
      }
    }
  }
  for (const Method m : cfg.methods) {
    if (m == Method::stab_cvtmle) {
      StabilizationConfig scfg;
      scfg.alpha_ref = WeightVector::uniform(trial.dataset.n_endpoints());
      scfg.c_constant = cfg.c_constant;
      scfg.mc_draws = cfg.mc_draws;
      RngStream test_rng = rep_stream.child("cvtmle");
      const GlobalTestResult r =
          stabilized_cvtmle_test(trial.dataset, scfg, cfg.v_folds, cfg.gamma, test_rng,
                                 cfg.targeting, cfg.df_override, &plan);
      rec.reject[method_name(m)] = r.reject;
      rec.statistic[method_name(m)] = r.t_cv;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(trial.dataset.n_endpoints());
      for (const auto& fw : r.fold_weights) w += fw.w;
      rec.weights = w / static_cast<double>(r.fold_weights.size());
    } else if (m == Method::ranksum) {
      RngStream perm_rng = rep_stream.child("ranksum");
      const auto r = obrien_ranksum(trial.dataset.outcomes, trial.dataset.arm,
                                    cfg.n_perm, cfg.gamma, perm_rng);
      rec.reject[method_name(m)] = r.reject;
      rec.statistic[method_name(m)] = r.p_value;
    }
  }
  return rec;
}

// All replications over a deterministic worker pool: workers claim indices
// from an atomic counter, results land in a preallocated slot per index, and
// aggregation is an ordered reduction.
inline ScenarioReport run_scenario(const ScenarioConfig& cfg, bool keep_records = false) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<ReplicationRecord> records(cfg.replications);
  std::vector<std::string> errors(cfg.replications);
  std::atomic<int> next{0};
  int jobs = cfg.jobs > 0 ? cfg.jobs
                          : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, cfg.replications));

  const auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= cfg.replications) return;
      try {
        records[r] = run_replication(cfg, r);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (int r = 0; r < cfg.replications; ++r)
    if (!errors[r].empty())
      throw std::runtime_error("replication " + std::to_string(r) +
                               " failed: " + errors[r]);

  ScenarioReport report;
  report.config = cfg;
  report.replications = cfg.replications;
  for (const Method m : cfg.methods) {
    MethodStats ms;
    ms.method = m;
    for (const auto& rec : records) ms.rejections += rec.reject.at(method_name(m));
    ms.rate = static_cast<double>(ms.rejections) / cfg.replications;
    ms.se = std::sqrt(ms.rate * (1.0 - ms.rate) / cfg.replications);
    report.per_method.push_back(ms);
  }
  for (const auto& rec : records) {
    if (rec.weights.size() == 0) continue;
    if (report.avg_weights.size() == 0) report.avg_weights = Eigen::VectorXd::Zero(rec.weights.size());
    report.avg_weights += rec.weights;
  }
  if (report.avg_weights.size() > 0) report.avg_weights /= cfg.replications;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (keep_records) report.records = std::move(records);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization.
// ---------------------------------------------------------------------------

// CSV, one row per (scenario, method), full precision so a parse round-trips.
inline void emit_report_csv(const ScenarioReport& report, std::ostream& os) {
  os << "study,scenario,method,n,replications,rejection_rate,rejection_se";
  const auto kw = report.avg_weights.size();
  for (Eigen::Index k = 0; k < kw; ++k) os << ",avg_weight_" << (k + 1);
  os << "\n";
  const auto old = os.precision(17);
  for (const auto& ms : report.per_method) {
    os << report.config.study << "," << report.config.scenario << ","
       << method_name(ms.method) << "," << report.config.n << ","
       << report.replications << "," << ms.rate << "," << ms.se;
    for (Eigen::Index k = 0; k < kw; ++k) {
      if (ms.method == Method::stab_cvtmle)
        os << "," << report.avg_weights[k];
      else
        os << ",";
    }
    os << "\n";
  }
  os.precision(old);
}

struct ReportRow {
  std::string study, scenario, method;
  long n = 0;
  int replications = 0;
  double rate = 0.0, se = 0.0;
  std::vector<double> weights;
};

inline std::vector<ReportRow> parse_report_csv(std::istream& is) {
  std::vector<ReportRow> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 7) cells.emplace_back();
    ReportRow row;
    row.study = cells[0];
    row.scenario = cells[1];
    row.method = cells[2];
    row.n = std::stol(cells[3]);
    row.replications = std::stoi(cells[4]);
    row.rate = std::stod(cells[5]);
    row.se = std::stod(cells[6]);
    for (std::size_t j = 7; j < cells.size(); ++j)
      if (!cells[j].empty()) row.weights.push_back(std::stod(cells[j]));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Markdown summary table, rates at three decimals.
inline void emit_report_markdown(const ScenarioReport& report, std::ostream& os) {
  os << "| Study | Scenario | Method | Rejection rate | SE |\n";
  os << "|---|---|---|---|---|\n";
  char buf[64];
  for (const auto& ms : report.per_method) {
    std::snprintf(buf, sizeof(buf), "%.3f | %.3f", ms.rate, ms.se);
    os << "| " << report.config.study << " | " << report.config.scenario << " | "
       << method_name(ms.method) << " | " << buf << " |\n";
  }
  if (report.avg_weights.size() > 0) {
    os << "\nAverage stabilized weights:";
    for (Eigen::Index k = 0; k < report.avg_weights.size(); ++k) {
      std::snprintf(buf, sizeof(buf), " %.3f", report.avg_weights[k]);
      os << buf;
    }
    os << "\n";
  }
}

inline void emit_records_csv(const ScenarioReport& report, std::ostream& os) {
  os << "replication,method,reject,statistic\n";
  const auto old = os.precision(17);
  for (const auto& rec : report.records)
    for (const auto& [name, rej] : rec.reject)
      os << rec.replication << "," << name << "," << (rej ? 1 : 0) << ","
         << rec.statistic.at(name) << "\n";
  os.precision(old);
}

}  // namespace sctmle
