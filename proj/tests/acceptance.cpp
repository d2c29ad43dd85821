// Acceptance suite: runs every scenario at its default settings and pinned
// seed and checks the headline numbers, then the property suite and the
// large-n weight-convergence checks. One pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sctmle/harness.hpp"
#include "sctmle/validation.hpp"

namespace {

using sctmle::Method;
using sctmle::ScenarioConfig;
using sctmle::ScenarioReport;

int failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double rate(const ScenarioReport& r, Method m) {
  for (const auto& ms : r.per_method)
    if (ms.method == m) return ms.rate;
  return std::nan("");
}

bool within(double x, double target, double tol) { return std::fabs(x - target) <= tol; }

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0,
                double d = 0.0, double e = 0.0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d, e);
  return buf;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  // Shared scenario runs at default settings (seed 202701, 1000 replications).
  std::vector<ScenarioReport> s1(4);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "S" + std::to_string(i + 1);
    std::fprintf(stderr, "running study1/%s...\n", name.c_str());
    s1[i] = sctmle::run_scenario(sctmle::scenario_preset("study1", name));
  }
  std::fprintf(stderr, "running study2/global_null...\n");
  const ScenarioReport s2_null =
      sctmle::run_scenario(sctmle::scenario_preset("study2", "global_null"));
  std::fprintf(stderr, "running study2/calibrated_alternative...\n");
  const ScenarioReport s2_alt =
      sctmle::run_scenario(sctmle::scenario_preset("study2", "calibrated_alternative"));

  // Criterion 1: Study-1 Type I error inside [0.010, 0.040] for every method.
  {
    bool pass = true;
    std::string detail = "rates:";
    for (const Method m : {Method::holm, Method::hochberg, Method::obrien_ols,
                           Method::stab_cvtmle, Method::ranksum}) {
      const double p = rate(s1[0], m);
      pass = pass && p >= 0.010 && p <= 0.040;
      detail += std::string(" ") + sctmle::method_name(m) + "=" + fmt("%.3f", p);
    }
    report(1, pass, "study-1 Type I error in [0.010, 0.040] — " + detail);
  }

  // Criterion 2: Study-1 power magnitudes and orderings.
  {
    const double cv[3] = {rate(s1[1], Method::stab_cvtmle), rate(s1[2], Method::stab_cvtmle),
                          rate(s1[3], Method::stab_cvtmle)};
    const double ob[3] = {rate(s1[1], Method::obrien_ols), rate(s1[2], Method::obrien_ols),
                          rate(s1[3], Method::obrien_ols)};
    const double ho[3] = {rate(s1[1], Method::holm), rate(s1[2], Method::holm),
                          rate(s1[3], Method::holm)};
    const double hb[4] = {rate(s1[0], Method::hochberg), rate(s1[1], Method::hochberg),
                          rate(s1[2], Method::hochberg), rate(s1[3], Method::hochberg)};
    const double rs[3] = {rate(s1[1], Method::ranksum), rate(s1[2], Method::ranksum),
                          rate(s1[3], Method::ranksum)};
    bool pass = within(cv[0], 0.873, 0.05) && within(cv[1], 0.562, 0.05) &&
                within(cv[2], 0.700, 0.05);
    pass = pass && within(ob[0], 0.657, 0.05) && within(ob[1], 0.645, 0.05) &&
           within(ob[2], 0.648, 0.05);
    pass = pass && within(ho[0], 0.858, 0.05) && within(ho[1], 0.472, 0.05) &&
           within(ho[2], 0.668, 0.05);
    pass = pass && within(rs[0], 0.478, 0.05) && within(rs[1], 0.526, 0.05) &&
           within(rs[2], 0.504, 0.05);
    // Hochberg >= Holm in every scenario
    pass = pass && hb[0] >= rate(s1[0], Method::holm) && hb[1] >= ho[0] &&
           hb[2] >= ho[1] && hb[3] >= ho[2];
    // qualitative orderings
    const auto top = [&](int scen) {
      double best = -1.0;
      for (const Method m : {Method::holm, Method::hochberg, Method::obrien_ols,
                             Method::stab_cvtmle, Method::ranksum})
        best = std::max(best, rate(s1[scen], m));
      return best;
    };
    pass = pass && cv[0] >= top(1) && cv[2] >= top(3);  // CV-TMLE tops S2 and S4
    pass = pass && ob[1] >= top(2);                     // O'Brien tops S3
    pass = pass && ob[0] > rs[0] && ob[1] > rs[1] && ob[2] > rs[2];
    report(2, pass,
           "study-1 power — cvtmle " + fmt("%.3f/%.3f/%.3f", cv[0], cv[1], cv[2]) +
               " obrien " + fmt("%.3f/%.3f/%.3f", ob[0], ob[1], ob[2]) + " holm " +
               fmt("%.3f/%.3f/%.3f", ho[0], ho[1], ho[2]) + " ranksum " +
               fmt("%.3f/%.3f/%.3f", rs[0], rs[1], rs[2]));
  }

  // Criterion 3: Study-1 average stabilized weights.
  {
    const double targets[4] = {0.510, 0.887, 0.496, 0.764};
    bool pass = true;
    std::string detail = "alpha1:";
    for (int i = 0; i < 4; ++i) {
      const double w1 = s1[i].avg_weights[0];
      pass = pass && within(w1, targets[i], 0.05);
      detail += fmt(" %.3f(target %.3f)", w1, targets[i]);
    }
    report(3, pass, "study-1 average weights — " + detail);
  }

  // Criterion 4: Study-2 Type I and power.
  {
    const double t_rs = rate(s2_null, Method::ranksum);
    const double t_cv = rate(s2_null, Method::stab_cvtmle);
    const double p_rs = rate(s2_alt, Method::ranksum);
    const double p_cv = rate(s2_alt, Method::stab_cvtmle);
    bool pass = t_rs >= 0.010 && t_rs <= 0.040 && t_cv >= 0.010 && t_cv <= 0.040;
    pass = pass && within(p_rs, 0.529, 0.05) && within(p_cv, 0.602, 0.05) && p_cv > p_rs;
    report(4, pass,
           fmt("study-2 — Type I ranksum=%.3f cvtmle=%.3f; power ranksum=%.3f "
               "cvtmle=%.3f",
               t_rs, t_cv, p_rs, p_cv));
  }

  // Criterion 5: property suite, under 60 seconds.
  {
    const auto v0 = std::chrono::steady_clock::now();
    const auto checks = sctmle::validation::run_all();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - v0).count();
    bool pass = secs < 60.0;
    std::string detail;
    for (const auto& c : checks) {
      pass = pass && c.pass;
      if (!c.pass) detail += " " + c.name + "(" + c.detail + ")";
    }
    report(5, pass,
           fmt("property suite in %.1f s", secs) +
               (detail.empty() ? std::string(" — all checks green") : " — failing:" + detail));
  }

  // Criterion 6: large-n weight convergence surrogates.
  {
    ScenarioConfig cfg = sctmle::scenario_preset("study1", "S2");
    cfg.methods = {Method::stab_cvtmle};
    cfg.n = 5000;
    cfg.replications = 30;
    const ScenarioReport big_s2 = sctmle::run_scenario(cfg);
    cfg.scenario = "S1";
    const ScenarioReport big_s1 = sctmle::run_scenario(cfg);
    const double w_s2 = big_s2.avg_weights[0];
    const double w1 = big_s1.avg_weights[0];
    const double w2 = big_s1.avg_weights[1];
    const bool pass =
        w_s2 > 0.8 && within(w1, 0.5, 0.05) && within(w2, 0.5, 0.05);
    report(6, pass,
           fmt("n=5000 weights — S2 alpha1=%.3f (>0.8); S1 (%.3f, %.3f) within 0.05 of "
               "(0.5, 0.5)",
               w_s2, w1, w2));
  }

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "acceptance suite finished in %.1f s, %d failure(s)\n", total,
               failures);
  return failures == 0 ? 0 : 1;
}
