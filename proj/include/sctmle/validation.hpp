#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sctmle/cv.hpp"
#include "sctmle/comparators.hpp"
#include "sctmle/dgp.hpp"
#include "sctmle/harness.hpp"
#include "sctmle/rng.hpp"
#include "sctmle/tmle.hpp"
#include "sctmle/weights.hpp"

namespace sctmle::validation {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline TrialDataset random_dataset(RngStream& rng, Eigen::Index n, Eigen::Index d,
                                   Eigen::Index k) {
  TrialDataset data;
  data.covariates.resize(n, d);
  data.arm.resize(n);
  data.outcomes.resize(n, k);
  data.propensity = 0.5;
  for (;;) {
    int n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) data.covariates(i, j) = rng.normal();
      data.arm[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      n1 += data.arm[i] == 1.0;
      for (Eigen::Index j = 0; j < k; ++j)
        data.outcomes(i, j) = rng.normal(0.0, 1.0 + 0.5 * static_cast<double>(j)) +
                              0.3 * data.covariates(i, 0);
    }
    if (n1 >= 2 && n - n1 >= 2) return data;
  }
}

// Closed-form AIPW with known propensity, computed straight from the OLS fit
// (independent of the fluctuation path inside tmle_ate).
inline double aipw_oracle(const TrialDataset& data, Eigen::Index endpoint) {
  const OutcomeModel model = fit_outcome_regression(data, endpoint);
  const auto n = data.n();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = clever_covariate(data.arm[i], data.propensity);
    const double q_arm = model.predict(data.arm[i], data.covariates.row(i));
    acc += h * (data.outcomes(i, endpoint) - q_arm) +
           model.predict(1.0, data.covariates.row(i)) -
           model.predict(0.0, data.covariates.row(i));
  }
  return acc / static_cast<double>(n);
}

inline std::pair<Eigen::VectorXd, double> grid_oracle_k2(
    const Eigen::Ref<const Eigen::VectorXd>& psi,
    const Eigen::Ref<const Eigen::MatrixXd>& rho, double step = 1e-4) {
  Eigen::VectorXd best(2);
  double best_val = -1e300;
  const long m = std::lround(1.0 / step);
  for (long t = 0; t <= m; ++t) {
    const double a1 = static_cast<double>(t) / static_cast<double>(m);
    Eigen::Vector2d a{a1, 1.0 - a1};
    const double v = a.dot(rho * a);
    if (!(v > 0.0)) continue;
    const double val = a.dot(psi) / std::sqrt(v);
    if (val > best_val) {
      best_val = val;
      best = a;
    }
  }
  return {best, best_val};
}

}  // namespace detail

// (a) tmle_ate equals the closed-form AIPW estimator within 1e-10.
inline CheckResult check_aipw_equivalence() {
  RngStream rng(11001);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    const TrialDataset data = detail::random_dataset(r, 40 + (rep % 30), 2, 2);
    for (Eigen::Index k = 0; k < 2; ++k) {
      const auto [psi, ic] = tmle_ate(data, k);
      worst = std::max(worst, std::fabs(psi - detail::aipw_oracle(data, k)));
    }
  }
  return {"aipw_equivalence", worst < 1e-10,
          "max |tmle - aipw| = " + std::to_string(worst)};
}

// (b) cross-validated EIC mean zero after pooled targeting.
inline CheckResult check_cv_score_equation() {
  RngStream rng(11002);
  double worst = 0.0;
  StabilizationConfig cfg;
  cfg.alpha_ref = WeightVector::uniform(2);
  cfg.c_constant = 0.25;
  cfg.mc_draws = 1000;
  for (int rep = 0; rep < 25; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    RngStream data_rng = r.child("data");
    const TrialDataset data = detail::random_dataset(data_rng, 50, 2, 2);
    RngStream fold_rng = r.child("folds");
    const FoldPlan plan = make_folds(data.n(), 5, fold_rng);
    std::vector<FoldResult> folds;
    RngStream mc = r.child("mc");
    for (int v = 0; v < plan.v_folds; ++v) {
      RngStream mcv = mc.child(static_cast<std::uint64_t>(v));
      folds.push_back(run_fold(data, plan, v, cfg, mcv));
    }
    const auto pooled = pooled_target(folds, data);
    const double sd = std::sqrt((pooled.ic_cv.array() - pooled.ic_cv.mean()).square().mean());
    worst = std::max(worst, std::fabs(pooled.ic_cv.mean()) / std::max(sd, 1e-12));
  }
  return {"cv_score_equation", worst < 1e-8,
          "max |mean IC| / SD = " + std::to_string(worst)};
}

// (c) optimize_weights matches the 1e-4 grid oracle within 1e-3 per coordinate.
inline CheckResult check_optimizer_vs_grid() {
  RngStream rng(11003);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    Eigen::Vector2d psi{r.normal(), r.normal()};
    Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
    l(0, 0) = 0.3 + r.uniform();
    l(1, 0) = r.normal() * 0.5;
    l(1, 1) = 0.3 + r.uniform();
    const Eigen::Matrix2d rho = l * l.transpose();
    const auto [alpha, val] = optimize_weights(psi, rho);
    const auto [galpha, gval] = detail::grid_oracle_k2(psi, rho);
    worst = std::max(worst, (alpha.w - galpha).cwiseAbs().maxCoeff());
  }
  return {"optimizer_vs_grid", worst < 1e-3,
          "max coordinate gap = " + std::to_string(worst)};
}

// (d) stabilize: exact truncation at lambda = 1 and convexity per coordinate.
inline CheckResult check_stabilize() {
  StabilizationConfig cfg;
  cfg.alpha_ref = WeightVector::uniform(2);
  cfg.c_constant = 0.25;
  cfg.mc_draws = 1000;
  const WeightVector adapt = WeightVector::vertex(2, 0);

  bool ok = true;
  std::string detail;
  // truncation: C ln(n) p >= 1 collapses exactly to the reference
  const WeightVector collapsed = stabilize(adapt, 1.0, 100000, cfg);
  if ((collapsed.w - cfg.alpha_ref.w).cwiseAbs().maxCoeff() != 0.0) {
    ok = false;
    detail = "truncation did not reach the reference exactly";
  }
  // frozen arithmetic: n=50, C=0.25, p=0.5 (natural log)
  const WeightVector mid = stabilize(adapt, 0.5, 50, cfg);
  const double lambda = 0.25 * std::log(50.0) * 0.5;
  if (std::fabs(mid.w[0] - (1.0 - 0.5 * lambda)) > 1e-12 ||
      std::fabs(mid.w[1] - 0.5 * lambda) > 1e-12) {
    ok = false;
    detail = "midpoint arithmetic off";
  }
  // convexity: every coordinate between the two inputs
  RngStream rng(11004);
  for (int rep = 0; rep < 200 && ok; ++rep) {
    const double p = std::max(1e-6, rng.uniform());
    const WeightVector s = stabilize(adapt, p, 50, cfg);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double lo = std::min(adapt.w[j], cfg.alpha_ref.w[j]);
      const double hi = std::max(adapt.w[j], cfg.alpha_ref.w[j]);
      if (s.w[j] < lo - 1e-15 || s.w[j] > hi + 1e-15) {
        ok = false;
        detail = "convexity violated";
      }
    }
  }
  return {"stabilize_truncation_convexity", ok, detail.empty() ? "exact" : detail};
}

// (e) supremum p-value: monotone in t_star on a shared stream, and
// super-uniform under point-null data.
inline CheckResult check_pvalue_monotone_superuniform() {
  StabilizationConfig cfg;
  cfg.alpha_ref = WeightVector::uniform(2);
  cfg.mc_draws = 2000;

  Eigen::Matrix2d rho;
  rho << 4.0, 0.8, 0.8, 3.0;
  RngStream base(11005);
  double prev = 2.0;
  for (const double t : {-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    RngStream s = base;  // same draws for every threshold
    const double p = supremum_null_pvalue(t, rho, cfg, s);
    if (p > prev)
      return {"pvalue_monotone_superuniform", false, "not monotone in t_star"};
    prev = p;
  }

  const int reps = 500;
  cfg.mc_draws = 1000;
  int count05 = 0, count10 = 0, count25 = 0;
  RngStream rng(11006);
  Study1Config dgp;
  dgp.n = 45;
  dgp.beta_a = {0.0, 0.0};
  for (int rep = 0; rep < reps; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    RngStream data_rng = r.child("data");
    const GeneratedTrial trial = gen_study1(dgp, data_rng);
    const EndpointFit fit = fit_all_endpoints(trial.dataset);
    const auto [alpha, snr_unit] = optimize_weights(fit.est.psi, fit.est.rho, cfg.alpha_ref);
    const double dof = static_cast<double>(trial.dataset.n() - trial.dataset.n_covariates() - 2);
    const double t_star = std::sqrt(dof) * snr_unit;
    RngStream mc = r.child("mc");
    const double p = supremum_null_pvalue(t_star, fit.est.rho, cfg, mc);
    count05 += p <= 0.05;
    count10 += p <= 0.10;
    count25 += p <= 0.25;
  }
  const auto limit = [&](double q) {
    return q + 3.0 * std::sqrt(q * (1.0 - q) / reps);
  };
  char buf[160];
  std::snprintf(buf, sizeof(buf), "P(p<=.05)=%.3f/%.3f P(p<=.10)=%.3f/%.3f P(p<=.25)=%.3f/%.3f",
                count05 / 500.0, limit(0.05), count10 / 500.0, limit(0.10),
                count25 / 500.0, limit(0.25));
  const bool ok = count05 <= limit(0.05) * reps && count10 <= limit(0.10) * reps &&
                  count25 <= limit(0.25) * reps;
  return {"pvalue_monotone_superuniform", ok, buf};
}

// (f) Hochberg rejects whenever Holm does, over 10^4 random p-vectors.
inline CheckResult check_hochberg_dominates_holm() {
  RngStream rng(11007);
  for (int rep = 0; rep < 10000; ++rep) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.uniform_int(0, 4));
    Eigen::VectorXd p(k);
    for (Eigen::Index j = 0; j < k; ++j)
      p[j] = rng.bernoulli(0.3) ? rng.uniform() * 0.08 : rng.uniform();
    const double gamma = 0.025 + 0.05 * rng.uniform();
    const bool ho = holm(p, gamma).reject;
    const bool hb = hochberg(p, gamma).reject;
    if (ho && !hb)
      return {"hochberg_dominates_holm", false, "holm rejected without hochberg"};
    // Bonferroni implies Holm
    if ((p.array() <= gamma / static_cast<double>(k)).any() && !ho)
      return {"hochberg_dominates_holm", false, "bonferroni rejected without holm"};
  }
  return {"hochberg_dominates_holm", true, "10^4 random p-vectors"};
}

// (g) study-2 truncation boxes and exact arm balance on every draw.
inline CheckResult check_study2_generator() {
  RngStream rng(11008);
  Study2Config cfg;
  for (int rep = 0; rep < 200; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    cfg.global_null = rep % 2 == 0;
    const GeneratedTrial trial = gen_study2(cfg, r);
    int n1 = 0;
    for (Eigen::Index i = 0; i < trial.dataset.n(); ++i) n1 += trial.dataset.arm[i] == 1.0;
    if (n1 * 2 != trial.dataset.n())
      return {"study2_generator", false, "arms not exactly balanced"};
    for (Eigen::Index i = 0; i < trial.baselines.rows(); ++i) {
      const double walk = trial.baselines(i, 0), fvc = trial.baselines(i, 1);
      if (walk < cfg.walk_lo || walk > cfg.walk_hi)
        return {"study2_generator", false, "6MWT outside [50,650]"};
      if (fvc < cfg.fvc_lo || fvc >= cfg.fvc_hi)
        return {"study2_generator", false, "FVC outside [20,80)"};
    }
  }
  return {"study2_generator", true, "200 draws, boxes and balance hold"};
}

// (h) run_scenario is invariant to the worker count.
inline CheckResult check_worker_determinism() {
  ScenarioConfig cfg = scenario_preset("study1", "S2");
  cfg.replications = 24;
  cfg.mc_draws = 1000;
  cfg.n_perm = 200;
  cfg.base_seed = 991;
  cfg.jobs = 1;
  const ScenarioReport a = run_scenario(cfg);
  cfg.jobs = 3;
  const ScenarioReport b = run_scenario(cfg);
  for (std::size_t i = 0; i < a.per_method.size(); ++i)
    if (a.per_method[i].rejections != b.per_method[i].rejections)
      return {"worker_determinism", false, "rejection counts differ across job counts"};
  if ((a.avg_weights - b.avg_weights).cwiseAbs().maxCoeff() != 0.0)
    return {"worker_determinism", false, "weights differ across job counts"};
  return {"worker_determinism", true, "jobs=1 and jobs=3 agree exactly"};
}

inline std::vector<CheckResult> run_all() {
  return {check_aipw_equivalence(),   check_cv_score_equation(),
          check_optimizer_vs_grid(),  check_stabilize(),
          check_pvalue_monotone_superuniform(), check_hochberg_dominates_holm(),
          check_study2_generator(),   check_worker_determinism()};
}

}  // namespace sctmle::validation
