#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sctmle/dataset.hpp"
#include "sctmle/errors.hpp"
#include "sctmle/rng.hpp"
#include "sctmle/stats.hpp"
#include "sctmle/tmle.hpp"
#include "sctmle/weights.hpp"

namespace sctmle {

enum class Targeting { pooled, per_fold };

struct FoldPlan {
  std::vector<int> assignment;  // fold label in [0, V) per subject
  int v_folds = 0;

  [[nodiscard]] std::vector<Eigen::Index> members(int fold) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(assignment.size()); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }

  [[nodiscard]] std::vector<Eigen::Index> complement(int fold) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(assignment.size()); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }

  void validate() const {
    if (v_folds < 2) throw config_error("FoldPlan: V >= 2 required");
    std::vector<int> sizes(v_folds, 0);
    for (const int f : assignment) {
      if (f < 0 || f >= v_folds) throw config_error("FoldPlan: label out of range");
      ++sizes[f];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*hi - *lo > 1) throw config_error("FoldPlan: fold sizes differ by more than 1");
    if (*lo < 1) throw config_error("FoldPlan: empty fold");
  }
};

// Uniformly random balanced partition of {0..n-1} into v_folds folds.
inline FoldPlan make_folds(Eigen::Index n, int v_folds, RngStream& rng) {
  if (v_folds < 2) throw config_error("make_folds: V >= 2 required");
  if (n < 2 * static_cast<Eigen::Index>(v_folds))
    throw config_error("make_folds: need n >= 2V");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(order);
  FoldPlan plan;
  plan.v_folds = v_folds;
  plan.assignment.assign(n, 0);
  Eigen::Index pos = 0;
  for (int v = 0; v < v_folds; ++v) {
    const Eigen::Index size = n / v_folds + (v < n % v_folds ? 1 : 0);
    for (Eigen::Index j = 0; j < size; ++j) plan.assignment[order[pos++]] = v;
  }
  return plan;
}

// Smallest per-arm subject count over the folds of a plan.
inline int min_fold_arm_count(const FoldPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& arm) {
  std::vector<int> n1(plan.v_folds, 0), n0(plan.v_folds, 0);
  for (Eigen::Index i = 0; i < arm.size(); ++i)
    (arm[i] == 1.0 ? n1 : n0)[plan.assignment[i]]++;
  int lo = static_cast<int>(arm.size());
  for (int v = 0; v < plan.v_folds; ++v) lo = std::min({lo, n1[v], n0[v]});
  return lo;
}

struct FoldResult {
  TrainingFoldSummary summary;
  std::vector<Eigen::Index> valid_idx;
  Eigen::VectorXd q1;           // Q_alpha(1, W) on the validation fold
  Eigen::VectorXd q0;           // Q_alpha(0, W)
  Eigen::VectorXd composite_y;  // Y_valid * alpha_stab
};

struct GlobalTestResult {
  double psi_cv = 0.0;
  double sigma_cv = 0.0;
  double t_cv = 0.0;
  int df = 0;
  bool reject = false;
  std::vector<WeightVector> fold_weights;
  std::vector<double> fold_pvalues;
  std::vector<double> fold_estimates;
};

// Step 1 (optimize + stabilize) and Step 2 setup for one fold. The null
// statistic is scaled by the training residual dof rather than n_train so it
// is calibrated against the N(0, rho) supremum draws (in-sample residuals
// understate the influence-curve second moment by (n-d-2)/n).
inline FoldResult run_fold(const TrialDataset& data, const FoldPlan& plan, int fold,
                           const StabilizationConfig& cfg, RngStream& rng) {
  const auto train_idx = plan.complement(fold);
  FoldResult out;
  out.valid_idx = plan.members(fold);
  if (out.valid_idx.empty()) throw config_error("run_fold: empty validation fold");

  const TrialDataset train = data.subset(train_idx);
  EndpointFit fit;
  try {
    fit = fit_all_endpoints(train);
  } catch (const singular_fit_error& e) {
    throw singular_fit_error("fold " + std::to_string(fold + 1) + ": " + e.what());
  }

  auto [alpha_adapt, snr_unit] = optimize_weights(fit.est.psi, fit.est.rho, cfg.alpha_ref);
  const double dof = static_cast<double>(train.n() - train.n_covariates() - 2);
  out.summary.alpha_adapt = alpha_adapt;
  out.summary.t_star = std::sqrt(std::max(dof, 1.0)) * snr_unit;
  out.summary.p_value = supremum_null_pvalue(out.summary.t_star, fit.est.rho, cfg, rng);
  out.summary.alpha_stab = stabilize(alpha_adapt, out.summary.p_value, data.n(), cfg);

  const auto& a = out.summary.alpha_stab.w;
  const auto m = static_cast<Eigen::Index>(out.valid_idx.size());
  out.q1.setZero(m);
  out.q0.setZero(m);
  out.composite_y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index i = out.valid_idx[r];
    for (Eigen::Index k = 0; k < data.n_endpoints(); ++k) {
      out.q1[r] += a[k] * fit.models[k].predict(1.0, data.covariates.row(i));
      out.q0[r] += a[k] * fit.models[k].predict(0.0, data.covariates.row(i));
    }
    out.composite_y[r] = data.outcomes.row(i).dot(a);
  }
  return out;
}

struct PooledTargetResult {
  double epsilon = 0.0;              // pooled fluctuation (mean over folds if per-fold)
  std::vector<double> psi_folds;     // fold estimates of the composite effect
  Eigen::VectorXd ic_cv;             // per-subject IC, centered at own fold estimate
  std::vector<int> fold_of;          // validation fold per subject
};

// Validation-stage targeting across folds. Pooled: one fluctuation parameter
// across all validation observations; per-fold: one per fold. Each fold's IC
// is centered at its own estimate, so the cross-validated score equation
// holds to machine precision.
inline PooledTargetResult pooled_target(const std::vector<FoldResult>& folds,
                                        const TrialDataset& data,
                                        Targeting targeting = Targeting::pooled) {
  if (folds.size() < 2) throw config_error("pooled_target: need V >= 2 fold results");
  const auto n = data.n();
  std::vector<char> seen(n, 0);
  for (const auto& fr : folds)
    for (const auto i : fr.valid_idx) {
      if (seen[i]) throw config_error("pooled_target: subject in two validation folds");
      seen[i] = 1;
    }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!seen[i]) throw config_error("pooled_target: subject missing from validation");

  const double g1 = data.propensity;
  const double dh = 1.0 / g1 + 1.0 / (1.0 - g1);

  const auto fold_eps = [&](const FoldResult& fr) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(fr.valid_idx.size()); ++r) {
      const Eigen::Index i = fr.valid_idx[r];
      const double h = clever_covariate(data.arm[i], g1);
      const double q_arm = data.arm[i] == 1.0 ? fr.q1[r] : fr.q0[r];
      num += h * (fr.composite_y[r] - q_arm);
      den += h * h;
    }
    return std::pair{num, den};
  };

  PooledTargetResult out;
  out.ic_cv.setZero(n);
  out.fold_of.assign(n, -1);

  std::vector<double> eps(folds.size(), 0.0);
  if (targeting == Targeting::pooled) {
    double num = 0.0, den = 0.0;
    for (const auto& fr : folds) {
      const auto [fn, fd] = fold_eps(fr);
      num += fn;
      den += fd;
    }
    std::fill(eps.begin(), eps.end(), num / den);
  } else {
    for (std::size_t v = 0; v < folds.size(); ++v) {
      const auto [fn, fd] = fold_eps(folds[v]);
      eps[v] = fn / fd;
    }
  }

  for (std::size_t v = 0; v < folds.size(); ++v) {
    const auto& fr = folds[v];
    const auto m = static_cast<Eigen::Index>(fr.valid_idx.size());
    double psi_v = 0.0;
    for (Eigen::Index r = 0; r < m; ++r)
      psi_v += fr.q1[r] - fr.q0[r] + eps[v] * dh;
    psi_v /= static_cast<double>(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index i = fr.valid_idx[r];
      const double h = clever_covariate(data.arm[i], g1);
      const double q_arm = data.arm[i] == 1.0 ? fr.q1[r] : fr.q0[r];
      const double resid = fr.composite_y[r] - q_arm - eps[v] * h;
      out.ic_cv[i] = h * resid + (fr.q1[r] - fr.q0[r] + eps[v] * dh) - psi_v;
      out.fold_of[i] = static_cast<int>(v);
    }
    out.psi_folds.push_back(psi_v);
  }
  out.epsilon =
      std::accumulate(eps.begin(), eps.end(), 0.0) / static_cast<double>(eps.size());
  return out;
}

// Pooled estimate, influence-curve variance, t-calibrated one-sided decision.
inline GlobalTestResult pool_and_decide(const std::vector<double>& psi_folds,
                                        const Eigen::Ref<const Eigen::VectorXd>& ic_cv,
                                        double gamma, int df) {
  if (psi_folds.empty()) throw config_error("pool_and_decide: no fold estimates");
  if (!(gamma > 0.0 && gamma < 0.5)) throw config_error("pool_and_decide: gamma outside (0,0.5)");
  const auto n = ic_cv.size();
  GlobalTestResult out;
  out.df = df;
  out.fold_estimates = psi_folds;
  out.psi_cv = std::accumulate(psi_folds.begin(), psi_folds.end(), 0.0) /
               static_cast<double>(psi_folds.size());
  const double mean_ic = ic_cv.mean();
  out.sigma_cv = std::sqrt((ic_cv.array() - mean_ic).square().sum() /
                           static_cast<double>(n));
  if (out.sigma_cv > 0.0) {
    out.t_cv = std::sqrt(static_cast<double>(n)) * out.psi_cv / out.sigma_cv;
  } else if (out.psi_cv == 0.0) {
    out.t_cv = 0.0;  // degenerate constant data: never reject
  } else {
    throw degenerate_variance_error(
        "pool_and_decide: zero variance with nonzero estimate");
  }
  out.reject = out.t_cv > stats::t_quantile(1.0 - gamma, static_cast<double>(df));
  return out;
}

// Algorithm 1 end to end. Streams: folds from rng.child("folds"), the fold-v
// null draws from rng.child("nullmc").child(v). When an external plan is
// supplied (so several methods can share folds) the "folds" child is not
// consumed.
inline GlobalTestResult stabilized_cvtmle_test(
    const TrialDataset& data, const StabilizationConfig& cfg, int v_folds,
    double gamma, RngStream& rng, Targeting targeting = Targeting::pooled,
    std::optional<int> df_override = std::nullopt,
    const FoldPlan* external_plan = nullptr) {
  data.validate();
  cfg.validate();
  if (cfg.alpha_ref.size() != data.n_endpoints())
    throw dimension_error("stabilized_cvtmle_test: alpha_ref length != K");

  FoldPlan plan;
  if (external_plan) {
    plan = *external_plan;
  } else {
    RngStream fold_rng = rng.child("folds");
    plan = make_folds(data.n(), v_folds, fold_rng);
  }
  plan.validate();

  RngStream mc_root = rng.child("nullmc");
  std::vector<FoldResult> folds;
  folds.reserve(plan.v_folds);
  for (int v = 0; v < plan.v_folds; ++v) {
    RngStream mc = mc_root.child(static_cast<std::uint64_t>(v));
    folds.push_back(run_fold(data, plan, v, cfg, mc));
  }

  const PooledTargetResult pooled = pooled_target(folds, data, targeting);
  const int df = df_override.value_or(static_cast<int>(data.n()) - 2);
  GlobalTestResult out = pool_and_decide(pooled.psi_folds, pooled.ic_cv, gamma, df);
  for (const auto& fr : folds) {
    out.fold_weights.push_back(fr.summary.alpha_stab);
    out.fold_pvalues.push_back(fr.summary.p_value);
  }
  return out;
}

// Per-endpoint fixed-weight CV-TMLE on a shared fold plan: the estimates the
// comparator tests consume. Equals the stabilized procedure with the weights
// pinned at each vertex (pooled targeting per endpoint), so the C -> infinity
// limit of the full test coincides with the equal-weight composite formed
// from these estimates.
inline EndpointEstimates cv_estimate_all_endpoints(const TrialDataset& data,
                                                   const FoldPlan& plan,
                                                   Targeting targeting = Targeting::pooled) {
  data.validate();
  plan.validate();
  const auto n = data.n();
  const auto k = data.n_endpoints();
  const double g1 = data.propensity;
  const double dh = 1.0 / g1 + 1.0 / (1.0 - g1);

  // Out-of-fold predictions from training-fold models, all endpoints at once.
  Eigen::MatrixXd q1(n, k), q0(n, k);
  for (int v = 0; v < plan.v_folds; ++v) {
    const TrialDataset train = data.subset(plan.complement(v));
    const EndpointFit fit = fit_all_endpoints(train);
    for (const Eigen::Index i : plan.members(v)) {
      for (Eigen::Index j = 0; j < k; ++j) {
        q1(i, j) = fit.models[j].predict(1.0, data.covariates.row(i));
        q0(i, j) = fit.models[j].predict(0.0, data.covariates.row(i));
      }
    }
  }

  EndpointEstimates est;
  est.psi.resize(k);
  est.ic.resize(n, k);
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = clever_covariate(data.arm[i], g1);

  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd q_arm(n);
    for (Eigen::Index i = 0; i < n; ++i)
      q_arm[i] = data.arm[i] == 1.0 ? q1(i, j) : q0(i, j);
    const Eigen::VectorXd resid = data.outcomes.col(j) - q_arm;

    std::vector<double> eps(plan.v_folds, 0.0);
    if (targeting == Targeting::pooled) {
      const double e = h.dot(resid) / h.squaredNorm();
      std::fill(eps.begin(), eps.end(), e);
    } else {
      for (int v = 0; v < plan.v_folds; ++v) {
        double num = 0.0, den = 0.0;
        for (const Eigen::Index i : plan.members(v)) {
          num += h[i] * resid[i];
          den += h[i] * h[i];
        }
        eps[v] = num / den;
      }
    }

    double psi_sum = 0.0;
    for (int v = 0; v < plan.v_folds; ++v) {
      const auto members = plan.members(v);
      double psi_v = 0.0;
      for (const Eigen::Index i : members)
        psi_v += q1(i, j) - q0(i, j) + eps[v] * dh;
      psi_v /= static_cast<double>(members.size());
      for (const Eigen::Index i : members)
        est.ic(i, j) = h[i] * (resid[i] - eps[v] * h[i]) +
                       (q1(i, j) - q0(i, j) + eps[v] * dh) - psi_v;
      psi_sum += psi_v;
    }
    est.psi[j] = psi_sum / static_cast<double>(plan.v_folds);
  }

  const Eigen::RowVectorXd mean = est.ic.colwise().mean();
  const Eigen::MatrixXd centered = est.ic.rowwise() - mean;
  est.rho = centered.transpose() * centered / static_cast<double>(n);
  return est;
}

}  // namespace sctmle
