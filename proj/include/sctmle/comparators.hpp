#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sctmle/errors.hpp"
#include "sctmle/rng.hpp"
#include "sctmle/stats.hpp"
#include "sctmle/tmle.hpp"

namespace sctmle {

struct ComparatorResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  std::string method;
};

// O'Brien OLS statistic on TMLE estimates at equal weights:
// T = sqrt(n) (abar'psi) / sqrt(abar'rho abar), referred to t(df).
inline ComparatorResult obrien_ols_tmle(const EndpointEstimates& est, Eigen::Index n,
                                        double gamma, int df) {
  const auto k = est.psi.size();
  const Eigen::VectorXd abar = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  const double var = abar.dot(est.rho * abar);
  if (!(var > 0.0))
    throw degenerate_variance_error("obrien_ols_tmle: degenerate composite variance");
  ComparatorResult out;
  out.method = "obrien_ols";
  out.statistic = std::sqrt(static_cast<double>(n)) * abar.dot(est.psi) / std::sqrt(var);
  out.p_value = stats::t_sf(out.statistic, static_cast<double>(df));
  out.reject = out.statistic > stats::t_quantile(1.0 - gamma, static_cast<double>(df));
  return out;
}

// Midranks over one column (ties get the average rank, 1-based).
inline Eigen::VectorXd midranks(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Unadjusted O'Brien rank-sum test with one-sided Monte Carlo permutation
// inference: statistic = mean summed rank in arm 1 minus arm 0.
inline ComparatorResult obrien_ranksum(const Eigen::Ref<const Eigen::MatrixXd>& outcomes,
                                       const Eigen::Ref<const Eigen::VectorXd>& arm,
                                       int n_perm, double gamma, RngStream& rng) {
  const auto n = outcomes.rows();
  if (arm.size() != n) throw dimension_error("obrien_ranksum: arm length != n");
  Eigen::Index n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) n1 += arm[i] == 1.0;
  if (n1 == 0 || n1 == n) throw config_error("obrien_ranksum: single-arm data");

  Eigen::VectorXd composite = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < outcomes.cols(); ++k)
    composite += midranks(outcomes.col(k));

  const auto arm_diff = [&](const std::vector<char>& treated) {
    double s1 = 0.0, s0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) (treated[i] ? s1 : s0) += composite[i];
    return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n - n1);
  };

  std::vector<char> labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels[i] = arm[i] == 1.0;
  const double observed = arm_diff(labels);

  long count = 0;
  for (int b = 0; b < n_perm; ++b) {
    rng.shuffle(labels);
    if (arm_diff(labels) >= observed) ++count;
  }
  ComparatorResult out;
  out.method = "ranksum";
  out.statistic = observed;
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
  out.reject = out.p_value <= gamma;
  return out;
}

// One-sided per-endpoint p-values from t_k = sqrt(n) psi_k / sqrt(rho_kk).
inline Eigen::VectorXd endpoint_pvalues(const EndpointEstimates& est, Eigen::Index n,
                                        int df) {
  const auto k = est.psi.size();
  Eigen::VectorXd p(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double var = est.rho(j, j);
    if (!(var > 0.0))
      throw degenerate_variance_error("endpoint_pvalues: zero variance for endpoint " +
                                      std::to_string(j + 1));
    const double t = std::sqrt(static_cast<double>(n)) * est.psi[j] / std::sqrt(var);
    p[j] = stats::t_sf(t, static_cast<double>(df));
  }
  return p;
}

// Holm step-down: reject while p_(j) <= gamma / (K - j + 1). Global p-value
// is the Bonferroni-of-the-minimum bound K p_(1), consistent with the
// global rejection rule.
inline ComparatorResult holm(const Eigen::Ref<const Eigen::VectorXd>& pvals,
                             double gamma) {
  const auto k = pvals.size();
  std::vector<double> p(pvals.data(), pvals.data() + k);
  std::sort(p.begin(), p.end());
  bool any = false;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (p[j] <= gamma / static_cast<double>(k - j)) {
      any = true;
    } else {
      break;
    }
  }
  ComparatorResult out;
  out.method = "holm";
  out.statistic = p.front();
  out.p_value = std::min(1.0, static_cast<double>(k) * p.front());
  out.reject = any;
  return out;
}

// Hochberg step-up: reject 1..j for the largest j with
// p_(j) <= gamma / (K - j + 1). Global p-value min_j (K - j + 1) p_(j).
inline ComparatorResult hochberg(const Eigen::Ref<const Eigen::VectorXd>& pvals,
                                 double gamma) {
  const auto k = pvals.size();
  std::vector<double> p(pvals.data(), pvals.data() + k);
  std::sort(p.begin(), p.end());
  bool any = false;
  double global_p = 1.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mult = static_cast<double>(k - j);
    global_p = std::min(global_p, mult * p[j]);
    if (p[j] <= gamma / mult) any = true;
  }
  ComparatorResult out;
  out.method = "hochberg";
  out.statistic = p.front();
  out.p_value = std::min(1.0, global_p);
  out.reject = any;
  return out;
}

}  // namespace sctmle
