#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "sctmle/dataset.hpp"
#include "sctmle/errors.hpp"

namespace sctmle {

// Linear working model for one endpoint: intercept, main-term covariates,
// main-term treatment indicator.
struct OutcomeModel {
  Eigen::VectorXd coefficients;  // (1 + d + 1)

  [[nodiscard]] double predict(double a,
                               const Eigen::Ref<const Eigen::RowVectorXd>& w) const {
    const auto d = w.size();
    return coefficients[0] + w.dot(coefficients.segment(1, d).transpose()) +
           a * coefficients[d + 1];
  }

  [[nodiscard]] double treatment_coef() const {
    return coefficients[coefficients.size() - 1];
  }
};

// Per-endpoint TMLE results: point estimates, n x K influence-curve matrix,
// and the K x K influence-curve covariance (1/n convention).
struct EndpointEstimates {
  Eigen::VectorXd psi;
  Eigen::MatrixXd ic;
  Eigen::MatrixXd rho;
};

struct EndpointFit {
  EndpointEstimates est;
  std::vector<OutcomeModel> models;
};

// (2a - 1) / g(a) with g(1) = g1, g(0) = 1 - g1.
inline double clever_covariate(double a, double g1) {
  if (!(g1 > 0.0 && g1 < 1.0))
    throw positivity_error("clever_covariate: g1 outside (0,1)");
  return a == 1.0 ? 1.0 / g1 : -1.0 / (1.0 - g1);
}

// OLS of Y^(k) on [1, W, A]. Errors on rank-deficient designs.
inline OutcomeModel fit_outcome_regression(const TrialDataset& data,
                                           Eigen::Index endpoint) {
  const auto n = data.n();
  const auto d = data.n_covariates();
  Eigen::MatrixXd x(n, d + 2);
  x.col(0).setOnes();
  x.middleCols(1, d) = data.covariates;
  x.col(d + 1) = data.arm;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < d + 2)
    throw singular_fit_error("fit_outcome_regression: rank-deficient design for endpoint " +
                             std::to_string(endpoint + 1));
  OutcomeModel model;
  model.coefficients = qr.solve(data.outcomes.col(endpoint));
  return model;
}

namespace detail {

// Shared TMLE step given a fitted (or supplied) outcome model for a single
// column of outcomes. Returns (psi_hat, ic) and optionally the fluctuation.
inline std::pair<double, Eigen::VectorXd> target_and_ic(
    const TrialDataset& data, const Eigen::Ref<const Eigen::VectorXd>& y,
    const OutcomeModel& model, double* eps_out = nullptr) {
  const auto n = data.n();
  const double g1 = data.propensity;
  Eigen::VectorXd h(n), q_arm(n), q1(n), q0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] = clever_covariate(data.arm[i], g1);
    q1[i] = model.predict(1.0, data.covariates.row(i));
    q0[i] = model.predict(0.0, data.covariates.row(i));
    q_arm[i] = data.arm[i] == 1.0 ? q1[i] : q0[i];
  }
  // One linear fluctuation: residual on the clever covariate, no intercept.
  const Eigen::VectorXd resid = y - q_arm;
  const double eps = h.dot(resid) / h.squaredNorm();
  if (eps_out) *eps_out = eps;
  const double dh = 1.0 / g1 + 1.0 / (1.0 - g1);  // H(1) - H(0)
  const Eigen::VectorXd contrast =
      (q1 - q0).array() + eps * dh;  // Q*(1,W) - Q*(0,W)
  const double psi = contrast.mean();
  Eigen::VectorXd ic =
      h.cwiseProduct(resid - eps * h) + contrast - Eigen::VectorXd::Constant(n, psi);
  return {psi, std::move(ic)};
}

}  // namespace detail

// Endpoint-specific TMLE of the ATE with known propensity. The post-targeting
// influence curve has empirical mean exactly zero.
inline std::pair<double, Eigen::VectorXd> tmle_ate(const TrialDataset& data,
                                                   Eigen::Index endpoint) {
  const OutcomeModel model = fit_outcome_regression(data, endpoint);
  return detail::target_and_ic(data, data.outcomes.col(endpoint), model);
}

inline EndpointFit fit_all_endpoints(const TrialDataset& data) {
  const auto n = data.n();
  const auto k = data.n_endpoints();
  EndpointFit fit;
  fit.est.psi.resize(k);
  fit.est.ic.resize(n, k);
  fit.models.reserve(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    OutcomeModel model = fit_outcome_regression(data, j);
    auto [psi, ic] = detail::target_and_ic(data, data.outcomes.col(j), model);
    fit.est.psi[j] = psi;
    fit.est.ic.col(j) = ic;
    fit.models.push_back(std::move(model));
  }
  const Eigen::RowVectorXd mean = fit.est.ic.colwise().mean();
  const Eigen::MatrixXd centered = fit.est.ic.rowwise() - mean;
  fit.est.rho = centered.transpose() * centered / static_cast<double>(n);
  return fit;
}

inline EndpointEstimates estimate_all_endpoints(const TrialDataset& data) {
  return fit_all_endpoints(data).est;
}

// Composite influence curve at weights alpha: ic * alpha. Its empirical
// variance equals alpha' rho alpha.
inline Eigen::VectorXd composite_ic(const Eigen::Ref<const Eigen::VectorXd>& alpha,
                                    const EndpointEstimates& est) {
  if (alpha.size() != est.ic.cols())
    throw dimension_error("composite_ic: weight length != endpoint count");
  return est.ic * alpha;
}

}  // namespace sctmle
