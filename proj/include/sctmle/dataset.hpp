#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <vector>

#include "sctmle/errors.hpp"

namespace sctmle {

// One two-arm trial: covariates W (n x d), arm A in {0,1}, outcomes Y (n x K),
// and the known randomization probability g1 = P(A = 1 | W), constant in W.
struct TrialDataset {
  Eigen::MatrixXd covariates;
  Eigen::VectorXd arm;
  Eigen::MatrixXd outcomes;
  double propensity = 0.5;

  [[nodiscard]] Eigen::Index n() const { return outcomes.rows(); }
  [[nodiscard]] Eigen::Index n_endpoints() const { return outcomes.cols(); }
  [[nodiscard]] Eigen::Index n_covariates() const { return covariates.cols(); }

  void validate() const {
    const Eigen::Index nn = n();
    if (covariates.rows() != nn || arm.size() != nn)
      throw dimension_error("TrialDataset: row counts disagree");
    if (n_endpoints() < 2)
      throw config_error("TrialDataset: need K >= 2 endpoints");
    if (!(propensity > 0.0 && propensity < 1.0))
      throw positivity_error("TrialDataset: propensity outside (0,1)");
    if (!covariates.allFinite() || !outcomes.allFinite() || !arm.allFinite())
      throw config_error("TrialDataset: non-finite entries");
    int n1 = 0;
    for (Eigen::Index i = 0; i < nn; ++i) {
      if (arm[i] != 0.0 && arm[i] != 1.0)
        throw config_error("TrialDataset: arm entries must be 0 or 1");
      n1 += arm[i] == 1.0;
    }
    if (n1 < 2 || nn - n1 < 2)
      throw config_error("TrialDataset: need at least 2 subjects per arm");
  }

  [[nodiscard]] TrialDataset subset(const std::vector<Eigen::Index>& idx) const {
    TrialDataset out;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.covariates.resize(m, covariates.cols());
    out.arm.resize(m);
    out.outcomes.resize(m, outcomes.cols());
    out.propensity = propensity;
    for (Eigen::Index r = 0; r < m; ++r) {
      out.covariates.row(r) = covariates.row(idx[r]);
      out.arm[r] = arm[idx[r]];
      out.outcomes.row(r) = outcomes.row(idx[r]);
    }
    return out;
  }
};

// CSV export: one row per subject (covariates, arm, outcomes), full precision.
inline void write_trial_csv(const TrialDataset& data, std::ostream& os) {
  const auto d = data.n_covariates();
  const auto k = data.n_endpoints();
  for (Eigen::Index j = 0; j < d; ++j) os << "w" << (j + 1) << ",";
  os << "arm";
  for (Eigen::Index j = 0; j < k; ++j) os << ",y" << (j + 1);
  os << "\n";
  const auto old = os.precision(17);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) os << data.covariates(i, j) << ",";
    os << static_cast<int>(data.arm[i]);
    for (Eigen::Index j = 0; j < k; ++j) os << "," << data.outcomes(i, j);
    os << "\n";
  }
  os.precision(old);
}

}  // namespace sctmle
