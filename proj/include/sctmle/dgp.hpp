#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <vector>

#include "sctmle/dataset.hpp"
#include "sctmle/errors.hpp"
#include "sctmle/rng.hpp"
#include "sctmle/stats.hpp"

namespace sctmle {

struct GeneratedTrial {
  TrialDataset dataset;
  Eigen::VectorXd truth;      // true ATE per endpoint implied by the config
  Eigen::MatrixXd baselines;  // study-2 baseline outcomes (empty for study 1)
};

// ---------------------------------------------------------------------------
// Study 1: two continuous endpoints, linear outcome model.
// ---------------------------------------------------------------------------

struct Study1Config {
  Eigen::Index n = 50;
  Eigen::Vector2d beta_a{0.0, 0.0};

  // Fixed coefficients of the outcome model.
  static constexpr double intercept = 1.0;
  static constexpr double beta_w1[2] = {-0.1, -0.05};
  static constexpr double beta_w2[2] = {0.6, 0.3};

  void validate() const {
    if (n < 10) throw config_error("Study1Config: n >= 10 required");
  }
};

inline GeneratedTrial gen_study1(const Study1Config& cfg, RngStream& rng) {
  cfg.validate();
  const auto n = cfg.n;
  const double p_w2 = 1.0 / (1.0 + std::exp(-0.3));  // expit(0.3)
  GeneratedTrial out;
  out.dataset.covariates.resize(n, 2);
  out.dataset.arm.resize(n);
  out.dataset.outcomes.resize(n, 2);
  out.dataset.propensity = 0.5;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w1 = static_cast<double>(rng.uniform_int(5, 18));
    const double w2 = rng.bernoulli(p_w2) ? 1.0 : 0.0;
    const double a = rng.bernoulli(0.5) ? 1.0 : 0.0;
    out.dataset.covariates(i, 0) = w1;
    out.dataset.covariates(i, 1) = w2;
    out.dataset.arm[i] = a;
    for (int k = 0; k < 2; ++k)
      out.dataset.outcomes(i, k) = Study1Config::intercept + cfg.beta_a[k] * a +
                                   Study1Config::beta_w1[k] * w1 +
                                   Study1Config::beta_w2[k] * w2 + rng.normal();
  }
  out.truth = cfg.beta_a;
  return out;
}

// ---------------------------------------------------------------------------
// Truncated normal sampling.
// ---------------------------------------------------------------------------

inline double truncated_normal(double mean, double sd, double lo, double hi,
                               RngStream& rng) {
  if (!(lo < hi)) throw config_error("truncated_normal: lo >= hi");
  if (sd == 0.0) {
    if (mean < lo || mean > hi)
      throw infeasible_truncation_error("truncated_normal: point mass outside range");
    return mean;
  }
  const double mass = stats::norm_cdf((hi - mean) / sd) - stats::norm_cdf((lo - mean) / sd);
  if (mass < 1e-6)
    throw infeasible_truncation_error("truncated_normal: acceptance probability below 1e-6");
  for (;;) {
    const double x = rng.normal(mean, sd);
    if (x >= lo && x <= hi) return x;
  }
}

// ---------------------------------------------------------------------------
// Study 2: trial-calibrated DGP with a five-column centered design.
// ---------------------------------------------------------------------------

enum class Severity { mild, moderate, severe };
enum class Region { na, eu, other };

namespace study2 {

constexpr double age_mean = 15.0, age_sd = 6.0, age_lo = 5.0, age_hi = 31.0;
constexpr double p_sev_mild = 0.31, p_sev_moderate = 0.38, p_sev_severe = 0.31;
constexpr double p_reg_na = 0.40, p_reg_eu = 0.40, p_reg_other = 0.20;

inline double age_population_mean() {
  return stats::truncnorm_mean(age_mean, age_sd, age_lo, age_hi);
}

// Var(X) of the centered design, in closed form: truncated-normal second
// moment for age10; p(1-p) / -p_i p_j for the indicator blocks; independent
// blocks are uncorrelated.
inline Eigen::Matrix<double, 5, 5> design_variance() {
  Eigen::Matrix<double, 5, 5> v = Eigen::Matrix<double, 5, 5>::Zero();
  v(0, 0) = stats::truncnorm_var(age_mean, age_sd, age_lo, age_hi) / 100.0;
  v(1, 1) = p_sev_moderate * (1.0 - p_sev_moderate);
  v(2, 2) = p_sev_severe * (1.0 - p_sev_severe);
  v(1, 2) = v(2, 1) = -p_sev_moderate * p_sev_severe;
  v(3, 3) = p_reg_eu * (1.0 - p_reg_eu);
  v(4, 4) = p_reg_other * (1.0 - p_reg_other);
  v(3, 4) = v(4, 3) = -p_reg_eu * p_reg_other;
  return v;
}

inline Eigen::Matrix<double, 2, 5> baseline_effects() {
  Eigen::Matrix<double, 2, 5> m;
  m << -15, -60, -120, -10, 5,
       -1.5, -6, -12, -1.5, 0.75;
  return m;
}

inline Eigen::Matrix<double, 2, 5> change_effects() {
  Eigen::Matrix<double, 2, 5> m;
  m << -8, -18, -40, -4, 2,
       -1, -5, -10, -0.8, 0.5;
  return m;
}

inline Eigen::Matrix2d target_cov(double sd1, double sd2, double corr) {
  Eigen::Matrix2d s;
  s << sd1 * sd1, corr * sd1 * sd2, corr * sd1 * sd2, sd2 * sd2;
  return s;
}

}  // namespace study2

struct Study2Config {
  Eigen::Index n = 60;
  bool global_null = true;

  Eigen::Vector2d mu_baseline{392.5, 55.45};
  Eigen::Vector2d sd_baseline{107.0, 14.0};
  double corr_baseline = 0.30;
  Eigen::Vector2d mu_change_placebo{7.0, 0.8};
  Eigen::Vector2d sd_change_placebo{54.0, 9.6};
  Eigen::Vector2d mu_change_active{44.0, 3.4};
  Eigen::Vector2d sd_change_active{70.0, 10.0};
  double corr_change = 0.25;

  // 6MWT in [50, 650]; FVC in [20, 80) per the enrollment criterion.
  double walk_lo = 50.0, walk_hi = 650.0;
  double fvc_lo = 20.0, fvc_hi = 80.0;

  void validate() const {
    if (n < 10) throw config_error("Study2Config: n >= 10 required");
    if (n % 2 != 0) throw config_error("Study2Config: n must be even");
  }
};

// Centered design matrix from raw covariates. The age centering constant is
// the closed-form truncated-normal mean of the age distribution.
inline Eigen::MatrixXd centered_design(const Eigen::Ref<const Eigen::VectorXd>& age,
                                       const std::vector<Severity>& severity,
                                       const std::vector<Region>& region) {
  const auto n = age.size();
  if (static_cast<Eigen::Index>(severity.size()) != n ||
      static_cast<Eigen::Index>(region.size()) != n)
    throw dimension_error("centered_design: column lengths disagree");
  const double e_age = study2::age_population_mean();
  Eigen::MatrixXd x(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = (age[i] - e_age) / 10.0;
    x(i, 1) = (severity[i] == Severity::moderate ? 1.0 : 0.0) - study2::p_sev_moderate;
    x(i, 2) = (severity[i] == Severity::severe ? 1.0 : 0.0) - study2::p_sev_severe;
    x(i, 3) = (region[i] == Region::eu ? 1.0 : 0.0) - study2::p_reg_eu;
    x(i, 4) = (region[i] == Region::other ? 1.0 : 0.0) - study2::p_reg_other;
  }
  return x;
}

namespace detail {

// Residual covariance Sigma_target - M Var(X) M'; errors if not PSD.
inline Eigen::Matrix2d residual_cov(const Eigen::Matrix2d& target,
                                    const Eigen::Matrix<double, 2, 5>& effects,
                                    const char* what) {
  const Eigen::Matrix2d resid = target - effects * study2::design_variance() * effects.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(resid);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw config_error(std::string("gen_study2: ") + what +
                       " residual covariance not PSD (min eigenvalue " +
                       std::to_string(eig.eigenvalues().minCoeff()) + ")");
  return resid;
}

inline Eigen::Matrix2d chol2(const Eigen::Matrix2d& s) {
  return Eigen::LLT<Eigen::Matrix2d>(s).matrixL();
}

// Bivariate normal, rejection-sampled against a box.
inline Eigen::Vector2d truncated_bvn(const Eigen::Vector2d& mean,
                                     const Eigen::Matrix2d& chol, double lo1, double hi1,
                                     double lo2, double hi2, bool hi2_open,
                                     RngStream& rng) {
  for (long it = 0; it < 1000000; ++it) {
    Eigen::Vector2d z{rng.normal(), rng.normal()};
    const Eigen::Vector2d x = mean + chol * z;
    const bool ok2 = hi2_open ? (x[1] >= lo2 && x[1] < hi2) : (x[1] >= lo2 && x[1] <= hi2);
    if (x[0] >= lo1 && x[0] <= hi1 && ok2) return x;
  }
  throw infeasible_truncation_error("gen_study2: truncated draw exceeded 1e6 rejections");
}

}  // namespace detail

inline GeneratedTrial gen_study2(const Study2Config& cfg, RngStream& rng) {
  cfg.validate();
  const auto n = cfg.n;

  Eigen::VectorXd age(n);
  std::vector<Severity> severity(n);
  std::vector<Region> region(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    age[i] = truncated_normal(study2::age_mean, study2::age_sd, study2::age_lo,
                              study2::age_hi, rng);
    const double us = rng.uniform();
    severity[i] = us < study2::p_sev_mild ? Severity::mild
                  : us < study2::p_sev_mild + study2::p_sev_moderate ? Severity::moderate
                                                                     : Severity::severe;
    const double ur = rng.uniform();
    region[i] = ur < study2::p_reg_na ? Region::na
                : ur < study2::p_reg_na + study2::p_reg_eu ? Region::eu
                                                           : Region::other;
  }
  const Eigen::MatrixXd x = centered_design(age, severity, region);

  const Eigen::Matrix2d base_resid = detail::residual_cov(
      study2::target_cov(cfg.sd_baseline[0], cfg.sd_baseline[1], cfg.corr_baseline),
      study2::baseline_effects(), "baseline");
  const Eigen::Matrix2d base_chol = detail::chol2(base_resid);
  const Eigen::Matrix<double, 2, 5> mb = study2::baseline_effects();
  Eigen::MatrixXd baselines(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d mu = cfg.mu_baseline + mb * x.row(i).transpose();
    baselines.row(i) = detail::truncated_bvn(mu, base_chol, cfg.walk_lo, cfg.walk_hi,
                                             cfg.fvc_lo, cfg.fvc_hi, /*hi2_open=*/true, rng);
  }

  // Balanced randomization: exactly n/2 per arm via a random permutation.
  std::vector<double> arm_v(n, 0.0);
  for (Eigen::Index i = 0; i < n / 2; ++i) arm_v[i] = 1.0;
  rng.shuffle(arm_v);

  const Eigen::Vector2d mu_active = cfg.global_null ? cfg.mu_change_placebo : cfg.mu_change_active;
  const Eigen::Vector2d sd_active = cfg.global_null ? cfg.sd_change_placebo : cfg.sd_change_active;
  const Eigen::Matrix2d pla_resid = detail::residual_cov(
      study2::target_cov(cfg.sd_change_placebo[0], cfg.sd_change_placebo[1], cfg.corr_change),
      study2::change_effects(), "placebo change");
  const Eigen::Matrix2d act_resid = detail::residual_cov(
      study2::target_cov(sd_active[0], sd_active[1], cfg.corr_change),
      study2::change_effects(), "active change");
  const Eigen::Matrix2d pla_chol = detail::chol2(pla_resid);
  const Eigen::Matrix2d act_chol = detail::chol2(act_resid);
  const Eigen::Matrix<double, 2, 5> md = study2::change_effects();

  GeneratedTrial out;
  out.dataset.covariates = x;
  out.dataset.arm = Eigen::Map<const Eigen::VectorXd>(arm_v.data(), n);
  out.dataset.outcomes.resize(n, 2);
  out.dataset.propensity = 0.5;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool active = arm_v[i] == 1.0;
    const Eigen::Vector2d mu = (active ? mu_active : cfg.mu_change_placebo) +
                               md * x.row(i).transpose();
    Eigen::Vector2d z{rng.normal(), rng.normal()};
    out.dataset.outcomes.row(i) = mu + (active ? act_chol : pla_chol) * z;
  }
  out.baselines = std::move(baselines);
  if (cfg.global_null)
    out.truth = Eigen::Vector2d::Zero();
  else
    out.truth = cfg.mu_change_active - cfg.mu_change_placebo;
  return out;
}

}  // namespace sctmle
