#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "sctmle/errors.hpp"
#include "sctmle/rng.hpp"

namespace sctmle {

// A point on the simplex: nonnegative entries summing to 1 within 1e-12.
struct WeightVector {
  Eigen::VectorXd w;

  WeightVector() = default;
  explicit WeightVector(Eigen::VectorXd v) : w(std::move(v)) { validate(); }

  static WeightVector uniform(Eigen::Index k) {
    return WeightVector(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
  }

  static WeightVector vertex(Eigen::Index k, Eigen::Index j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    v[j] = 1.0;
    return WeightVector(std::move(v));
  }

  [[nodiscard]] Eigen::Index size() const { return w.size(); }

  void validate() const {
    if (w.size() == 0) throw dimension_error("WeightVector: empty");
    if ((w.array() < 0.0).any())
      throw config_error("WeightVector: negative entry");
    if (std::fabs(w.sum() - 1.0) > 1e-12)
      throw config_error("WeightVector: entries do not sum to 1");
  }
};

struct StabilizationConfig {
  WeightVector alpha_ref;
  double c_constant = 0.25;
  int mc_draws = 5000;

  void validate() const {
    alpha_ref.validate();
    if (!(c_constant > 0.0)) throw config_error("StabilizationConfig: C must be > 0");
    if (mc_draws < 1000) throw config_error("StabilizationConfig: B must be >= 1000");
  }
};

struct TrainingFoldSummary {
  WeightVector alpha_adapt;
  double t_star = 0.0;
  double p_value = 1.0;
  WeightVector alpha_stab;
};

// Signal-to-noise ratio (alpha'psi) / sqrt(alpha'rho alpha).
inline double snr(const Eigen::Ref<const Eigen::VectorXd>& alpha,
                  const Eigen::Ref<const Eigen::VectorXd>& psi,
                  const Eigen::Ref<const Eigen::MatrixXd>& rho) {
  if (alpha.size() != psi.size() || rho.rows() != psi.size() ||
      rho.cols() != psi.size())
    throw dimension_error("snr: dimensions disagree");
  const double v = alpha.dot(rho * alpha);
  if (!(v > 0.0)) throw degenerate_variance_error("snr: alpha'rho alpha <= 0");
  return alpha.dot(psi) / std::sqrt(v);
}

inline double snr(const WeightVector& alpha, const Eigen::Ref<const Eigen::VectorXd>& psi,
                  const Eigen::Ref<const Eigen::MatrixXd>& rho) {
  return snr(alpha.w, psi, rho);
}

// Exact maximizer of the signal-to-noise ratio over the simplex.
//
// The ratio is scale-invariant, so any maximizer interior to a face F
// satisfies the unconstrained stationarity rho_F x = c psi_F there; the
// normalized solve rho_F^{-1} psi_F (either sign) is the only interior
// candidate per face. Enumerating all faces, the vertices, and the
// reference point covers every possible argmax. Face factorizations are
// cached so repeated maximize() calls (the Monte Carlo null loop) stay cheap.
//
// Ties within 1e-12 break toward the candidate closest to alpha_ref in
// Euclidean distance, then lexicographically smallest.
class SimplexSnrMaximizer {
 public:
  SimplexSnrMaximizer(Eigen::MatrixXd rho, Eigen::VectorXd alpha_ref)
      : rho_(std::move(rho)), ref_(std::move(alpha_ref)), k_(rho_.rows()) {
    if (rho_.cols() != k_ || ref_.size() != k_)
      throw dimension_error("SimplexSnrMaximizer: dimensions disagree");
    if (k_ > 20)
      throw config_error("SimplexSnrMaximizer: face enumeration needs K <= 20");
    if (!rho_.allFinite())
      throw covariance_error("SimplexSnrMaximizer: non-finite covariance");
    const std::uint32_t n_masks = (1u << k_);
    for (std::uint32_t mask = 1; mask < n_masks; ++mask) {
      Face face;
      for (Eigen::Index j = 0; j < k_; ++j)
        if (mask & (1u << j)) face.idx.push_back(j);
      const auto m = static_cast<Eigen::Index>(face.idx.size());
      if (m == 1) {
        face.solvable = false;  // singleton faces are the vertices below
      } else {
        Eigen::MatrixXd sub(m, m);
        for (Eigen::Index r = 0; r < m; ++r)
          for (Eigen::Index c = 0; c < m; ++c)
            sub(r, c) = rho_(face.idx[r], face.idx[c]);
        face.ldlt.compute(sub);
        face.solvable = face.ldlt.info() == Eigen::Success &&
                        face.ldlt.isPositive() &&
                        sub.diagonal().minCoeff() > 0.0;
      }
      if (face.solvable) faces_.push_back(std::move(face));
    }
  }

  // Argmax over the simplex of x'psi / sqrt(x'rho x), plus the max value.
  [[nodiscard]] std::pair<Eigen::VectorXd, double> maximize(
      const Eigen::Ref<const Eigen::VectorXd>& psi) const {
    if (psi.size() != k_) throw dimension_error("maximize: psi length != K");
    Eigen::VectorXd best;
    double best_val = -std::numeric_limits<double>::infinity();
    bool any = false;

    Eigen::VectorXd cand(k_);
    const auto consider = [&](const Eigen::VectorXd& a) {
      const double v = a.dot(rho_ * a);
      if (!(v > 0.0)) return;
      const double val = a.dot(psi) / std::sqrt(v);
      if (!std::isfinite(val)) return;
      if (!any || val > best_val + kTieTol) {
        best = a;
        best_val = val;
        any = true;
      } else if (val > best_val - kTieTol) {
        // tie: prefer closer to the reference, then lexicographically smaller
        const double da = (a - ref_).squaredNorm();
        const double db = (best - ref_).squaredNorm();
        if (da < db - 1e-15) {
          best = a;
          best_val = std::max(best_val, val);
        } else if (std::fabs(da - db) <= 1e-15 && lex_less(a, best)) {
          best = a;
          best_val = std::max(best_val, val);
        }
      }
    };

    for (const auto& face : faces_) {
      const auto m = static_cast<Eigen::Index>(face.idx.size());
      Eigen::VectorXd sub_psi(m);
      for (Eigen::Index r = 0; r < m; ++r) sub_psi[r] = psi[face.idx[r]];
      const Eigen::VectorXd y = face.ldlt.solve(sub_psi);
      const double s = y.sum();
      if (s == 0.0 || !y.allFinite()) continue;
      cand.setZero();
      bool ok = true;
      for (Eigen::Index r = 0; r < m; ++r) {
        const double a = y[r] / s;
        if (a < -1e-12) {
          ok = false;
          break;
        }
        cand[face.idx[r]] = std::max(a, 0.0);
      }
      if (!ok) continue;
      const double total = cand.sum();
      if (!(total > 0.0)) continue;
      cand /= total;
      consider(cand);
    }
    for (Eigen::Index j = 0; j < k_; ++j) {
      cand.setZero();
      cand[j] = 1.0;
      consider(cand);
    }
    consider(ref_);

    if (!any)
      throw degenerate_variance_error(
          "SimplexSnrMaximizer: no candidate with positive variance");
    return {std::move(best), best_val};
  }

 private:
  static constexpr double kTieTol = 1e-12;

  static bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a[i] < b[i]) return true;
      if (a[i] > b[i]) return false;
    }
    return false;
  }

  struct Face {
    std::vector<Eigen::Index> idx;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    bool solvable = false;
  };

  Eigen::MatrixXd rho_;
  Eigen::VectorXd ref_;
  Eigen::Index k_;
  std::vector<Face> faces_;
};

// Argmax of snr over the simplex and the maximized (unit-scale) value.
// The caller scales by sqrt(training dof) to form the fold statistic.
inline std::pair<WeightVector, double> optimize_weights(
    const Eigen::Ref<const Eigen::VectorXd>& psi,
    const Eigen::Ref<const Eigen::MatrixXd>& rho) {
  if (!psi.allFinite() || !rho.allFinite())
    throw config_error("optimize_weights: non-finite inputs");
  SimplexSnrMaximizer opt(rho, Eigen::VectorXd::Constant(
                                   psi.size(), 1.0 / static_cast<double>(psi.size())));
  auto [alpha, val] = opt.maximize(psi);
  return {WeightVector(std::move(alpha)), val};
}

inline std::pair<WeightVector, double> optimize_weights(
    const Eigen::Ref<const Eigen::VectorXd>& psi,
    const Eigen::Ref<const Eigen::MatrixXd>& rho, const WeightVector& alpha_ref) {
  if (!psi.allFinite() || !rho.allFinite())
    throw config_error("optimize_weights: non-finite inputs");
  SimplexSnrMaximizer opt(rho, alpha_ref.w);
  auto [alpha, val] = opt.maximize(psi);
  return {WeightVector(std::move(alpha)), val};
}

namespace detail {

// Standardize a covariance to correlation scale and factor it for sampling,
// clipping negative eigenvalues at zero. Errors if the matrix is materially
// indefinite. Working on the correlation makes the Monte Carlo p-value
// exactly invariant to per-endpoint rescaling of the input.
inline Eigen::MatrixXd correlation_factor(const Eigen::Ref<const Eigen::MatrixXd>& rho,
                                          Eigen::VectorXd& sd_out) {
  const auto k = rho.rows();
  if (rho.cols() != k) throw dimension_error("correlation_factor: not square");
  sd_out.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(rho(j, j) > 0.0))
      throw covariance_error("supremum_null_pvalue: nonpositive diagonal");
    sd_out[j] = std::sqrt(rho(j, j));
  }
  Eigen::MatrixXd corr(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) corr(r, c) = rho(r, c) / (sd_out[r] * sd_out[c]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success)
    throw covariance_error("supremum_null_pvalue: eigendecomposition failed");
  Eigen::VectorXd vals = eig.eigenvalues();
  const double floor = -1e-6 * corr.trace();
  if (vals.minCoeff() < floor)
    throw covariance_error("supremum_null_pvalue: covariance not PSD (min eigenvalue " +
                           std::to_string(vals.minCoeff()) + ")");
  for (Eigen::Index j = 0; j < k; ++j) vals[j] = std::max(vals[j], 0.0);
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
}

}  // namespace detail

// Monte Carlo p-value of the supremum statistic: draw Z_b ~ N(0, rho),
// S_b = sup over the simplex of alpha'Z_b / sqrt(alpha'rho alpha), and
// return (1 + #{S_b >= t_star}) / (B + 1). Ties count as exceedances.
inline double supremum_null_pvalue(double t_star,
                                   const Eigen::Ref<const Eigen::MatrixXd>& rho,
                                   const StabilizationConfig& cfg, RngStream& rng) {
  cfg.validate();
  const auto k = rho.rows();
  Eigen::VectorXd sd;
  const Eigen::MatrixXd factor = detail::correlation_factor(rho, sd);
  Eigen::MatrixXd corr = factor * factor.transpose();
  // Restore exact unit diagonal lost to the eigen clip, if any.
  for (Eigen::Index j = 0; j < k; ++j) corr(j, j) = 1.0;
  SimplexSnrMaximizer opt(corr, Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));

  long count = 0;
  Eigen::VectorXd xi(k), z(k);
  for (int b = 0; b < cfg.mc_draws; ++b) {
    for (Eigen::Index j = 0; j < k; ++j) xi[j] = rng.normal();
    z.noalias() = factor * xi;
    const double s = opt.maximize(z).second;
    if (s >= t_star) ++count;
  }
  return static_cast<double>(1 + count) / static_cast<double>(cfg.mc_draws + 1);
}

// Shrinkage toward the reference: lambda = min(1, C ln(n) p), convex blend.
inline WeightVector stabilize(const WeightVector& alpha_adapt, double p_value,
                              Eigen::Index n, const StabilizationConfig& cfg) {
  cfg.validate();
  if (!(p_value > 0.0 && p_value <= 1.0))
    throw config_error("stabilize: p-value outside (0,1]");
  if (n < 2) throw config_error("stabilize: n < 2");
  const double lambda =
      std::min(1.0, cfg.c_constant * std::log(static_cast<double>(n)) * p_value);
  Eigen::VectorXd w =
      (1.0 - lambda) * alpha_adapt.w + lambda * cfg.alpha_ref.w;
  return WeightVector(std::move(w));
}

}  // namespace sctmle
