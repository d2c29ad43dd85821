#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sctmle/rng.hpp"
#include "sctmle/weights.hpp"

using namespace sctmle;

namespace {

std::pair<Eigen::VectorXd, double> grid_oracle(const Eigen::Vector2d& psi,
                                               const Eigen::Matrix2d& rho) {
  Eigen::VectorXd best(2);
  double best_val = -1e300;
  for (long t = 0; t <= 10000; ++t) {
    const double a1 = static_cast<double>(t) / 10000.0;
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

Eigen::MatrixXd random_spd(RngStream& rng, Eigen::Index k) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) l(i, j) = 0.4 * rng.normal();
    l(i, i) = 0.3 + rng.uniform();
  }
  return l * l.transpose();
}

}  // namespace

TEST_CASE("weight vector invariants") {
  CHECK_THROWS_AS(WeightVector(Eigen::Vector2d{0.6, 0.6}), config_error);
  CHECK_THROWS_AS(WeightVector(Eigen::Vector2d{1.2, -0.2}), config_error);
  CHECK(WeightVector::uniform(4).w.sum() == doctest::Approx(1.0));
  CHECK(WeightVector::vertex(3, 2).w[2] == 1.0);
}

TEST_CASE("snr closed forms") {
  Eigen::Vector2d psi{1.0, 1.0};
  Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  CHECK(snr(Eigen::Vector2d{0.5, 0.5}, psi, eye) ==
        doctest::Approx(1.4142135623730951).epsilon(1e-14));
  // vertex reduces to the endpoint ratio
  Eigen::Matrix2d rho;
  rho << 4.0, 1.0, 1.0, 9.0;
  CHECK(snr(WeightVector::vertex(2, 1), Eigen::Vector2d{3.0, 6.0}, rho) ==
        doctest::Approx(2.0));
  // null numerator
  CHECK(snr(Eigen::Vector2d{0.3, 0.7}, Eigen::Vector2d{0.0, 0.0}, rho) == 0.0);
  CHECK_THROWS_AS(snr(Eigen::Vector2d{0.5, 0.5}, psi, Eigen::Matrix2d::Zero()),
                  degenerate_variance_error);
}

TEST_CASE("optimize_weights closed cases") {
  Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();

  SUBCASE("exchangeable endpoints split evenly") {
    const auto [a, v] = optimize_weights(Eigen::Vector2d{1.0, 1.0}, eye);
    CHECK(a.w[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("opposite-signed effect concentrates on the positive endpoint") {
    const auto [a, v] = optimize_weights(Eigen::Vector2d{1.0, -1.0}, eye);
    CHECK(a.w[0] == doctest::Approx(1.0));
    CHECK(a.w[1] == doctest::Approx(0.0));
  }
  SUBCASE("correlated case matches the grid oracle") {
    Eigen::Matrix2d rho;
    rho << 1.0, 0.3, 0.3, 1.0;
    const auto [a, v] = optimize_weights(Eigen::Vector2d{0.8, 0.2}, rho);
    const auto [ga, gv] = grid_oracle({0.8, 0.2}, rho);
    CHECK((a.w - ga).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(v == doctest::Approx(gv).epsilon(1e-6));
  }
}

TEST_CASE("optimizer beats the grid oracle on random problems") {
  RngStream rng(71);
  for (int rep = 0; rep < 100; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    Eigen::Vector2d psi{r.normal(), r.normal()};
    const Eigen::Matrix2d rho = random_spd(r, 2);
    const auto [a, v] = optimize_weights(psi, rho);
    const auto [ga, gv] = grid_oracle(psi, rho);
    CHECK((a.w - ga).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(v >= gv - 1e-9);
  }
}

TEST_CASE("optimum dominates vertices and the reference") {
  RngStream rng(72);
  for (int rep = 0; rep < 200; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(r.uniform_int(0, 2));
    Eigen::VectorXd psi(k);
    for (Eigen::Index j = 0; j < k; ++j) psi[j] = r.normal();
    const Eigen::MatrixXd rho = random_spd(r, k);
    const WeightVector ref = WeightVector::uniform(k);
    const auto [a, v] = optimize_weights(psi, rho, ref);
    CHECK(a.w.minCoeff() >= 0.0);
    CHECK(std::fabs(a.w.sum() - 1.0) <= 1e-12);
    for (Eigen::Index j = 0; j < k; ++j)
      CHECK(v >= snr(WeightVector::vertex(k, j), psi, rho) - 1e-9);
    CHECK(v >= snr(ref, psi, rho) - 1e-9);
  }
}

TEST_CASE("argmax is invariant to positive rescaling of psi or rho") {
  RngStream rng(73);
  for (int rep = 0; rep < 50; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    Eigen::VectorXd psi(3);
    for (int j = 0; j < 3; ++j) psi[j] = r.normal();
    const Eigen::MatrixXd rho = random_spd(r, 3);
    const double c = 0.1 + 5.0 * r.uniform();
    const auto [a0, v0] = optimize_weights(psi, rho);
    const auto [a1, v1] = optimize_weights((c * psi).eval(), rho);
    const auto [a2, v2] = optimize_weights(psi, (c * rho).eval());
    CHECK((a0.w - a1.w).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((a0.w - a2.w).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("identical endpoints tie-break to the reference") {
  Eigen::Matrix2d rho;
  rho << 2.0, 2.0, 2.0, 2.0;  // one endpoint duplicated
  const auto [a, v] = optimize_weights(Eigen::Vector2d{1.0, 1.0}, rho);
  CHECK(a.w[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("supremum p-value limits and oracle") {
  StabilizationConfig cfg;
  cfg.alpha_ref = WeightVector::uniform(2);
  cfg.mc_draws = 5000;
  const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();

  SUBCASE("infinite thresholds") {
    RngStream r1(81), r2(82);
    CHECK(supremum_null_pvalue(std::numeric_limits<double>::infinity(), eye, cfg, r1) ==
          doctest::Approx(1.0 / 5001.0));
    CHECK(supremum_null_pvalue(-std::numeric_limits<double>::infinity(), eye, cfg, r2) ==
          doctest::Approx(1.0));
  }

  SUBCASE("matches a closed-form Monte Carlo oracle at K=2, identity covariance") {
    // sup over the nonnegative cone: ||z+|| if any z > 0, else max z
    RngStream orng(83);
    const int big = 1000000;
    long count = 0;
    const double t_star = 1.96;
    for (int b = 0; b < big; ++b) {
      const double z1 = orng.normal(), z2 = orng.normal();
      double s;
      if (z1 > 0.0 || z2 > 0.0)
        s = std::sqrt(std::max(z1, 0.0) * std::max(z1, 0.0) +
                      std::max(z2, 0.0) * std::max(z2, 0.0));
      else
        s = std::max(z1, z2);
      if (s >= t_star) ++count;
    }
    const double oracle = static_cast<double>(count) / big;
    RngStream r(84);
    const double p = supremum_null_pvalue(t_star, eye, cfg, r);
    const double se = std::sqrt(oracle * (1.0 - oracle) / cfg.mc_draws);
    CHECK(std::fabs(p - oracle) < 3.0 * se + 3.0 * std::sqrt(oracle * (1 - oracle) / big));
  }

  SUBCASE("monotone nonincreasing in t_star on the same stream") {
    Eigen::Matrix2d rho;
    rho << 4.0, -0.5, -0.5, 2.0;
    RngStream base(85);
    double prev = 2.0;
    for (const double t : {-2.0, -0.5, 0.0, 0.7, 1.3, 2.1, 3.0}) {
      RngStream s = base;
      const double p = supremum_null_pvalue(t, rho, cfg, s);
      CHECK(p <= prev);
      prev = p;
    }
  }

  SUBCASE("invariant to per-endpoint rescaling") {
    Eigen::Matrix2d corr;
    corr << 1.0, 0.35, 0.35, 1.0;
    // power-of-two scaling: exact arithmetic, bitwise-equal p
    Eigen::DiagonalMatrix<double, 2> d(4.0, 0.25);
    const Eigen::Matrix2d cov = d * corr * d;
    RngStream r1(86), r2(86);
    const double p_corr = supremum_null_pvalue(1.7, corr, cfg, r1);
    const double p_cov = supremum_null_pvalue(1.7, cov, cfg, r2);
    CHECK(p_corr == p_cov);
    // arbitrary scaling: equal up to Monte Carlo count granularity
    Eigen::DiagonalMatrix<double, 2> d2(1.7, 0.03);
    const Eigen::Matrix2d cov2 = d2 * corr * d2;
    RngStream r3(86);
    const double p_cov2 = supremum_null_pvalue(1.7, cov2, cfg, r3);
    CHECK(std::fabs(p_cov2 - p_corr) <= 2.0 / (cfg.mc_draws + 1.0));
  }

  SUBCASE("materially indefinite covariance raises") {
    Eigen::Matrix2d bad;
    bad << 1.0, 2.0, 2.0, 1.0;
    RngStream r(87);
    CHECK_THROWS_AS(supremum_null_pvalue(1.0, bad, cfg, r), covariance_error);
  }
}

TEST_CASE("stabilize") {
  StabilizationConfig cfg;
  cfg.alpha_ref = WeightVector::uniform(2);
  cfg.c_constant = 0.25;
  cfg.mc_draws = 1000;
  const WeightVector adapt = WeightVector::vertex(2, 0);

  SUBCASE("truncation collapses exactly to the reference") {
    const WeightVector s = stabilize(adapt, 1.0, 1000000, cfg);
    CHECK(s.w[0] == 0.5);
    CHECK(s.w[1] == 0.5);
  }
  SUBCASE("vanishing p keeps the adaptive weights") {
    const double p = 1.0 / 5001.0;
    const WeightVector s = stabilize(adapt, p, 50, cfg);
    const double lambda = 0.25 * std::log(50.0) * p;
    CHECK(s.w[0] == doctest::Approx(1.0 - 0.5 * lambda).epsilon(1e-14));
    CHECK((s.w - adapt.w).cwiseAbs().maxCoeff() <= lambda);
  }
  SUBCASE("frozen arithmetic at n=50, C=0.25, p=0.5") {
    const WeightVector s = stabilize(adapt, 0.5, 50, cfg);
    CHECK(0.25 * std::log(50.0) * 0.5 ==
          doctest::Approx(0.48900287567851825).epsilon(1e-15));
    CHECK(s.w[0] == doctest::Approx(0.7554985621607408).epsilon(1e-14));
    CHECK(s.w[1] == doctest::Approx(0.24450143783925912).epsilon(1e-14));
  }
  SUBCASE("rejects bad inputs") {
    CHECK_THROWS_AS(stabilize(adapt, 0.0, 50, cfg), config_error);
    CHECK_THROWS_AS(stabilize(adapt, 0.5, 1, cfg), config_error);
  }
}
