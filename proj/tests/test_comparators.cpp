#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "sctmle/comparators.hpp"
#include "sctmle/rng.hpp"
#include "sctmle/stats.hpp"

using namespace sctmle;

TEST_CASE("obrien ols statistic") {
  EndpointEstimates est;
  est.psi = Eigen::Vector2d{1.0, 1.0};
  est.rho = Eigen::Matrix2d::Identity();
  est.ic = Eigen::MatrixXd::Zero(4, 2);

  const ComparatorResult r = obrien_ols_tmle(est, 100, 0.025, 98);
  CHECK(r.statistic == doctest::Approx(14.142135623730951).epsilon(1e-12));
  CHECK(r.reject);

  est.psi.setZero();
  const ComparatorResult r0 = obrien_ols_tmle(est, 100, 0.025, 98);
  CHECK(r0.statistic == 0.0);
  CHECK_FALSE(r0.reject);

  est.rho.setZero();
  CHECK_THROWS_AS(obrien_ols_tmle(est, 100, 0.025, 98), degenerate_variance_error);
}

TEST_CASE("obrien ols with one endpoint is the one-endpoint t decision") {
  EndpointEstimates est;
  est.psi = Eigen::VectorXd::Constant(1, 0.4);
  est.rho = Eigen::MatrixXd::Constant(1, 1, 1.21);
  est.ic = Eigen::MatrixXd::Zero(3, 1);
  const Eigen::Index n = 64;
  const ComparatorResult r = obrien_ols_tmle(est, n, 0.025, 62);
  const double t = std::sqrt(64.0) * 0.4 / 1.1;
  CHECK(r.statistic == doctest::Approx(t).epsilon(1e-14));
  CHECK(r.reject == (t > stats::t_quantile(0.975, 62.0)));
}

TEST_CASE("endpoint p-values") {
  EndpointEstimates est;
  est.psi = Eigen::Vector2d{0.0, 2.0106 / std::sqrt(50.0)};
  est.rho = Eigen::Matrix2d::Identity();
  est.ic = Eigen::MatrixXd::Zero(4, 2);
  const Eigen::VectorXd p = endpoint_pvalues(est, 50, 48);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.025).epsilon(1e-4));

  est.psi[1] = 1e8;
  CHECK(endpoint_pvalues(est, 50, 48)[1] < 1e-12);

  est.rho(0, 0) = 0.0;
  CHECK_THROWS_AS(endpoint_pvalues(est, 50, 48), degenerate_variance_error);
}

TEST_CASE("holm step-down hand cases") {
  const ComparatorResult r1 = holm(Eigen::Vector2d{0.01, 0.04}, 0.025);
  CHECK(r1.reject);  // 0.01 <= 0.0125, then 0.04 > 0.025 stops
  const ComparatorResult r2 = holm(Eigen::Vector2d{1.0, 1.0}, 0.025);
  CHECK_FALSE(r2.reject);
  // Holm must not reject when even the first threshold fails
  CHECK_FALSE(holm(Eigen::Vector2d{0.02, 0.024}, 0.025).reject);
}

TEST_CASE("hochberg step-up hand cases") {
  const ComparatorResult r1 = hochberg(Eigen::Vector2d{0.02, 0.024}, 0.025);
  CHECK(r1.reject);  // largest p 0.024 <= 0.025 rejects both
  CHECK_FALSE(hochberg(Eigen::Vector2d{1.0, 1.0}, 0.025).reject);
}

TEST_CASE("hochberg dominates holm; bonferroni implies holm") {
  RngStream rng(301);
  for (int rep = 0; rep < 10000; ++rep) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.uniform_int(0, 3));
    Eigen::VectorXd p(k);
    for (Eigen::Index j = 0; j < k; ++j)
      p[j] = rng.bernoulli(0.35) ? 0.06 * rng.uniform() : rng.uniform();
    const double gamma = 0.025;
    const bool ho = holm(p, gamma).reject;
    const bool hb = hochberg(p, gamma).reject;
    if (ho) CHECK(hb);
    if ((p.array() <= gamma / static_cast<double>(k)).any()) CHECK(ho);
  }
}

TEST_CASE("rank-sum permutation test") {
  SUBCASE("identical outcomes give statistic 0 and p near 1") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(12, 2, 7.0);
    Eigen::VectorXd arm(12);
    for (int i = 0; i < 12; ++i) arm[i] = i % 2;
    RngStream rng(302);
    const ComparatorResult r = obrien_ranksum(y, arm, 500, 0.025, rng);
    CHECK(r.statistic == doctest::Approx(0.0));
    CHECK(r.p_value == doctest::Approx(1.0));
    CHECK_FALSE(r.reject);
  }

  SUBCASE("complete separation reaches the attainable minimum") {
    // n=10, 5 per arm: exhaustive permutation gives p >= C(10,5)^-1-ish;
    // the Monte Carlo add-one p must land near 1/(n_perm+1) scaled by the
    // chance of redrawing the extreme assignment.
    const int n = 10;
    Eigen::MatrixXd y(n, 2);
    Eigen::VectorXd arm(n);
    for (int i = 0; i < n; ++i) {
      arm[i] = i < 5 ? 1.0 : 0.0;
      y(i, 0) = arm[i] == 1.0 ? 10.0 + i : static_cast<double>(i);
      y(i, 1) = arm[i] == 1.0 ? 20.0 + i : static_cast<double>(i);
    }
    // exhaustive oracle over all C(10,5) = 252 treated subsets
    Eigen::VectorXd comp = midranks(y.col(0)) + midranks(y.col(1));
    const auto mean_diff = [&](unsigned mask) {
      double s1 = 0.0, s0 = 0.0;
      for (int i = 0; i < n; ++i) (mask & (1u << i) ? s1 : s0) += comp[i];
      return s1 / 5.0 - s0 / 5.0;
    };
    double observed = 0.0;
    unsigned obs_mask = 0;
    for (int i = 0; i < 5; ++i) obs_mask |= 1u << i;
    observed = mean_diff(obs_mask);
    int ge = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (__builtin_popcount(mask) != 5) continue;
      ++total;
      if (mean_diff(mask) >= observed) ++ge;
    }
    CHECK(total == 252);
    CHECK(ge == 1);  // the observed assignment is uniquely extreme

    RngStream rng(303);
    const int n_perm = 5000;
    const ComparatorResult r = obrien_ranksum(y, arm, n_perm, 0.025, rng);
    // expected MC exceedances ~ n_perm / 252
    const double expected = (1.0 + n_perm / 252.0) / (n_perm + 1.0);
    CHECK(r.p_value < 3.0 * expected);
    CHECK(r.reject);
  }

  SUBCASE("invariant to strictly monotone per-endpoint transformations") {
    RngStream data_rng(304);
    const int n = 30;
    Eigen::MatrixXd y(n, 2);
    Eigen::VectorXd arm(n);
    for (int i = 0; i < n; ++i) {
      arm[i] = data_rng.bernoulli(0.5) ? 1.0 : 0.0;
      y(i, 0) = data_rng.normal();
      y(i, 1) = data_rng.normal();
    }
    Eigen::MatrixXd ty = y;
    for (int i = 0; i < n; ++i) {
      ty(i, 0) = std::exp(y(i, 0));           // increasing
      ty(i, 1) = std::atan(y(i, 1)) * 3.0;    // increasing
    }
    RngStream r1(305), r2(305);
    const ComparatorResult a = obrien_ranksum(y, arm, 400, 0.025, r1);
    const ComparatorResult b = obrien_ranksum(ty, arm, 400, 0.025, r2);
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
  }

  SUBCASE("single-arm data is rejected") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(6, 2);
    Eigen::VectorXd arm = Eigen::VectorXd::Ones(6);
    RngStream rng(306);
    CHECK_THROWS_AS(obrien_ranksum(y, arm, 100, 0.025, rng), config_error);
  }
}

TEST_CASE("permutation p-value is super-uniform under an exchangeable null") {
  RngStream rng(307);
  const int reps = 1000;
  int hits = 0;
  for (int rep = 0; rep < reps; ++rep) {
    RngStream r = rng.child(static_cast<std::uint64_t>(rep));
    const int n = 30;
    Eigen::MatrixXd y(n, 2);
    Eigen::VectorXd arm(n);
    for (;;) {
      int n1 = 0;
      for (int i = 0; i < n; ++i) {
        arm[i] = r.bernoulli(0.5) ? 1.0 : 0.0;
        n1 += arm[i] == 1.0;
        y(i, 0) = r.normal();
        y(i, 1) = 0.5 * y(i, 0) + r.normal();
      }
      if (n1 > 0 && n1 < n) break;
    }
    RngStream pr = r.child("perm");
    hits += obrien_ranksum(y, arm, 400, 0.025, pr).p_value <= 0.05;
  }
  const double rate = static_cast<double>(hits) / reps;
  CHECK(rate <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / reps));
}

TEST_CASE("midranks") {
  Eigen::VectorXd x(5);
  x << 3.0, 1.0, 3.0, 2.0, 3.0;
  const Eigen::VectorXd r = midranks(x);
  CHECK(r[1] == doctest::Approx(1.0));
  CHECK(r[3] == doctest::Approx(2.0));
  CHECK(r[0] == doctest::Approx(4.0));  // (3+4+5)/3
  CHECK(r[2] == doctest::Approx(4.0));
  CHECK(r[4] == doctest::Approx(4.0));
}
