#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sctmle::stats {

template <typename Real>
Real norm_pdf(Real x) {
  return std::exp(Real(-0.5) * x * x) /
         std::sqrt(Real(2) * Real(3.141592653589793238462643383279502884));
}

template <typename Real>
Real norm_cdf(Real x) {
  return Real(0.5) * std::erfc(-x / std::sqrt(Real(2)));
}

// Regularized incomplete beta I_x(a, b) with the modified Lentz continued
// fraction; see Numerical Recipes ch. 6.4.
template <typename Real>
Real incbeta(Real x, Real a, Real b) {
  if (!(x >= Real(0) && x <= Real(1) && a > Real(0) && b > Real(0)))
    return std::numeric_limits<Real>::quiet_NaN();
  if (x <= Real(0)) return Real(0);
  if (x >= Real(1)) return Real(1);

  const auto cont_frac = [](Real xx, Real aa, Real bb) {
    const Real tiny = Real(1e-300);
    const Real eps = std::numeric_limits<Real>::epsilon() * Real(4);
    Real c = Real(1);
    Real d = Real(1) - (aa + bb) * xx / (aa + Real(1));
    if (std::fabs(d) < tiny) d = tiny;
    d = Real(1) / d;
    Real h = d;
    for (int m = 1; m <= 300; ++m) {
      const Real rm(m);
      Real num = rm * (bb - rm) * xx / ((aa + Real(2) * rm - Real(1)) * (aa + Real(2) * rm));
      d = Real(1) + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = Real(1) + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = Real(1) / d;
      h *= d * c;
      num = -(aa + rm) * (aa + bb + rm) * xx /
            ((aa + Real(2) * rm) * (aa + Real(2) * rm + Real(1)));
      d = Real(1) + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = Real(1) + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = Real(1) / d;
      const Real mult = d * c;
      h *= mult;
      if (std::fabs(mult - Real(1)) < eps) break;
    }
    return h;
  };

  const Real lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const Real front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  if (x < (a + Real(1)) / (a + b + Real(2)))
    return front * cont_frac(x, a, b) / a;
  return Real(1) - std::exp(b * std::log1p(-x) + a * std::log(x) - lbeta) *
                       cont_frac(Real(1) - x, b, a) / b;
}

template <typename Real>
Real t_cdf(Real x, Real df) {
  if (!(df > Real(0))) return std::numeric_limits<Real>::quiet_NaN();
  if (std::isinf(x)) return x > Real(0) ? Real(1) : Real(0);
  const Real ib = incbeta(df / (x * x + df), df / Real(2), Real(0.5));
  return x >= Real(0) ? Real(1) - ib / Real(2) : ib / Real(2);
}

// Upper-tail probability P(T > x), one-sided.
template <typename Real>
Real t_sf(Real x, Real df) {
  if (!(df > Real(0))) return std::numeric_limits<Real>::quiet_NaN();
  if (std::isinf(x)) return x > Real(0) ? Real(0) : Real(1);
  const Real ib = incbeta(df / (x * x + df), df / Real(2), Real(0.5));
  return x >= Real(0) ? ib / Real(2) : Real(1) - ib / Real(2);
}

// Quantile by bisection on t_cdf; the bracket grows until it straddles p.
template <typename Real>
Real t_quantile(Real p, Real df) {
  if (!(df > Real(0)) || !(p > Real(0) && p < Real(1)))
    throw std::invalid_argument("t_quantile: need df > 0 and p in (0,1)");
  if (p == Real(0.5)) return Real(0);
  Real lo = Real(-1), hi = Real(1);
  while (t_cdf(lo, df) > p) lo *= Real(2);
  while (t_cdf(hi, df) < p) hi *= Real(2);
  for (int it = 0; it < 200; ++it) {
    const Real mid = (lo + hi) / Real(2);
    if (mid == lo || mid == hi) break;
    if (t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / Real(2);
}

// Mean of a normal(mean, sd) truncated to [lo, hi].
template <typename Real>
Real truncnorm_mean(Real mean, Real sd, Real lo, Real hi) {
  if (sd == Real(0)) return mean;
  const Real a = (lo - mean) / sd, b = (hi - mean) / sd;
  const Real z = norm_cdf(b) - norm_cdf(a);
  return mean + sd * (norm_pdf(a) - norm_pdf(b)) / z;
}

// Variance of a normal(mean, sd) truncated to [lo, hi].
template <typename Real>
Real truncnorm_var(Real mean, Real sd, Real lo, Real hi) {
  if (sd == Real(0)) return Real(0);
  const Real a = (lo - mean) / sd, b = (hi - mean) / sd;
  const Real z = norm_cdf(b) - norm_cdf(a);
  const Real m = (norm_pdf(a) - norm_pdf(b)) / z;
  return sd * sd * (Real(1) + (a * norm_pdf(a) - b * norm_pdf(b)) / z - m * m);
}

}  // namespace sctmle::stats
