#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rng.hpp"

namespace potts_abc {

namespace detail {

/// Standard normal upper tail Q(x) = P(X > x), accurate far into either tail.
inline double normal_upper(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Mass of N(0,1) on (a, b), computed on the side of zero that avoids
/// cancellation.
inline double normal_mass(double a, double b) {
  if (a >= 0.0) return normal_upper(a) - normal_upper(b);
  if (b <= 0.0) return normal_upper(-b) - normal_upper(-a);
  return 1.0 - normal_upper(-a) - normal_upper(b);
}

}  // namespace detail

/// Smallest truncation mass accepted before the configuration is rejected.
inline constexpr double kMinTruncationMass = 1e-300;

/// log of Phi((hi - mean)/s) - Phi((lo - mean)/s).
inline double trunc_normal_log_mass(double mean, double s2, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncation bounds must satisfy lo < hi");
  if (!(s2 > 0.0)) throw std::invalid_argument("variance must be positive");
  const double sd = std::sqrt(s2);
  const double mass = detail::normal_mass((lo - mean) / sd, (hi - mean) / sd);
  if (!(mass >= kMinTruncationMass))
    throw std::domain_error("truncated normal has negligible mass on (lo, hi)");
  return std::log(mass);
}

/// log density of N(mean, s2) restricted to (lo, hi).
inline double trunc_normal_logpdf(double x, double mean, double s2, double lo, double hi) {
  if (!(x > lo && x < hi)) throw std::domain_error("x outside truncation support");
  const double d = x - mean;
  return -0.5 * d * d / s2 - 0.5 * std::log(2.0 * std::numbers::pi * s2) -
         trunc_normal_log_mass(mean, s2, lo, hi);
}

/// Inverse-CDF draw from N(mean, s2) restricted to (lo, hi) using a single
/// uniform in (0, 1). The tail on the far side of the mean is inverted
/// through erfc so that one-sided truncations deep in a tail stay accurate.
inline double trunc_normal_quantile(double u, double mean, double s2, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncation bounds must satisfy lo < hi");
  if (!(s2 > 0.0)) throw std::invalid_argument("variance must be positive");
  const double sd = std::sqrt(s2);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  if (!(detail::normal_mass(a, b) >= kMinTruncationMass))
    throw std::domain_error("truncated normal has negligible mass on (lo, hi)");
  double x;
  if (a >= 0.0) {
    // work with upper tails: Q(x) = Q(a) - u (Q(a) - Q(b))
    const double qa = detail::normal_upper(a), qb = detail::normal_upper(b);
    const double q = qa - u * (qa - qb);
    x = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  } else if (b <= 0.0) {
    // mirror: lower tails Phi(x) = Q(-x)
    const double pa = detail::normal_upper(-a), pb = detail::normal_upper(-b);
    const double p = pa + u * (pb - pa);
    x = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  } else {
    const double pa = detail::normal_upper(-a);
    const double p = pa + u * detail::normal_mass(a, b);
    x = p < 0.5 ? -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p)
                : std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
  }
  x = std::clamp(x, a, b);
  double out = mean + sd * x;
  // keep the draw strictly inside the open interval
  if (!(out > lo)) out = std::nextafter(lo, hi);
  if (!(out < hi)) out = std::nextafter(hi, lo);
  return out;
}

template <class URBG>
double trunc_normal_sample(double mean, double s2, double lo, double hi, URBG& rng) {
  return trunc_normal_quantile(to_open_unit(rng()), mean, s2, lo, hi);
}

}  // namespace potts_abc
