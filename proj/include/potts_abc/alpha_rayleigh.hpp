#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "parallel.hpp"
#include "rng.hpp"

namespace potts_abc {

/// Raised when the oscillatory quadrature fails to reach its tolerance.
class QuadratureError : public std::runtime_error {
public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved_tolerance() const noexcept { return achieved_; }

private:
  double achieved_;
};

struct HankelTolerance {
  double absolute = 1e-15;
  double relative = 1e-12;
  std::size_t max_intervals = 100000;
};

namespace detail {

/// m-th positive zero of J0 (1-based).
inline double j0_zero(std::size_t m) {
  constexpr std::size_t kCached = 4096;
  static const std::vector<double> zeros = [] {
    std::vector<double> z(kCached);
    boost::math::cyl_bessel_j_zero(0.0, 1, static_cast<unsigned>(kCached), z.begin());
    return z;
  }();
  if (m >= 1 && m <= kCached) return zeros[m - 1];
  // McMahon expansion, relative error far below 1e-16 at this order
  const double b = (static_cast<double>(m) - 0.25) * std::numbers::pi;
  const double e = 8.0 * b;
  return b + 1.0 / e - 124.0 / (3.0 * e * e * e) + 120928.0 / (15.0 * std::pow(e, 5));
}

/// Last entry of Wynn's epsilon table built from the given partial sums.
inline double wynn_epsilon(const std::vector<double>& sums) {
  const std::size_t n = sums.size();
  if (n < 3) return sums.back();
  const std::size_t len = (n % 2 == 1) ? n : n - 1;  // odd count ends on an even column
  std::vector<double> prev(len + 1, 0.0);  // column k-1
  std::vector<double> cur(sums.end() - static_cast<std::ptrdiff_t>(len), sums.end());
  double best = sums.back();  // newest entry of the latest even column
  for (std::size_t k = 1; k < len; ++k) {
    std::vector<double> next(cur.size() - 1);
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      const double diff = cur[i + 1] - cur[i];
      if (diff == 0.0) return best;
      next[i] = prev[i + 1] + 1.0 / diff;
    }
    prev = std::move(cur);
    cur = std::move(next);
    if (k % 2 == 0) best = cur.back();
  }
  return cur.front();
}

/// Log of the tail integral of lambda * exp(-lambda^alpha) beyond lam, an
/// upper bound on the remaining Hankel integrand. Computed from the
/// regularized incomplete gamma so small alpha does not overflow.
inline double log_hankel_envelope_tail(double lam, double alpha) {
  const double a = 2.0 / alpha;
  return std::log(boost::math::gamma_q(a, std::pow(lam, alpha))) + std::lgamma(a) -
         std::log(alpha);
}

/// Gauss-Kronrod on [a, b], bisected until the error estimate meets an
/// absolute or relative bound. Pieces whose value sits at roundoff level stop
/// on the absolute bound instead of recursing to the depth limit.
template <class F>
double kronrod_interval(const F& f, double a, double b, double abs_tol, int depth = 8) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  double err = 0.0;
  const double v = Rule::integrate(f, a, b, 0, 0.0, &err);
  if (depth == 0 || err <= std::max(abs_tol, 1e-14 * std::abs(v))) return v;
  const double mid = 0.5 * (a + b);
  return kronrod_interval(f, a, mid, abs_tol, depth - 1) +
         kronrod_interval(f, mid, b, abs_tol, depth - 1);
}

/// I(s) = int_0^inf lambda exp(-lambda^alpha) J0(s lambda) d lambda.
///
/// The range is split at the zeros of J0(s lambda); each piece is integrated
/// with adaptive Gauss-Kronrod and the alternating partial sums are
/// accelerated with Wynn's epsilon algorithm. The sum stops when the
/// extrapolated value is stable or the remaining envelope is negligible.
inline double hankel_integral(double s, double alpha, const HankelTolerance& tol = {}) {
  if (!(alpha > 0.0) || alpha > 2.0) throw std::domain_error("alpha must lie in (0, 2]");
  if (!(s >= 0.0)) throw std::domain_error("radius must be nonnegative");
  auto f = [s, alpha](double lam) {
    return lam * std::exp(-std::pow(lam, alpha)) * boost::math::cyl_bessel_j(0, s * lam);
  };
  // Past lam_cut the envelope is below the absolute tolerance.
  double lam_cut = std::pow(30.0, 1.0 / alpha);
  const double log_cut_tol = std::log(0.1 * tol.absolute);
  while (log_hankel_envelope_tail(lam_cut, alpha) > log_cut_tol) lam_cut *= 1.1;

  if (s == 0.0) return std::exp(std::lgamma(2.0 / alpha) - std::log(alpha));

  double sum = 0.0;
  double a = 0.0;
  std::vector<double> partial;
  std::vector<double> estimates;
  for (std::size_t m = 1; m <= tol.max_intervals; ++m) {
    double b = j0_zero(m) / s;
    const bool last = b >= lam_cut;
    if (last) b = lam_cut;
    sum += kronrod_interval(f, a, b, 0.01 * tol.absolute);
    if (last) return sum;
    partial.push_back(sum);
    if (partial.size() > 41) partial.erase(partial.begin(), partial.begin() + 2);
    if (m >= 8) {
      estimates.push_back(wynn_epsilon(partial));
      const auto e = estimates.size();
      if (e >= 3) {
        const double x = estimates[e - 1];
        const double limit = std::max(tol.absolute, tol.relative * std::abs(x));
        if (std::abs(x - estimates[e - 2]) < limit && std::abs(x - estimates[e - 3]) < limit)
          return x;
      }
    }
    a = b;
  }
  const double achieved = estimates.size() >= 2
                              ? std::abs(estimates.back() - estimates[estimates.size() - 2])
                              : std::abs(sum);
  throw QuadratureError("alpha-Rayleigh Hankel integral did not converge", achieved);
}

/// Large-radius expansion of the standardized density,
///   p(s) ~ sum_k c_k s^(-1 - alpha k),
///   c_k = (-1)^(k+1) 2^(1+alpha k) Gamma(1+alpha k/2)^2 sin(pi alpha k/2) / (pi k!).
/// Returns nothing unless the truncated series is accurate to `rel_tol`.
inline std::optional<double> tail_series(double s, double alpha, double rel_tol = 1e-13) {
  if (!(alpha > 0.0) || alpha >= 2.0 || !(s > 0.0)) return std::nullopt;
  const double ls = std::log(s);
  double sum = 0.0;
  double prev_env = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 400; ++k) {
    const double ak = alpha * k;
    const double log_env = (1.0 + ak) * std::numbers::ln2 + 2.0 * std::lgamma(1.0 + 0.5 * ak) -
                           std::lgamma(k + 1.0) - std::log(std::numbers::pi) - (1.0 + ak) * ls;
    const double env = std::exp(log_env);
    if (k > 2 && env > prev_env) break;  // asymptotic series started to diverge
    const double sgn = (k % 2 == 1) ? 1.0 : -1.0;
    sum += sgn * env * std::sin(0.5 * std::numbers::pi * ak);
    if (sum > 0.0 && env < rel_tol * sum) return sum;
    prev_env = env;
  }
  return std::nullopt;
}

/// Tail mass int_s^inf p(t) dt from the same expansion.
inline std::optional<double> tail_mass_series(double s, double alpha, double rel_tol = 1e-12) {
  if (!(alpha > 0.0) || alpha >= 2.0 || !(s > 0.0)) return std::nullopt;
  const double ls = std::log(s);
  double sum = 0.0;
  double prev_env = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 400; ++k) {
    const double ak = alpha * k;
    const double log_env = (1.0 + ak) * std::numbers::ln2 + 2.0 * std::lgamma(1.0 + 0.5 * ak) -
                           std::lgamma(k + 1.0) - std::log(std::numbers::pi) - ak * ls -
                           std::log(ak);
    const double env = std::exp(log_env);
    if (k > 2 && env > prev_env) break;
    const double sgn = (k % 2 == 1) ? 1.0 : -1.0;
    sum += sgn * env * std::sin(0.5 * std::numbers::pi * ak);
    if (sum > 0.0 && env < rel_tol * sum) return sum;
    prev_env = env;
  }
  return std::nullopt;
}

/// Power series from expanding J0 under the integral,
///   p(s) = s sum_k (-1)^k Gamma((2k+2)/alpha) / (alpha k!^2) (s/2)^(2k),
/// convergent for alpha > 1. Returns nothing when cancellation between terms
/// would cost more than four digits or the terms do not settle.
inline std::optional<double> small_radius_series(double s, double alpha) {
  if (!(alpha > 1.0) || !(s > 0.0)) return std::nullopt;
  const double l2 = 2.0 * std::log(0.5 * s);
  const double la = std::log(alpha);
  double sum = 0.0, largest = 0.0, prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 500; ++k) {
    const double term = std::exp(std::lgamma((2.0 * k + 2.0) / alpha) - la -
                                 2.0 * std::lgamma(k + 1.0) + k * l2);
    largest = std::max(largest, term);
    sum += (k % 2 == 0) ? term : -term;
    if (term < prev && term <= 1e-17 * std::abs(sum)) {
      if (!(sum > 0.0) || largest > 1e4 * sum) return std::nullopt;
      return s * sum;
    }
    prev = term;
  }
  return std::nullopt;
}

/// Radius below which the power series is tried before quadrature.
inline constexpr double kPowerSeriesRadius = 4.0;

/// Radius beyond which the expansion is tried before quadrature.
inline constexpr double kSeriesRadius = 20.0;

/// Radius beyond which the alpha = 2 density is taken in closed form; past it
/// the Gaussian core sinks below quadrature roundoff.
inline constexpr double kRayleighRadius = 6.0;

inline bool is_rayleigh(double alpha) { return alpha >= 2.0 - 1e-12; }

/// Standardized (gamma = 1) density p(s | alpha).
inline double standard_pdf(double s, double alpha, const HankelTolerance& tol = {}) {
  if (!(s > 0.0)) return 0.0;
  if (is_rayleigh(alpha) && s >= kRayleighRadius) return 0.5 * s * std::exp(-0.25 * s * s);
  if (s >= kSeriesRadius)
    if (auto v = tail_series(s, alpha)) return *v;
  if (s <= kPowerSeriesRadius)
    if (auto v = small_radius_series(s, alpha)) return *v;
  return std::max(0.0, s * hankel_integral(s, alpha, tol));
}

}  // namespace detail

/// alpha-Rayleigh density
///   p(r | alpha, gamma) = r int_0^inf lambda exp[-(gamma lambda)^alpha] J0(r lambda) d lambda,
/// evaluated as p(r/gamma | alpha, 1) / gamma.
inline double alpha_rayleigh_pdf(double r, double alpha, double gamma_scale,
                                 const HankelTolerance& tol = {}) {
  if (!(r > 0.0)) throw std::domain_error("alpha_rayleigh_pdf: r must be positive");
  if (!(alpha > 0.0) || alpha > 2.0)
    throw std::domain_error("alpha_rayleigh_pdf: alpha must lie in (0, 2]");
  if (!(gamma_scale > 0.0)) throw std::domain_error("alpha_rayleigh_pdf: gamma must be positive");
  return detail::standard_pdf(r / gamma_scale, alpha, tol) / gamma_scale;
}

/// Standardized log-density of one alpha on a log-spaced radius grid.
///
/// Inside [s_min, s_max] values come from a cubic B-spline in (log s, log p);
/// below it the two-term small-radius expansion is used and above it the
/// density is evaluated directly.
class AlphaRayleighTable {
public:
  static constexpr double kMinRadius = 1e-4;
  static constexpr double kMaxRadius = 1e3;

  explicit AlphaRayleighTable(double alpha, std::size_t points = 512) : alpha_(alpha) {
    if (!(alpha > 0.0) || alpha > 2.0) throw std::domain_error("alpha must lie in (0, 2]");
    rayleigh_ = detail::is_rayleigh(alpha);
    log_c0_ = std::lgamma(2.0 / alpha) - std::log(alpha);
    // p(s) ~ c0 s (1 - q s^2); q = Gamma(4/alpha) / (4 Gamma(2/alpha))
    log_q_ = std::lgamma(4.0 / alpha) - std::lgamma(2.0 / alpha) - std::log(4.0);
    if (rayleigh_) return;
    x0_ = std::log(kMinRadius);
    h_ = (std::log(kMaxRadius) - x0_) / static_cast<double>(points - 1);
    std::vector<double> values(points);
    const auto count = static_cast<std::ptrdiff_t>(points);
    detail::ParallelErrors errors;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      errors.run([&] {
        const double s = std::exp(x0_ + h_ * static_cast<double>(i));
        values[static_cast<std::size_t>(i)] = std::log(detail::standard_pdf(s, alpha));
      });
    }
    errors.rethrow();
    spline_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        values.begin(), values.end(), x0_, h_);
    x1_ = x0_ + h_ * static_cast<double>(points - 1);
  }

  double alpha() const noexcept { return alpha_; }

  /// log p(s | alpha, gamma = 1).
  double log_pdf_standard(double s) const {
    if (rayleigh_) return std::log(0.5 * s) - 0.25 * s * s;
    const double x = std::log(s);
    if (x < x0_) {
      const double q_s2 = std::exp(log_q_ + 2.0 * x);
      if (q_s2 < 1e-3) return log_c0_ + x + std::log1p(-q_s2);
      return std::log(detail::standard_pdf(s, alpha_));
    }
    if (x > x1_) return std::log(detail::standard_pdf(s, alpha_));
    return (*spline_)(x);
  }

  /// log p(r | alpha, gamma).
  double log_pdf(double r, double gamma_scale) const {
    return log_pdf_standard(r / gamma_scale) - std::log(gamma_scale);
  }

private:
  double alpha_;
  bool rayleigh_ = false;
  double log_c0_ = 0.0, log_q_ = 0.0;
  double x0_ = 0.0, x1_ = 0.0, h_ = 1.0;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

/// Memo of standardized tables keyed by alpha, least recently used evicted.
/// Thread-safe.
class AlphaRayleighDensity {
public:
  explicit AlphaRayleighDensity(std::size_t capacity = 32) : capacity_(capacity) {}

  std::shared_ptr<const AlphaRayleighTable> table(double alpha) {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(alpha); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    auto t = std::make_shared<const AlphaRayleighTable>(alpha);
    order_.emplace_front(alpha, t);
    index_[alpha] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    ++builds_;
    return t;
  }

  double log_pdf(double r, double alpha, double gamma_scale) {
    return table(alpha)->log_pdf(r, gamma_scale);
  }

  std::size_t builds() const {
    std::lock_guard lock(mutex_);
    return builds_;
  }

private:
  using Entry = std::pair<double, std::shared_ptr<const AlphaRayleighTable>>;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> order_;
  std::unordered_map<double, std::list<Entry>::iterator> index_;
  std::size_t builds_ = 0;
};

/// Inverse-CDF sampler on a tabulated standardized CDF.
///
/// The CDF is tabulated on a log-spaced grid (10^4 points by default) by
/// trapezoidal integration of the density; mass below and above the grid
/// comes from the small-radius and large-radius expansions.
class AlphaRayleighSampler {
public:
  static constexpr double kMinRadius = 1e-4;
  static constexpr double kMaxRadius = 1e4;

  explicit AlphaRayleighSampler(double alpha, std::size_t points = 10000)
      : alpha_(alpha), table_(alpha) {
    x0_ = std::log(kMinRadius);
    h_ = (std::log(kMaxRadius) - x0_) / static_cast<double>(points - 1);
    cdf_.resize(points);
    double prev = std::exp(table_.log_pdf_standard(kMinRadius)) * kMinRadius;
    cdf_[0] = 0.5 * prev;  // p(s) is linear in s below the grid
    for (std::size_t i = 1; i < points; ++i) {
      const double s = std::exp(x0_ + h_ * static_cast<double>(i));
      const double cur = std::exp(table_.log_pdf_standard(s)) * s;  // dF/dx
      cdf_[i] = cdf_[i - 1] + 0.5 * h_ * (prev + cur);
      prev = cur;
    }
    double upper = 0.0;
    if (detail::is_rayleigh(alpha)) {
      upper = std::exp(-0.25 * kMaxRadius * kMaxRadius);
    } else if (auto t = detail::tail_mass_series(kMaxRadius, alpha)) {
      upper = *t;
    }
    norm_ = cdf_.back() + upper;
    for (auto& v : cdf_) v /= norm_;
  }

  double alpha() const noexcept { return alpha_; }

  double cdf_standard(double s) const {
    if (!(s > 0.0)) return 0.0;
    const double x = std::log(s);
    if (x <= x0_) return cdf_.front() * (s / kMinRadius) * (s / kMinRadius);
    const double pos = (x - x0_) / h_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= cdf_.size()) {
      if (detail::is_rayleigh(alpha_)) return -std::expm1(-0.25 * s * s);
      if (auto t = detail::tail_mass_series(s, alpha_)) return 1.0 - *t / norm_;
      return 1.0;
    }
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * cdf_[i] + w * cdf_[i + 1];
  }

  double quantile_standard(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile argument must lie in (0, 1)");
    if (u <= cdf_.front()) return kMinRadius * std::sqrt(u / cdf_.front());
    if (u >= cdf_.back()) {
      // leading power-law term of the tail, P(S > s) ~ c_1 s^-alpha / alpha
      if (detail::is_rayleigh(alpha_)) return std::sqrt(-4.0 * std::log1p(-u));
      const double c1 = std::exp((1.0 + alpha_) * std::numbers::ln2 +
                                 2.0 * std::lgamma(1.0 + 0.5 * alpha_) -
                                 std::log(std::numbers::pi)) *
                        std::sin(0.5 * std::numbers::pi * alpha_);
      return std::max(kMaxRadius, std::pow(c1 / (alpha_ * (1.0 - u)), 1.0 / alpha_));
    }
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
    const double span = cdf_[i + 1] - cdf_[i];
    const double w = span > 0.0 ? (u - cdf_[i]) / span : 0.0;
    return std::exp(x0_ + h_ * (static_cast<double>(i) + w));
  }

  template <class URBG>
  double operator()(URBG& rng, double gamma_scale) const {
    return gamma_scale * quantile_standard(to_open_unit(rng()));
  }

private:
  double alpha_;
  AlphaRayleighTable table_;
  double x0_ = 0.0, h_ = 1.0, norm_ = 1.0;
  std::vector<double> cdf_;
};

/// One draw of r ~ alpha-Rayleigh(alpha, gamma). Samplers are cached per
/// thread by alpha, since building one integrates the density.
template <class URBG>
double sample_alpha_rayleigh_observation(double alpha, double gamma_scale, URBG& rng) {
  if (!(alpha > 0.0) || alpha > 2.0 || !(gamma_scale > 0.0))
    throw std::domain_error("invalid alpha-Rayleigh parameters");
  thread_local std::unordered_map<double, std::shared_ptr<const AlphaRayleighSampler>> cache;
  auto& slot = cache[alpha];
  if (!slot) slot = std::make_shared<const AlphaRayleighSampler>(alpha);
  return (*slot)(rng, gamma_scale);
}

}  // namespace potts_abc
