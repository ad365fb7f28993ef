#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "label_field.hpp"
#include "lattice.hpp"
#include "observation_field.hpp"
#include "potts.hpp"

namespace potts_abc {

/// Largest configuration count K^N the enumerators accept.
inline constexpr std::uint64_t kOracleMaxStates = std::uint64_t{1} << 24;

/// K^N, or throws when it exceeds the oracle cap.
inline std::uint64_t oracle_state_count(const Lattice& lattice, int k_classes) {
  if (k_classes < 1 || k_classes > kMaxClasses) throw std::invalid_argument("invalid class count");
  std::uint64_t states = 1;
  for (std::size_t n = 0; n < lattice.size(); ++n) {
    states *= static_cast<std::uint64_t>(k_classes);
    if (states > kOracleMaxStates)
      throw std::length_error("enumeration over K^N configurations exceeds the 2^24 cap");
  }
  return states;
}

/// Configuration number `index` in mixed-radix order (site 0 varies fastest).
inline LabelField decode_configuration(std::uint64_t index, std::size_t n_sites, int k_classes) {
  LabelField z(n_sites, k_classes);
  for (std::size_t n = 0; n < n_sites; ++n) {
    z[n] = static_cast<std::uint8_t>(index % static_cast<std::uint64_t>(k_classes));
    index /= static_cast<std::uint64_t>(k_classes);
  }
  return z;
}

namespace detail {

/// Visits every configuration in mixed-radix order, keeping eta up to date
/// incrementally. `visit(z, eta, index)` is called once per configuration.
template <class Visit>
void for_each_configuration(const Lattice& lattice, int k_classes, Visit&& visit) {
  const auto states = oracle_state_count(lattice, k_classes);
  const auto n_sites = lattice.size();
  LabelField z(n_sites, k_classes);
  std::int64_t eta = static_cast<std::int64_t>(lattice.total_degree());  // all labels equal
  auto set_label = [&](std::size_t n, std::uint8_t label) {
    std::int64_t before = 0, after = 0;
    for (auto m : lattice.neighbors(n)) {
      before += (z[m] == z[n]);
      after += (z[m] == label);
    }
    eta += 2 * (after - before);  // each undirected edge is counted in both directions
    z[n] = label;
  };
  for (std::uint64_t index = 0; index < states; ++index) {
    visit(static_cast<const LabelField&>(z), static_cast<std::uint64_t>(eta), index);
    for (std::size_t n = 0; n < n_sites; ++n) {
      if (z[n] + 1 < k_classes) {
        set_label(n, static_cast<std::uint8_t>(z[n] + 1));
        break;
      }
      set_label(n, 0);
    }
  }
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0, comp_ = 0.0;
};

inline double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  CompensatedSum s;
  for (double x : v) s.add(std::exp(x - mx));
  return mx + std::log(s.value());
}

}  // namespace detail

/// Number of configurations with each eta value; entry h counts eta(z) = h.
inline std::vector<std::uint64_t> eta_histogram(const Lattice& lattice, int k_classes) {
  std::vector<std::uint64_t> hist(lattice.total_degree() + 1, 0);
  detail::for_each_configuration(lattice, k_classes,
                                 [&](const LabelField&, std::uint64_t eta, std::uint64_t) {
                                   ++hist[eta];
                                 });
  while (hist.size() > 1 && hist.back() == 0) hist.pop_back();
  return hist;
}

/// log C(beta) from an eta histogram.
inline double log_partition(std::span<const std::uint64_t> hist, double beta) {
  std::vector<double> terms;
  terms.reserve(hist.size());
  for (std::size_t h = 0; h < hist.size(); ++h)
    if (hist[h] > 0) terms.push_back(std::log(static_cast<double>(hist[h])) + log_potts_weight(h, beta));
  return detail::log_sum_exp(terms);
}

/// C(beta) = sum over all K^N configurations of exp(beta eta(z) / 2), via the
/// eta histogram.
inline double enumerate_partition(const Lattice& lattice, int k_classes, double beta) {
  return std::exp(log_partition(eta_histogram(lattice, k_classes), beta));
}

/// C(beta) by decoding every configuration and recomputing eta from scratch.
/// Shares no code with the histogram path beyond suff_stat.
inline double enumerate_partition_direct(const Lattice& lattice, int k_classes, double beta) {
  const auto states = oracle_state_count(lattice, k_classes);
  detail::CompensatedSum sum;
  for (std::uint64_t index = 0; index < states; ++index) {
    const auto z = decode_configuration(index, lattice.size(), k_classes);
    sum.add(std::exp(log_potts_weight(suff_stat(z, lattice), beta)));
  }
  return sum.value();
}

/// Exact law of eta(z) under f(z | beta); entry h is P(eta = h).
inline std::vector<double> enumerate_eta_distribution(const Lattice& lattice, int k_classes,
                                                      double beta) {
  const auto hist = eta_histogram(lattice, k_classes);
  const double lc = log_partition(hist, beta);
  std::vector<double> p(hist.size(), 0.0);
  for (std::size_t h = 0; h < hist.size(); ++h)
    if (hist[h] > 0) p[h] = std::exp(std::log(static_cast<double>(hist[h])) + log_potts_weight(h, beta) - lc);
  return p;
}

struct EnumerationResult {
  std::vector<std::uint64_t> eta_histogram;
  /// (beta, normalized posterior density) on a uniform grid over [0, B].
  std::vector<std::pair<double, double>> beta_grid;
  /// log C(beta) at each grid point.
  std::vector<double> log_partition;
};

/// Posterior of beta given z under a flat prior on (0, B):
///   f(beta | z) proportional to exp(beta eta(z) / 2) / C(beta),
/// tabulated on `grid_points` equally spaced values spanning [0, B] and
/// normalized with the trapezoid rule.
inline EnumerationResult exact_beta_posterior(const LabelField& z, const Lattice& lattice,
                                              double upper_bound = 2.0,
                                              std::size_t grid_points = 400) {
  if (grid_points < 2) throw std::invalid_argument("grid needs at least two points");
  if (!(upper_bound > 0.0)) throw std::invalid_argument("upper bound must be positive");
  z.check_against(lattice);
  EnumerationResult res;
  res.eta_histogram = eta_histogram(lattice, z.classes());
  const auto eta_z = suff_stat(z, lattice);
  const double h = upper_bound / static_cast<double>(grid_points - 1);
  std::vector<double> logd(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double b = h * static_cast<double>(i);
    res.log_partition.push_back(log_partition(res.eta_histogram, b));
    logd[i] = log_potts_weight(eta_z, b) - res.log_partition.back();
  }
  const double mx = *std::max_element(logd.begin(), logd.end());
  double integral = 0.0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double w = (i == 0 || i + 1 == grid_points) ? 0.5 : 1.0;
    integral += w * h * std::exp(logd[i] - mx);
  }
  for (std::size_t i = 0; i < grid_points; ++i)
    res.beta_grid.emplace_back(h * static_cast<double>(i), std::exp(logd[i] - mx) / integral);
  return res;
}

/// Exact posterior mass of beta in each of `bins` equal bins over (0, B),
/// integrating f(beta | z) with 8-point Gauss-Legendre per bin.
inline std::vector<double> exact_beta_bin_masses(const LabelField& z, const Lattice& lattice,
                                                 double upper_bound, std::size_t bins) {
  static constexpr double kNodes[4] = {0.1834346424956498, 0.5255324099163290,
                                       0.7966664774136267, 0.9602898564975363};
  static constexpr double kWeights[4] = {0.3626837833783620, 0.3137066458778873,
                                         0.2223810344533745, 0.1012285362903763};
  const auto hist = eta_histogram(lattice, z.classes());
  const auto eta_z = suff_stat(z, lattice);
  const double width = upper_bound / static_cast<double>(bins);
  auto logd = [&](double b) { return log_potts_weight(eta_z, b) - log_partition(hist, b); };
  const double shift = std::max(logd(0.0), logd(upper_bound));
  std::vector<double> mass(bins, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double mid = width * (static_cast<double>(i) + 0.5);
    double m = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double d = 0.5 * width * kNodes[j];
      m += kWeights[j] * (std::exp(logd(mid - d) - shift) + std::exp(logd(mid + d) - shift));
    }
    mass[i] = 0.5 * width * m;
    total += mass[i];
  }
  for (auto& m : mass) m /= total;
  return mass;
}

/// Exact P(z_n = k | r, theta, beta) from an N x K table of log f(r_n | theta_k).
inline std::vector<double> exact_label_marginals(std::span<const double> log_likelihood,
                                                 int k_classes, double beta,
                                                 const Lattice& lattice) {
  const auto N = lattice.size();
  const auto K = static_cast<std::size_t>(k_classes);
  if (log_likelihood.size() != N * K)
    throw std::invalid_argument("log-likelihood table must be N x K");
  std::vector<double> acc(N * K, 0.0);
  double scale = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  double ll = 0.0;
  for (std::size_t n = 0; n < N; ++n) ll += log_likelihood[n * K];  // all-first-label start
  std::vector<std::uint8_t> prev(N, 0);
  detail::for_each_configuration(
      lattice, k_classes, [&](const LabelField& z, std::uint64_t eta, std::uint64_t) {
        for (std::size_t n = 0; n < N; ++n)
          if (z[n] != prev[n]) {
            ll += log_likelihood[n * K + z[n]] - log_likelihood[n * K + prev[n]];
            prev[n] = z[n];
          }
        const double lw = log_potts_weight(eta, beta) + ll;
        if (lw > scale) {
          const double f = std::isfinite(scale) ? std::exp(scale - lw) : 0.0;
          for (auto& a : acc) a *= f;
          total *= f;
          scale = lw;
        }
        const double w = std::exp(lw - scale);
        total += w;
        for (std::size_t n = 0; n < N; ++n) acc[n * K + z[n]] += w;
      });
  for (auto& a : acc) a /= total;
  return acc;
}

template <class Model>
std::vector<double> exact_label_marginals(const ObservationField& r, const Model& model,
                                          double beta, const Lattice& lattice) {
  r.check_against(lattice);
  std::vector<double> table;
  model.log_likelihood_table(r, table);
  return exact_label_marginals(table, model.classes(), beta, lattice);
}

/// Exact sampler for f(w | beta) on a tiny lattice.
///
/// Configurations are ordered by (eta, mixed-radix index); a uniform is
/// inverted through the CDF over that order. Since the weight depends only
/// on eta, the draw picks an eta class with exact probability and then a
/// configuration uniformly inside it.
class ExactPottsSampler {
public:
  static constexpr std::size_t kMaxSites = 16;

  ExactPottsSampler(const Lattice& lattice, int k_classes)
      : n_sites_(lattice.size()), k_(k_classes) {
    if (lattice.size() > kMaxSites)
      throw std::length_error("exact auxiliary simulation is limited to 16 sites");
    hist_ = eta_histogram(lattice, k_classes);
    offsets_.assign(hist_.size() + 1, 0);
    for (std::size_t h = 0; h < hist_.size(); ++h) offsets_[h + 1] = offsets_[h] + hist_[h];
    by_eta_.resize(offsets_.back());
    auto fill = offsets_;
    detail::for_each_configuration(lattice, k_classes,
                                   [&](const LabelField&, std::uint64_t eta, std::uint64_t idx) {
                                     by_eta_[fill[eta]++] = static_cast<std::uint32_t>(idx);
                                   });
  }

  std::span<const std::uint64_t> histogram() const noexcept { return hist_; }

  /// Configuration index for uniform u in [0, 1) at inverse temperature beta.
  std::uint64_t draw_index(double beta, double u) const {
    const double lc = log_partition(hist_, beta);
    double target = u;
    std::size_t h = 0;
    for (; h + 1 < hist_.size(); ++h) {
      if (hist_[h] == 0) continue;
      const double p = std::exp(std::log(static_cast<double>(hist_[h])) + log_potts_weight(h, beta) - lc);
      if (target < p) break;
      target -= p;
    }
    while (hist_[h] == 0) --h;  // rounding spill past the last class
    const double p = std::exp(std::log(static_cast<double>(hist_[h])) + log_potts_weight(h, beta) - lc);
    const auto within = std::min<std::uint64_t>(
        hist_[h] - 1, static_cast<std::uint64_t>(std::max(0.0, target / p) * hist_[h]));
    return by_eta_[offsets_[h] + within];
  }

  LabelField draw(double beta, double u) const {
    return decode_configuration(draw_index(beta, u), n_sites_, k_);
  }

private:
  std::size_t n_sites_;
  int k_;
  std::vector<std::uint64_t> hist_;
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint32_t> by_eta_;
};

}  // namespace potts_abc
