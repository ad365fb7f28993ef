#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "label_field.hpp"
#include "observation_field.hpp"
#include "rng.hpp"

namespace potts_abc {

/// log of the L-look gamma density with mean m:
/// (L/m)^L r^(L-1) / Gamma(L) * exp(-L r / m).
inline double gamma_logpdf(double r, int looks, double mean) {
  if (!(r > 0.0)) throw std::domain_error("gamma_logpdf: r must be positive");
  if (!(mean > 0.0)) throw std::domain_error("gamma_logpdf: mean must be positive");
  if (looks < 1) throw std::domain_error("gamma_logpdf: looks must be >= 1");
  const double L = looks;
  return L * std::log(L / mean) + (L - 1.0) * std::log(r) - std::lgamma(L) - L * r / mean;
}

template <class URBG>
double sample_gamma_observation(int looks, double mean, URBG& rng) {
  if (looks < 1 || !(mean > 0.0)) throw std::domain_error("invalid gamma parameters");
  std::gamma_distribution<double> dist(static_cast<double>(looks), mean / looks);
  double r;
  do {
    r = dist(rng);
  } while (!(r > 0.0));
  return r;
}

struct InverseGammaPrior {
  double shape = 1.0;
  double scale = 1.0;
};

/// Draw from InverseGamma(shape, scale), density ∝ x^(-shape-1) exp(-scale/x).
template <class URBG>
double sample_inverse_gamma(double shape, double scale, URBG& rng) {
  std::gamma_distribution<double> dist(shape, 1.0 / scale);
  double g;
  do {
    g = dist(rng);
  } while (!(g > 0.0));
  return 1.0 / g;
}

/// Conjugate draw of a class mean given n observations summing to sum_r:
/// InverseGamma(a + L n, b + L sum_r).
template <class URBG>
double sample_m_posterior(std::size_t n_obs, double sum_r, int looks,
                          const InverseGammaPrior& prior, URBG& rng) {
  const double L = looks;
  return sample_inverse_gamma(prior.shape + L * static_cast<double>(n_obs),
                              prior.scale + L * sum_r, rng);
}

/// Mixture of L-look gamma classes, one mean per class.
struct GammaModel {
  int looks = 3;
  std::vector<double> means;
  std::vector<InverseGammaPrior> priors;

  static constexpr const char* kName = "gamma";

  int classes() const noexcept { return static_cast<int>(means.size()); }

  void validate() const {
    if (looks < 1) throw std::invalid_argument("gamma model: looks must be >= 1");
    if (means.empty()) throw std::invalid_argument("gamma model: no classes");
    if (priors.size() != means.size())
      throw std::invalid_argument("gamma model: one prior per class required");
    for (double m : means)
      if (!(m > 0.0)) throw std::invalid_argument("gamma model: means must be positive");
    for (const auto& p : priors)
      if (!(p.shape > 0.0) || !(p.scale > 0.0))
        throw std::invalid_argument("gamma model: prior hyperparameters must be positive");
  }

  double log_likelihood(double r, int k) const { return gamma_logpdf(r, looks, means[k]); }

  /// Row-major N x K table of log f(r_n | theta_k).
  void log_likelihood_table(const ObservationField& r, std::vector<double>& out) const {
    const auto K = static_cast<std::size_t>(classes());
    out.resize(r.size() * K);
    const double L = looks;
    std::vector<double> offset(K);
    for (std::size_t k = 0; k < K; ++k)
      offset[k] = L * std::log(L / means[k]) - std::lgamma(L);
    for (std::size_t n = 0; n < r.size(); ++n) {
      const double lr = (L - 1.0) * std::log(r[n]);
      for (std::size_t k = 0; k < K; ++k) out[n * K + k] = offset[k] + lr - L * r[n] / means[k];
    }
  }

  /// Gibbs update of every class mean; class k uses stream key.child(k).
  void update_parameters(const ObservationField& r, const LabelField& z, StreamKey key,
                         bool /*in_burnin*/) {
    const auto K = static_cast<std::size_t>(classes());
    std::vector<std::size_t> counts(K, 0);
    std::vector<double> sums(K, 0.0);
    for (std::size_t n = 0; n < r.size(); ++n) {
      ++counts[z[n]];
      sums[z[n]] += r[n];
    }
    for (std::size_t k = 0; k < K; ++k) {
      auto gen = key.child(k).engine();
      means[k] = sample_m_posterior(counts[k], sums[k], looks, priors[k], gen);
    }
  }

  std::vector<double> parameter_vector() const { return means; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (int k = 1; k <= classes(); ++k) names.push_back("m_" + std::to_string(k));
    return names;
  }
};

/// Single-class wrapper matching the (r, z, k) form.
template <class URBG>
double sample_m_posterior(const ObservationField& r, const LabelField& z, int k,
                          const GammaModel& model, URBG& rng) {
  if (k < 0 || k >= model.classes()) throw std::out_of_range("class index out of range");
  std::size_t n_k = 0;
  double sum = 0.0;
  for (std::size_t n = 0; n < r.size(); ++n)
    if (z[n] == k) {
      ++n_k;
      sum += r[n];
    }
  return sample_m_posterior(n_k, sum, model.looks, model.priors[k], rng);
}

/// Quantile-split initialization: class k gets the mean of the k-th of K
/// equal-count slices of the sorted observations (ascending by construction).
inline GammaModel initialize_gamma_model(const ObservationField& r, int k_classes, int looks,
                                         InverseGammaPrior prior = {}) {
  std::vector<double> sorted(r.values().begin(), r.values().end());
  std::sort(sorted.begin(), sorted.end());
  GammaModel m;
  m.looks = looks;
  m.priors.assign(k_classes, prior);
  for (int k = 0; k < k_classes; ++k) {
    const auto lo = sorted.size() * k / k_classes;
    const auto hi = std::max(lo + 1, sorted.size() * (k + 1) / k_classes);
    const auto end = std::min(hi, sorted.size());
    double s = 0.0;
    for (auto i = lo; i < end; ++i) s += sorted[i];
    m.means.push_back(end > lo ? s / static_cast<double>(end - lo) : 1.0);
  }
  return m;
}

}  // namespace potts_abc
