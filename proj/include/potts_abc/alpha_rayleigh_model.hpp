#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alpha_rayleigh.hpp"
#include "gamma_model.hpp"
#include "label_field.hpp"
#include "observation_field.hpp"
#include "potts.hpp"
#include "rng.hpp"

namespace potts_abc {

/// Random-walk scales in (logit(alpha/2), log gamma) plus acceptance counters
/// for burn-in tuning.
struct AlphaGammaSteps {
  double alpha_step = 0.1;
  double gamma_step = 0.05;
  std::size_t alpha_accepts = 0, alpha_proposals = 0;
  std::size_t gamma_accepts = 0, gamma_proposals = 0;
};

struct AlphaGammaDraw {
  double alpha;
  double gamma;
  bool alpha_accepted;
  bool gamma_accepted;
};

namespace detail {

inline double logit_half(double alpha) { return std::log(alpha / (2.0 - alpha)); }
inline double inv_logit_half(double u) { return 2.0 / (1.0 + std::exp(-u)); }

/// Sum of log p(r | alpha, gamma) over one class slice.
inline double slice_log_likelihood(std::span<const double> r, const AlphaRayleighTable& table,
                                   double gamma_scale) {
  const double inv = 1.0 / gamma_scale;
  double s = 0.0;
  for (double x : r) s += table.log_pdf_standard(x * inv);
  return s - static_cast<double>(r.size()) * std::log(gamma_scale);
}

}  // namespace detail

/// One component-wise random-walk MH update of (alpha, gamma) for a class
/// whose observations are `r`. Targets
///   prod_n p(r_n | alpha, gamma) * U(alpha; 0, 2) * InvGamma(gamma; a, b).
/// With no observations both parameters are drawn from their priors.
template <class URBG>
AlphaGammaDraw sample_alpha_gamma_posterior(std::span<const double> r, double alpha,
                                            double gamma_scale, const InverseGammaPrior& prior,
                                            AlphaRayleighDensity& density, URBG& rng,
                                            AlphaGammaSteps& steps) {
  if (r.empty()) {
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    double a;
    do {
      a = unif(rng);
    } while (!(a > 0.0));
    return {a, sample_inverse_gamma(prior.shape, prior.scale, rng), true, true};
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AlphaGammaDraw out{alpha, gamma_scale, false, false};

  // alpha in u = logit(alpha / 2); Jacobian of the flat prior is alpha (1 - alpha / 2)
  {
    const auto cur = density.table(alpha);
    const double ll_cur = detail::slice_log_likelihood(r, *cur, gamma_scale);
    const double u_new = detail::logit_half(alpha) + steps.alpha_step * normal(rng);
    const double a_new = detail::inv_logit_half(u_new);
    ++steps.alpha_proposals;
    if (a_new > 0.0 && a_new < 2.0) {
      const auto next = density.table(a_new);
      const double ll_new = detail::slice_log_likelihood(r, *next, gamma_scale);
      const double log_ratio = ll_new - ll_cur + std::log(a_new) + std::log1p(-0.5 * a_new) -
                               std::log(alpha) - std::log1p(-0.5 * alpha);
      if (std::log(unif(rng)) < log_ratio) {
        out.alpha = a_new;
        out.alpha_accepted = true;
        ++steps.alpha_accepts;
      }
    }
  }

  // gamma in v = log gamma; target picks up -a v - b / gamma
  {
    const auto table = density.table(out.alpha);
    const double ll_cur = detail::slice_log_likelihood(r, *table, gamma_scale);
    const double g_new = gamma_scale * std::exp(steps.gamma_step * normal(rng));
    ++steps.gamma_proposals;
    if (g_new > 0.0 && std::isfinite(g_new)) {
      const double ll_new = detail::slice_log_likelihood(r, *table, g_new);
      const double log_ratio = ll_new - ll_cur - prior.shape * (std::log(g_new) - std::log(gamma_scale)) -
                               prior.scale * (1.0 / g_new - 1.0 / gamma_scale);
      if (std::log(unif(rng)) < log_ratio) {
        out.gamma = g_new;
        out.gamma_accepted = true;
        ++steps.gamma_accepts;
      }
    }
  }
  return out;
}

/// Mixture of alpha-Rayleigh classes.
struct AlphaRayleighModel {
  std::vector<double> alphas;
  std::vector<double> gammas;
  std::vector<InverseGammaPrior> gamma_priors;
  std::vector<AlphaGammaSteps> steps;
  std::shared_ptr<AlphaRayleighDensity> density = std::make_shared<AlphaRayleighDensity>();
  double target_accept = 0.3;
  std::size_t adapt_every = 50;
  std::size_t updates = 0;

  static constexpr const char* kName = "alpha-rayleigh";

  int classes() const noexcept { return static_cast<int>(alphas.size()); }

  void validate() const {
    if (alphas.empty()) throw std::invalid_argument("alpha-Rayleigh model: no classes");
    if (gammas.size() != alphas.size() || gamma_priors.size() != alphas.size())
      throw std::invalid_argument("alpha-Rayleigh model: one alpha, gamma and prior per class");
    for (double a : alphas)
      if (!(a > 0.0) || a > 2.0)
        throw std::invalid_argument("alpha-Rayleigh model: alpha must lie in (0, 2]");
    for (double g : gammas)
      if (!(g > 0.0)) throw std::invalid_argument("alpha-Rayleigh model: gamma must be positive");
    if (!density) throw std::invalid_argument("alpha-Rayleigh model: no density memo");
  }

  double log_likelihood(double r, int k) const {
    return density->log_pdf(r, alphas[k], gammas[k]);
  }

  void log_likelihood_table(const ObservationField& r, std::vector<double>& out) const {
    const auto K = static_cast<std::size_t>(classes());
    out.resize(r.size() * K);
    std::vector<std::shared_ptr<const AlphaRayleighTable>> tables(K);
    std::vector<double> inv(K), log_g(K);
    for (std::size_t k = 0; k < K; ++k) {
      tables[k] = density->table(alphas[k]);
      inv[k] = 1.0 / gammas[k];
      log_g[k] = std::log(gammas[k]);
    }
    const auto count = static_cast<std::ptrdiff_t>(r.size());
    detail::ParallelErrors errors;
#pragma omp parallel for schedule(static) if (r.size() >= kParallelGrain)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      errors.run([&] {
        const auto n = static_cast<std::size_t>(i);
        for (std::size_t k = 0; k < K; ++k)
          out[n * K + k] = tables[k]->log_pdf_standard(r[n] * inv[k]) - log_g[k];
      });
    }
    errors.rethrow();
  }

  /// One MH-within-Gibbs pass over all classes; class k uses key.child(k).
  /// During burn-in the random-walk scales are tuned every `adapt_every`
  /// passes toward `target_accept`.
  void update_parameters(const ObservationField& r, const LabelField& z, StreamKey key,
                         bool in_burnin) {
    const auto K = static_cast<std::size_t>(classes());
    if (steps.size() != K) steps.assign(K, AlphaGammaSteps{});
    std::vector<std::vector<double>> slices(K);
    for (std::size_t n = 0; n < r.size(); ++n) slices[z[n]].push_back(r[n]);
    for (std::size_t k = 0; k < K; ++k) {
      auto gen = key.child(k).engine();
      const auto d = sample_alpha_gamma_posterior(slices[k], alphas[k], gammas[k],
                                                  gamma_priors[k], *density, gen, steps[k]);
      alphas[k] = d.alpha;
      gammas[k] = d.gamma;
    }
    ++updates;
    if (in_burnin && adapt_every > 0 && updates % adapt_every == 0) {
      for (auto& s : steps) {
        if (s.alpha_proposals > 0) {
          const double rate = static_cast<double>(s.alpha_accepts) / s.alpha_proposals;
          s.alpha_step = std::clamp(s.alpha_step * std::exp(rate - target_accept), 1e-4, 10.0);
        }
        if (s.gamma_proposals > 0) {
          const double rate = static_cast<double>(s.gamma_accepts) / s.gamma_proposals;
          s.gamma_step = std::clamp(s.gamma_step * std::exp(rate - target_accept), 1e-5, 10.0);
        }
        s.alpha_accepts = s.alpha_proposals = s.gamma_accepts = s.gamma_proposals = 0;
      }
    }
  }

  std::vector<double> parameter_vector() const {
    std::vector<double> v(alphas);
    v.insert(v.end(), gammas.begin(), gammas.end());
    return v;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (int k = 1; k <= classes(); ++k) names.push_back("alpha_" + std::to_string(k));
    for (int k = 1; k <= classes(); ++k) names.push_back("gamma_" + std::to_string(k));
    return names;
  }
};

/// Single-class wrapper matching the (r, z, k) form; updates the model's
/// parameters for class k in place and returns the new pair.
template <class URBG>
AlphaGammaDraw sample_alpha_gamma_posterior(const ObservationField& r, const LabelField& z, int k,
                                            AlphaRayleighModel& model, URBG& rng,
                                            AlphaGammaSteps& steps) {
  if (k < 0 || k >= model.classes()) throw std::out_of_range("class index out of range");
  const auto slice = class_observations(r, z, k);
  const auto d = sample_alpha_gamma_posterior(slice, model.alphas[k], model.gammas[k],
                                              model.gamma_priors[k], *model.density, rng, steps);
  model.alphas[k] = d.alpha;
  model.gammas[k] = d.gamma;
  return d;
}

/// Quantile-split initialization. For alpha = 2 the median of r is
/// 2 gamma sqrt(ln 2), which sets gamma from each slice median; alpha starts
/// at `alpha0` for every class. Classes come out sorted by scale.
inline AlphaRayleighModel initialize_alpha_rayleigh_model(const ObservationField& r,
                                                          int k_classes, double alpha0 = 1.9,
                                                          InverseGammaPrior prior = {}) {
  std::vector<double> sorted(r.values().begin(), r.values().end());
  std::sort(sorted.begin(), sorted.end());
  AlphaRayleighModel m;
  m.gamma_priors.assign(k_classes, prior);
  m.steps.assign(k_classes, AlphaGammaSteps{});
  for (int k = 0; k < k_classes; ++k) {
    const auto lo = sorted.size() * k / k_classes;
    const auto hi = std::min(sorted.size(), std::max(lo + 1, sorted.size() * (k + 1) / k_classes));
    const double median = hi > lo ? sorted[lo + (hi - lo) / 2] : 1.0;
    m.alphas.push_back(alpha0);
    m.gammas.push_back(median / (2.0 * std::sqrt(std::numbers::ln2)));
  }
  return m;
}

}  // namespace potts_abc
