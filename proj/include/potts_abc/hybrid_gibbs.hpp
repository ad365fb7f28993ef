#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "abc_beta.hpp"
#include "label_field.hpp"
#include "lattice.hpp"
#include "observation_field.hpp"
#include "potts.hpp"
#include "rng.hpp"

namespace potts_abc {

struct ChainConfig {
  std::size_t iterations = 1000;  ///< T
  std::size_t burnin = 400;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  double initial_beta = 1.0;
  /// When set, beta is held at this value and the ABC step is skipped.
  std::optional<double> fixed_beta;
  AbcConfig abc;

  void validate() const {
    if (burnin >= iterations) throw std::invalid_argument("burn-in must be below T");
    if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
    abc.validate();
    const double b = fixed_beta.value_or(initial_beta);
    if (fixed_beta) {
      if (!(b >= 0.0)) throw std::invalid_argument("fixed beta must be nonnegative");
    } else if (!(b > 0.0 && b < abc.upper_bound)) {
      throw std::invalid_argument("initial beta must lie in (0, B)");
    }
  }

  std::size_t recorded() const { return (iterations - burnin) / thinning; }
};

template <class Model>
struct ChainState {
  LabelField z;
  Model theta;
  BetaState beta;
  AbcConfig abc;
  std::size_t t = 0;
};

struct Trace {
  int classes = 0;
  std::size_t sites = 0;
  std::vector<std::size_t> iterations;  ///< 1-based iteration of each record
  std::vector<double> beta_samples;
  std::vector<std::vector<double>> theta_samples;
  std::vector<std::string> theta_names;
  /// row-major N x K occurrence counts of each label over the records
  std::vector<std::uint32_t> label_counts;
  std::vector<std::uint8_t> beta_accepted;  ///< per record
  /// per adaptation window during burn-in: (iteration, acceptance rate, new s2)
  struct Adaptation {
    std::size_t iteration;
    double rate;
    double proposal_variance;
  };
  std::vector<Adaptation> adaptations;
  std::size_t beta_proposals = 0;
  std::size_t beta_accepts = 0;
  double final_proposal_variance = 0.0;

  std::size_t records() const noexcept { return beta_samples.size(); }
  double beta_acceptance() const {
    return beta_proposals ? static_cast<double>(beta_accepts) / beta_proposals : 0.0;
  }
};

/// Normalized full conditional of z_n:
///   p_k proportional to exp(beta * #{n' in V(n): z_n' = k} + log f(r_n | theta_k)),
/// computed with max-subtraction. `log_lik` is the K-entry row of site n.
inline void label_conditional_probabilities(const LabelField& z, const Lattice& lattice,
                                            std::size_t n, double beta,
                                            std::span<const double> log_lik,
                                            std::span<double> out) {
  const auto K = static_cast<std::size_t>(z.classes());
  std::array<int, kMaxClasses> counts{};
  for (auto m : lattice.neighbors(n)) ++counts[z[m]];
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = beta * counts[k] + log_lik[k];
    mx = std::max(mx, out[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = std::exp(out[k] - mx);
    total += out[k];
  }
  for (std::size_t k = 0; k < K; ++k) out[k] /= total;
}

/// One chromatic Gibbs sweep over the labels given an N x K log-likelihood
/// table. The uniform for site n in color c is stream.child(c).engine().at(n).
inline void update_labels(LabelField& z, std::span<const double> log_lik, double beta,
                          const Lattice& lattice, const Coloring& coloring, StreamKey stream) {
  z.check_against(lattice);
  const auto K = static_cast<std::size_t>(z.classes());
  if (log_lik.size() != z.size() * K)
    throw std::invalid_argument("log-likelihood table must be N x K");
  if (K == 1) return;
  for (int color = 0; color < coloring.n_colors; ++color) {
    const auto& sites = coloring.classes[color];
    const SplitMix64 gen = stream.child(static_cast<std::uint64_t>(color)).engine();
    const auto count = static_cast<std::ptrdiff_t>(sites.size());
#pragma omp parallel for schedule(static) if (sites.size() >= kParallelGrain)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const auto n = sites[static_cast<std::size_t>(i)];
      std::array<double, kMaxClasses> p;
      label_conditional_probabilities(z, lattice, n, beta, log_lik.subspan(n * K, K),
                                      {p.data(), K});
      z[n] = sample_categorical({p.data(), K}, to_unit(gen.at(n)));
    }
  }
}

template <class Model>
void update_labels(ChainState<Model>& state, const ObservationField& r, const Lattice& lattice,
                   const Coloring& coloring, StreamKey stream) {
  std::vector<double> table;
  state.theta.log_likelihood_table(r, table);
  update_labels(state.z, table, state.beta.beta, lattice, coloring, stream);
}

/// Likelihood-only label draw (the beta = 0 conditional), used to start a chain.
inline LabelField likelihood_label_draw(std::span<const double> log_lik, int k_classes,
                                        StreamKey stream) {
  const auto K = static_cast<std::size_t>(k_classes);
  const auto N = log_lik.size() / K;
  LabelField z(N, k_classes);
  const auto gen = stream.engine();
  std::array<double, kMaxClasses> p;
  for (std::size_t n = 0; n < N; ++n) {
    const auto row = log_lik.subspan(n * K, K);
    const double mx = *std::max_element(row.begin(), row.end());
    for (std::size_t k = 0; k < K; ++k) p[k] = std::exp(row[k] - mx);
    z[n] = sample_categorical({p.data(), K}, to_unit(gen.at(n)));
  }
  return z;
}

/// Replaces the beta update; receives the current state, labels and the
/// iteration's beta stream.
using BetaStepFn = std::function<BetaState(const BetaState&, const LabelField&, const AbcConfig&,
                                           StreamKey)>;

template <class Model>
struct ChainHooks {
  BetaStepFn beta_step;  ///< default: abc_mh_step
  std::function<void(const ChainState<Model>&)> progress;
};

/// Hybrid Gibbs sampler: per iteration a label sweep, a parameter update and
/// a beta update, in that order.
///
/// Random streams are keyed by (seed, domain, iteration), so label and
/// parameter updates at iteration t depend on the state and t only.
template <class Model>
Trace run_chain(const ChainConfig& cfg, const ObservationField& r, const Lattice& lattice,
                Model theta, ChainHooks<Model> hooks = {},
                ChainState<Model>* final_state = nullptr) {
  cfg.validate();
  theta.validate();
  r.check_against(lattice);
  const auto coloring = chromatic_coloring(lattice);
  const auto root = StreamKey::root(cfg.seed);
  const int K = theta.classes();
  const auto N = lattice.size();

  ChainState<Model> state{LabelField{}, std::move(theta), BetaState{}, cfg.abc, 0};
  state.beta.beta = cfg.fixed_beta.value_or(cfg.initial_beta);

  std::vector<double> table;
  state.theta.log_likelihood_table(r, table);
  state.z = likelihood_label_draw(table, K, child(root, Domain::init));

  if (!hooks.beta_step)
    hooks.beta_step = [&](const BetaState& b, const LabelField& z, const AbcConfig& abc,
                          StreamKey key) {
      return abc_mh_step(b, z, lattice, coloring, abc, key);
    };

  Trace trace;
  trace.classes = K;
  trace.sites = N;
  trace.theta_names = state.theta.parameter_names();
  trace.label_counts.assign(N * static_cast<std::size_t>(K), 0);
  const auto labels_root = child(root, Domain::labels);
  const auto theta_root = child(root, Domain::theta);
  const auto beta_root = child(root, Domain::beta);

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    state.t = t;
    const bool in_burnin = t <= cfg.burnin;
    if (t > 1) state.theta.log_likelihood_table(r, table);
    update_labels(state.z, table, state.beta.beta, lattice, coloring, labels_root.child(t));
    state.theta.update_parameters(r, state.z, theta_root.child(t), in_burnin);
    if (!cfg.fixed_beta) {
      state.beta = hooks.beta_step(state.beta, state.z, state.abc, beta_root.child(t));
      if (in_burnin && state.abc.adapt_every > 0 && t % state.abc.adapt_every == 0) {
        const double rate = state.beta.window_proposals
                                ? static_cast<double>(state.beta.window_accepts) /
                                      static_cast<double>(state.beta.window_proposals)
                                : 0.0;
        state.abc = adapt_proposal_variance(state.beta, state.abc, true);
        trace.adaptations.push_back({t, rate, state.abc.proposal_variance});
      }
      if (!in_burnin) {
        ++trace.beta_proposals;
        trace.beta_accepts += state.beta.last_accepted;
      }
    }
    if (!in_burnin && (t - cfg.burnin) % cfg.thinning == 0) {
      trace.iterations.push_back(t);
      trace.beta_samples.push_back(state.beta.beta);
      trace.theta_samples.push_back(state.theta.parameter_vector());
      trace.beta_accepted.push_back(state.beta.last_accepted);
      for (std::size_t n = 0; n < N; ++n) ++trace.label_counts[n * K + state.z[n]];
    }
    if (hooks.progress) hooks.progress(state);
  }
  trace.final_proposal_variance = state.abc.proposal_variance;
  if (final_state) *final_state = std::move(state);
  return trace;
}

struct Estimate {
  double beta_mean = 0.0, beta_std = 0.0;
  std::vector<double> theta_mean, theta_std;
};

namespace detail {
inline std::pair<double, double> mean_and_population_std(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(x.size()))};
}
}  // namespace detail

/// Posterior means with population standard deviations (divide by count).
inline Estimate mmse_estimate(const Trace& trace) {
  if (trace.beta_samples.empty()) throw std::invalid_argument("empty trace");
  Estimate e;
  std::tie(e.beta_mean, e.beta_std) = detail::mean_and_population_std(trace.beta_samples);
  const auto P = trace.theta_samples.front().size();
  std::vector<double> col(trace.theta_samples.size());
  for (std::size_t j = 0; j < P; ++j) {
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = trace.theta_samples[i][j];
    const auto [m, s] = detail::mean_and_population_std(col);
    e.theta_mean.push_back(m);
    e.theta_std.push_back(s);
  }
  return e;
}

/// Per-site marginal posterior mode; ties go to the smallest class index.
inline LabelField map_labels(std::span<const std::uint32_t> label_counts, int k_classes) {
  const auto K = static_cast<std::size_t>(k_classes);
  if (label_counts.empty()) throw std::invalid_argument("empty label counts");
  const auto N = label_counts.size() / K;
  LabelField z(N, k_classes);
  for (std::size_t n = 0; n < N; ++n) {
    const auto row = label_counts.subspan(n * K, K);
    z[n] = static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return z;
}

inline LabelField map_labels(const Trace& trace) {
  if (trace.records() == 0) throw std::invalid_argument("empty trace");
  return map_labels(trace.label_counts, trace.classes);
}

}  // namespace potts_abc
