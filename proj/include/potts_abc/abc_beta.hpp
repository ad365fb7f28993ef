#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "label_field.hpp"
#include "lattice.hpp"
#include "oracle.hpp"
#include "potts.hpp"
#include "rng.hpp"
#include "trunc_normal.hpp"

namespace potts_abc {

struct AbcConfig {
  double upper_bound = 2.0;        ///< B, flat prior on (0, B)
  double nu = 1e-3;                ///< tolerance fraction: epsilon = nu * eta(z)
  int moves = 3;                   ///< M auxiliary Gibbs sweeps started from z
  double proposal_variance = 2.5e-3;  ///< s2, tuned during burn-in
  double target_accept = 0.05;
  std::size_t adapt_every = 50;
  double gain = 1.0;               ///< kappa in s2 <- s2 exp(kappa (rate - target))
  double min_variance = 1e-8;
  double max_variance = 1.0;

  void validate() const {
    if (!(upper_bound > 0.0)) throw std::invalid_argument("abc: B must be positive");
    if (!(nu > 0.0)) throw std::invalid_argument("abc: nu must be positive");
    if (moves < 1) throw std::invalid_argument("abc: M must be at least 1");
    if (!(proposal_variance > 0.0)) throw std::invalid_argument("abc: s2 must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw std::invalid_argument("abc: target acceptance must lie in (0, 1)");
    if (!(min_variance > 0.0 && min_variance <= max_variance))
      throw std::invalid_argument("abc: invalid variance clamp");
  }
};

struct BetaState {
  double beta = 1.0;
  std::size_t accept_count = 0;
  std::size_t proposal_count = 0;
  /// counters since the last adaptation
  std::size_t window_accepts = 0;
  std::size_t window_proposals = 0;
  /// outcome of the latest step
  bool last_accepted = false;
  bool last_matched = false;
};

/// Tolerance on |eta(z) - eta(w)|. The floor of 1 keeps the strict inequality
/// satisfiable at eta(z) = 0; for integer eta > 0 it changes nothing, since
/// |d| < nu eta and |d| < 1 both reduce to d = 0 when nu eta <= 1.
inline double abc_tolerance(std::uint64_t eta_z, double nu) {
  return std::max(nu * static_cast<double>(eta_z), 1.0);
}

namespace detail {

/// MH acceptance for a matched proposal under the flat prior: only the
/// truncated-normal proposal ratio survives.
inline bool accept_beta(double beta_old, double beta_new, const AbcConfig& cfg, double u) {
  const double s2 = cfg.proposal_variance, B = cfg.upper_bound;
  const double log_ratio = trunc_normal_logpdf(beta_old, beta_new, s2, 0.0, B) -
                           trunc_normal_logpdf(beta_new, beta_old, s2, 0.0, B);
  return std::log(u) < log_ratio;
}

inline void record(BetaState& s, bool matched, bool accepted) {
  ++s.proposal_count;
  ++s.window_proposals;
  s.last_matched = matched;
  s.last_accepted = accepted;
  if (accepted) {
    ++s.accept_count;
    ++s.window_accepts;
  }
}

}  // namespace detail

/// One ABC likelihood-free MH update of beta.
///
/// Stream layout: key.child(0) supplies the proposal (output 0) and the
/// acceptance uniform (output 1); auxiliary sweep m uses key.child(1).child(m).
/// z is never modified; the auxiliary field is a copy.
inline BetaState abc_mh_step(BetaState state, const LabelField& z, const Lattice& lattice,
                             const Coloring& coloring, const AbcConfig& cfg, StreamKey key) {
  if (z.size() == 0) throw std::invalid_argument("abc step needs a nonempty field");
  if (!(state.beta > 0.0 && state.beta < cfg.upper_bound))
    throw std::invalid_argument("beta outside (0, B)");
  const auto gen = key.child(0).engine();
  const double proposal = trunc_normal_quantile(to_open_unit(gen.at(0)), state.beta,
                                                cfg.proposal_variance, 0.0, cfg.upper_bound);
  LabelField w = z;
  const auto sweeps = key.child(1);
  for (int m = 0; m < cfg.moves; ++m)
    sample_potts_prior_sweep(w, proposal, lattice, coloring,
                             sweeps.child(static_cast<std::uint64_t>(m)));
  const auto eta_z = suff_stat(z, lattice);
  const auto eta_w = suff_stat(w, lattice);
  const double distance = std::abs(static_cast<double>(eta_z) - static_cast<double>(eta_w));
  const bool matched = distance < abc_tolerance(eta_z, cfg.nu);
  const bool accepted =
      matched && detail::accept_beta(state.beta, proposal, cfg, to_open_unit(gen.at(1)));
  if (accepted) state.beta = proposal;
  detail::record(state, matched, accepted);
  return state;
}

/// Exact likelihood-free MH update: the auxiliary field is an exact draw from
/// f(w | beta*) and the step accepts only when eta(w) = eta(z).
inline BetaState exact_lf_mh_step(BetaState state, const LabelField& z, const Lattice& lattice,
                                  const ExactPottsSampler& sampler, const AbcConfig& cfg,
                                  StreamKey key) {
  if (lattice.size() > ExactPottsSampler::kMaxSites)
    throw std::length_error("exact likelihood-free step is limited to 16 sites");
  if (!(state.beta > 0.0 && state.beta < cfg.upper_bound))
    throw std::invalid_argument("beta outside (0, B)");
  const auto gen = key.child(0).engine();
  const double proposal = trunc_normal_quantile(to_open_unit(gen.at(0)), state.beta,
                                                cfg.proposal_variance, 0.0, cfg.upper_bound);
  const auto w = sampler.draw(proposal, to_unit(gen.at(2)));
  const bool matched = suff_stat(w, lattice) == suff_stat(z, lattice);
  const bool accepted =
      matched && detail::accept_beta(state.beta, proposal, cfg, to_open_unit(gen.at(1)));
  if (accepted) state.beta = proposal;
  detail::record(state, matched, accepted);
  return state;
}

inline BetaState exact_lf_mh_step(BetaState state, const LabelField& z, const Lattice& lattice,
                                  const AbcConfig& cfg, StreamKey key) {
  const ExactPottsSampler sampler(lattice, z.classes());
  return exact_lf_mh_step(state, z, lattice, sampler, cfg, key);
}

/// Burn-in tuning of s2 toward the target acceptance rate using the window
/// counters of `state`, which are then reset. Outside burn-in the config is
/// returned unchanged.
inline AbcConfig adapt_proposal_variance(BetaState& state, AbcConfig cfg, bool in_burnin) {
  if (!in_burnin) return cfg;
  if (state.window_proposals > 0) {
    const double rate =
        static_cast<double>(state.window_accepts) / static_cast<double>(state.window_proposals);
    cfg.proposal_variance =
        std::clamp(cfg.proposal_variance * std::exp(cfg.gain * (rate - cfg.target_accept)),
                   cfg.min_variance, cfg.max_variance);
  }
  state.window_accepts = 0;
  state.window_proposals = 0;
  return cfg;
}

struct BetaChainOptions {
  std::size_t samples = 100000;
  std::size_t burnin = 1000;
  std::size_t thinning = 1;  ///< steps between recorded samples
  double initial_beta = 1.0;
  bool exact = false;  ///< exact auxiliary draws instead of M Gibbs sweeps
};

/// Runs the beta update alone on a fixed label field and returns the
/// recorded values. Step i uses stream key.child(i).
inline std::vector<double> sample_beta_chain(const LabelField& z, const Lattice& lattice,
                                             const AbcConfig& cfg, const BetaChainOptions& opt,
                                             StreamKey key, BetaState* final_state = nullptr) {
  cfg.validate();
  if (opt.thinning < 1) throw std::invalid_argument("thinning must be at least 1");
  const auto coloring = chromatic_coloring(lattice);
  std::optional<ExactPottsSampler> exact;
  if (opt.exact) exact.emplace(lattice, z.classes());
  BetaState state;
  state.beta = opt.initial_beta;
  std::vector<double> out;
  out.reserve(opt.samples);
  const std::size_t total = opt.burnin + opt.samples * opt.thinning;
  for (std::size_t i = 0; i < total; ++i) {
    state = exact ? exact_lf_mh_step(state, z, lattice, *exact, cfg, key.child(i))
                  : abc_mh_step(state, z, lattice, coloring, cfg, key.child(i));
    if (i >= opt.burnin && (i - opt.burnin + 1) % opt.thinning == 0) out.push_back(state.beta);
  }
  if (final_state) *final_state = state;
  return out;
}

/// Total-variation distance between the histogram of `samples` on `masses.size()`
/// equal bins over (0, B) and the given bin masses.
inline double histogram_tv(std::span<const double> samples, std::span<const double> masses,
                           double upper_bound) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::vector<double> h(masses.size(), 0.0);
  const double w = upper_bound / static_cast<double>(masses.size());
  for (double x : samples) {
    auto b = static_cast<std::size_t>(x / w);
    h[std::min(b, h.size() - 1)] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t b = 0; b < h.size(); ++b)
    tv += std::abs(h[b] / static_cast<double>(samples.size()) - masses[b]);
  return 0.5 * tv;
}

}  // namespace potts_abc
