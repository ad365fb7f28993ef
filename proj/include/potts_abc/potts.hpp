#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "label_field.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace potts_abc {

/// Sites per color class below which sweeps stay on the calling thread.
inline constexpr std::size_t kParallelGrain = 4096;

/// eta(z): number of ordered neighbor pairs (n, n') with equal labels.
inline std::uint64_t suff_stat(const LabelField& z, const Lattice& lattice) {
  z.check_against(lattice);
  std::uint64_t eta = 0;
  for (std::size_t n = 0; n < lattice.size(); ++n) {
    const auto zn = z[n];
    for (auto m : lattice.neighbors(n)) eta += (z[m] == zn);
  }
  return eta;
}

/// Phi_beta(z) = beta * eta(z).
inline double potential(const LabelField& z, double beta, const Lattice& lattice) {
  return beta * static_cast<double>(suff_stat(z, lattice));
}

/// Log of the unnormalized prior weight of a configuration with statistic eta.
/// The single-site conditional exp(beta * #equal neighbors) used by every
/// sampler here is the conditional of exp(beta * eta / 2), which counts each
/// agreeing edge once; all exact laws are built on this weight.
inline double log_potts_weight(std::uint64_t eta, double beta) {
  return 0.5 * beta * static_cast<double>(eta);
}

/// Number of neighbors of site n carrying each label.
inline void neighbor_label_counts(const LabelField& z, const Lattice& lattice, std::size_t n,
                                  std::span<int> counts) {
  std::fill(counts.begin(), counts.end(), 0);
  for (auto m : lattice.neighbors(n)) ++counts[z[m]];
}

/// Draws k with probability weights[k] / sum(weights) from a uniform u in [0,1).
inline std::uint8_t sample_categorical(std::span<const double> weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  double target = u * total;
  const auto last = weights.size() - 1;
  for (std::size_t k = 0; k < last; ++k) {
    if (target < weights[k]) return static_cast<std::uint8_t>(k);
    target -= weights[k];
  }
  return static_cast<std::uint8_t>(last);
}

/// One chromatic Gibbs sweep targeting the Potts prior f(z | beta).
///
/// Color classes are visited in order; within a class every site reads only
/// sites of other colors, so the update order inside a class is irrelevant.
/// The uniform for site n in color c is stream.child(c).engine().at(n).
inline void sample_potts_prior_sweep(LabelField& z, double beta, const Lattice& lattice,
                                     const Coloring& coloring, StreamKey stream) {
  z.check_against(lattice);
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
  const int k_classes = z.classes();
  if (k_classes == 1) return;

  std::vector<double> boltzmann(lattice.max_degree() + 1);
  for (std::size_t c = 0; c < boltzmann.size(); ++c)
    boltzmann[c] = std::exp(beta * static_cast<double>(c));

  for (int color = 0; color < coloring.n_colors; ++color) {
    const auto& sites = coloring.classes[color];
    const SplitMix64 gen = stream.child(static_cast<std::uint64_t>(color)).engine();
    const auto count = static_cast<std::ptrdiff_t>(sites.size());
#pragma omp parallel for schedule(static) if (sites.size() >= kParallelGrain)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const auto n = sites[static_cast<std::size_t>(i)];
      std::array<int, kMaxClasses> counts{};
      for (auto m : lattice.neighbors(n)) ++counts[z[m]];
      std::array<double, kMaxClasses> w;
      for (int k = 0; k < k_classes; ++k) w[k] = boltzmann[counts[k]];
      z[n] = sample_categorical({w.data(), static_cast<std::size_t>(k_classes)},
                                to_unit(gen.at(n)));
    }
  }
}

/// Random field with i.i.d. uniform labels.
inline LabelField uniform_label_field(std::size_t n_sites, int k_classes, StreamKey stream) {
  LabelField z(n_sites, k_classes);
  const auto gen = stream.engine();
  for (std::size_t n = 0; n < n_sites; ++n)
    z[n] = static_cast<std::uint8_t>(
        std::min<std::uint64_t>(static_cast<std::uint64_t>(to_unit(gen.at(n)) * k_classes),
                                static_cast<std::uint64_t>(k_classes - 1)));
  return z;
}

}  // namespace potts_abc
