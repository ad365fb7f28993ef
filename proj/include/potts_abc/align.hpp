#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "label_field.hpp"

namespace potts_abc {

inline constexpr int kMaxAlignClasses = 8;

struct Alignment {
  /// permutation[k] is the truth class matched to estimated class k (0-based).
  std::vector<int> permutation;
  double accuracy = 0.0;
};

/// K x K table, entry (i, j) counts sites with estimate i and truth j.
inline std::vector<std::size_t> confusion_matrix(const LabelField& estimated,
                                                 const LabelField& truth, int k_classes) {
  if (estimated.size() != truth.size()) throw std::invalid_argument("label fields differ in size");
  const auto K = static_cast<std::size_t>(k_classes);
  std::vector<std::size_t> c(K * K, 0);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (estimated[n] >= K || truth[n] >= K) throw std::invalid_argument("label exceeds K");
    ++c[estimated[n] * K + truth[n]];
  }
  return c;
}

/// Best agreement over all K! relabelings of the estimate. Ties keep the
/// lexicographically first permutation, so the identity wins when it is optimal.
inline Alignment align_labels(const LabelField& estimated, const LabelField& truth,
                              int k_classes) {
  if (k_classes < 1 || k_classes > kMaxAlignClasses)
    throw std::invalid_argument("label alignment supports 1 <= K <= 8");
  if (truth.size() == 0) throw std::invalid_argument("empty label fields");
  const auto K = static_cast<std::size_t>(k_classes);
  const auto c = confusion_matrix(estimated, truth, k_classes);
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  Alignment best{perm, -1.0};
  std::size_t best_hits = 0;
  bool first = true;
  do {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < K; ++k) hits += c[k * K + static_cast<std::size_t>(perm[k])];
    if (first || hits > best_hits) {
      best_hits = hits;
      best.permutation = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.accuracy = static_cast<double>(best_hits) / static_cast<double>(truth.size());
  return best;
}

/// Estimate relabeled through an alignment.
inline LabelField apply_alignment(const LabelField& estimated, const Alignment& a) {
  LabelField out = estimated;
  for (std::size_t n = 0; n < out.size(); ++n)
    out[n] = static_cast<std::uint8_t>(a.permutation[estimated[n]]);
  return out;
}

}  // namespace potts_abc
