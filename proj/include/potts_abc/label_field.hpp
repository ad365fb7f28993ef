#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace potts_abc {

/// Largest class count supported by the samplers.
inline constexpr int kMaxClasses = 32;

/// Hidden label field z in {1..K}^N.
///
/// Labels are stored 0-based; `label()` and the I/O helpers speak 1-based.
class LabelField {
public:
  LabelField() = default;

  LabelField(std::size_t n_sites, int k_classes, std::uint8_t fill = 0)
      : labels_(n_sites, fill), k_(k_classes) {
    check_k(k_classes);
    if (fill >= k_classes) throw std::invalid_argument("fill label out of range");
  }

  /// From 0-based labels.
  LabelField(std::vector<std::uint8_t> zero_based, int k_classes)
      : labels_(std::move(zero_based)), k_(k_classes) {
    check_k(k_classes);
    for (auto v : labels_)
      if (v >= k_) throw std::invalid_argument("label out of range {1..K}");
  }

  static LabelField from_one_based(std::span<const int> one_based, int k_classes) {
    std::vector<std::uint8_t> v(one_based.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (one_based[i] < 1 || one_based[i] > k_classes)
        throw std::invalid_argument("label out of range {1..K}");
      v[i] = static_cast<std::uint8_t>(one_based[i] - 1);
    }
    return LabelField(std::move(v), k_classes);
  }

  std::size_t size() const noexcept { return labels_.size(); }
  int classes() const noexcept { return k_; }

  /// 0-based storage.
  std::uint8_t operator[](std::size_t n) const noexcept { return labels_[n]; }
  std::uint8_t& operator[](std::size_t n) noexcept { return labels_[n]; }
  std::span<const std::uint8_t> data() const noexcept { return labels_; }
  std::span<std::uint8_t> data() noexcept { return labels_; }

  /// 1-based label of site n.
  int label(std::size_t n) const { return static_cast<int>(labels_.at(n)) + 1; }

  std::vector<int> to_one_based() const {
    std::vector<int> out(labels_.size());
    std::transform(labels_.begin(), labels_.end(), out.begin(),
                   [](std::uint8_t v) { return static_cast<int>(v) + 1; });
    return out;
  }

  void check_against(const Lattice& lattice) const {
    if (labels_.size() != lattice.size())
      throw std::invalid_argument("label field has " + std::to_string(labels_.size()) +
                                  " sites, lattice has " + std::to_string(lattice.size()));
  }

  friend bool operator==(const LabelField&, const LabelField&) = default;

private:
  static void check_k(int k) {
    if (k < 1 || k > kMaxClasses)
      throw std::invalid_argument("class count must be in [1, " + std::to_string(kMaxClasses) +
                                  "]");
  }

  std::vector<std::uint8_t> labels_;
  int k_ = 1;
};

}  // namespace potts_abc
