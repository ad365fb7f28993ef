#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "label_field.hpp"
#include "lattice.hpp"

namespace potts_abc {

/// Observation vector r in (0, inf)^N.
class ObservationField {
public:
  ObservationField() = default;

  explicit ObservationField(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t n = 0; n < values_.size(); ++n)
      if (!(values_[n] > 0.0) || !std::isfinite(values_[n]))
        throw std::invalid_argument("observation " + std::to_string(n) +
                                    " is not strictly positive and finite");
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t n) const noexcept { return values_[n]; }
  std::span<const double> values() const noexcept { return values_; }

  void check_against(const Lattice& lattice) const {
    if (values_.size() != lattice.size())
      throw std::invalid_argument("observation field has " + std::to_string(values_.size()) +
                                  " sites, lattice has " + std::to_string(lattice.size()));
  }

private:
  std::vector<double> values_;
};

/// Observations currently assigned to class k (0-based).
inline std::vector<double> class_observations(const ObservationField& r, const LabelField& z,
                                              int k) {
  if (r.size() != z.size()) throw std::invalid_argument("observation/label size mismatch");
  std::vector<double> out;
  for (std::size_t n = 0; n < r.size(); ++n)
    if (z[n] == k) out.push_back(r[n]);
  return out;
}

}  // namespace potts_abc
