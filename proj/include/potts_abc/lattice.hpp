#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace potts_abc {

enum class Neighborhood { n4, n8, n6, n14 };

inline std::string_view to_string(Neighborhood nb) {
  switch (nb) {
    case Neighborhood::n4: return "N4";
    case Neighborhood::n8: return "N8";
    case Neighborhood::n6: return "N6";
    case Neighborhood::n14: return "N14";
  }
  return "?";
}

inline Neighborhood parse_neighborhood(std::string_view s) {
  if (s == "N4" || s == "n4" || s == "4") return Neighborhood::n4;
  if (s == "N8" || s == "n8" || s == "8") return Neighborhood::n8;
  if (s == "N6" || s == "n6" || s == "6") return Neighborhood::n6;
  if (s == "N14" || s == "n14" || s == "14") return Neighborhood::n14;
  throw std::invalid_argument("unknown neighborhood '" + std::string(s) + "'");
}

constexpr int dimension_of(Neighborhood nb) {
  return (nb == Neighborhood::n4 || nb == Neighborhood::n8) ? 2 : 3;
}

/// Regular 2D/3D site grid with a free boundary.
///
/// Sites are numbered row-major (slice-major in 3D): dims[0] varies slowest.
/// The neighbor lists are precomputed in CSR form and sorted ascending.
class Lattice {
public:
  Lattice(std::vector<std::size_t> dims, Neighborhood nb) : dims_(std::move(dims)), nb_(nb) {
    if (dims_.size() != 2 && dims_.size() != 3)
      throw std::invalid_argument("lattice needs 2 or 3 dimensions");
    if (static_cast<int>(dims_.size()) != dimension_of(nb))
      throw std::invalid_argument("neighborhood " + std::string(to_string(nb)) +
                                  " does not match a " + std::to_string(dims_.size()) +
                                  "D lattice");
    for (auto d : dims_)
      if (d == 0) throw std::invalid_argument("lattice dimensions must be positive");
    size_ = std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>{});
    if (size_ > std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument("lattice too large");
    build();
  }

  std::size_t size() const noexcept { return size_; }
  int ndim() const noexcept { return static_cast<int>(dims_.size()); }
  std::span<const std::size_t> dims() const noexcept { return dims_; }
  Neighborhood neighborhood() const noexcept { return nb_; }

  /// V(n), sorted ascending.
  std::span<const std::uint32_t> neighbors(std::size_t n) const {
    if (n >= size_) throw std::out_of_range("site index " + std::to_string(n) + " out of range");
    return {adj_.data() + offsets_[n], adj_.data() + offsets_[n + 1]};
  }

  std::size_t degree(std::size_t n) const { return neighbors(n).size(); }
  std::size_t max_degree() const noexcept { return max_degree_; }
  /// Sum of |V(n)| over all sites; the largest attainable sufficient statistic.
  std::size_t total_degree() const noexcept { return adj_.size(); }

  /// Coordinates of site n, padded to three entries (slowest axis first).
  std::array<std::size_t, 3> coords(std::size_t n) const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (int a = ndim() - 1; a >= 0; --a) {
      c[a] = n % dims_[a];
      n /= dims_[a];
    }
    return c;
  }

  std::size_t index(std::span<const std::size_t> c) const {
    std::size_t n = 0;
    for (int a = 0; a < ndim(); ++a) n = n * dims_[a] + c[a];
    return n;
  }

  /// Neighbor offsets for this neighborhood, in coordinate order.
  std::vector<std::array<int, 3>> offsets() const {
    std::vector<std::array<int, 3>> out;
    switch (nb_) {
      case Neighborhood::n4:
        out = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}};
        break;
      case Neighborhood::n8:
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b)
            if (a != 0 || b != 0) out.push_back({a, b, 0});
        break;
      case Neighborhood::n6:
        out = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
        break;
      case Neighborhood::n14:
        // six face neighbors plus the eight corner neighbors
        out = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
        for (int a : {-1, 1})
          for (int b : {-1, 1})
            for (int c : {-1, 1}) out.push_back({a, b, c});
        break;
    }
    return out;
  }

private:
  void build() {
    const auto offs = offsets();
    offsets_.assign(size_ + 1, 0);
    adj_.clear();
    adj_.reserve(size_ * offs.size());
    std::vector<std::uint32_t> nbrs;
    for (std::size_t n = 0; n < size_; ++n) {
      const auto c = coords(n);
      nbrs.clear();
      for (const auto& o : offs) {
        std::array<std::size_t, 3> q{};
        bool inside = true;
        for (int a = 0; a < ndim(); ++a) {
          const auto v = static_cast<long long>(c[a]) + o[a];
          if (v < 0 || v >= static_cast<long long>(dims_[a])) {
            inside = false;
            break;
          }
          q[a] = static_cast<std::size_t>(v);
        }
        if (inside) nbrs.push_back(static_cast<std::uint32_t>(index(q)));
      }
      std::sort(nbrs.begin(), nbrs.end());
      adj_.insert(adj_.end(), nbrs.begin(), nbrs.end());
      offsets_[n + 1] = adj_.size();
      max_degree_ = std::max(max_degree_, nbrs.size());
    }
  }

  std::vector<std::size_t> dims_;
  Neighborhood nb_;
  std::size_t size_ = 0;
  std::size_t max_degree_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adj_;
};

/// Free function form of Lattice::neighbors.
inline std::span<const std::uint32_t> neighbors(const Lattice& lattice, std::size_t n) {
  return lattice.neighbors(n);
}

/// Partition of the sites into independent sets.
struct Coloring {
  std::vector<std::uint8_t> color_of;
  int n_colors = 0;
  /// Sites of each color, ascending.
  std::vector<std::vector<std::uint32_t>> classes;

  bool is_valid_for(const Lattice& lattice) const {
    if (color_of.size() != lattice.size()) return false;
    for (std::size_t n = 0; n < lattice.size(); ++n) {
      if (color_of[n] >= n_colors) return false;
      for (auto m : lattice.neighbors(n))
        if (color_of[m] == color_of[n]) return false;
    }
    return true;
  }
};

/// Coloring for chromatic sweeps.
///
/// N4 and N6 use the coordinate-sum parity (two colors). N8 and N14 use a
/// greedy coloring in site order; validity is checked before returning.
inline Coloring chromatic_coloring(const Lattice& lattice) {
  Coloring col;
  const auto n_sites = lattice.size();
  col.color_of.assign(n_sites, 0);
  if (lattice.neighborhood() == Neighborhood::n4 || lattice.neighborhood() == Neighborhood::n6) {
    for (std::size_t n = 0; n < n_sites; ++n) {
      const auto c = lattice.coords(n);
      col.color_of[n] = static_cast<std::uint8_t>((c[0] + c[1] + c[2]) % 2);
    }
    col.n_colors = n_sites > 1 ? 2 : 1;
  } else {
    int used = 0;
    std::vector<bool> taken;
    for (std::size_t n = 0; n < n_sites; ++n) {
      taken.assign(lattice.max_degree() + 1, false);
      for (auto m : lattice.neighbors(n))
        if (m < n && col.color_of[m] < taken.size()) taken[col.color_of[m]] = true;
      std::uint8_t c = 0;
      while (taken[c]) ++c;
      col.color_of[n] = c;
      used = std::max(used, c + 1);
    }
    col.n_colors = used;
  }
  col.classes.assign(col.n_colors, {});
  for (std::size_t n = 0; n < n_sites; ++n)
    col.classes[col.color_of[n]].push_back(static_cast<std::uint32_t>(n));
  if (!col.is_valid_for(lattice)) throw std::logic_error("chromatic coloring is invalid");
  return col;
}

}  // namespace potts_abc
