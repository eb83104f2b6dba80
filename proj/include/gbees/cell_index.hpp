#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace gbees {

/// Largest phase-space dimension supported by the fixed-size index and cell records.
inline constexpr std::size_t kMaxDim = 6;

/// Location of a cell on the unbounded Cartesian lattice.
///
/// Ordering is lexicographic on (coords[0], coords[1], ...). Indices of different
/// dimension never share a grid, so the dimension acts only as a leading tiebreak.
class CellIndex {
 public:
  CellIndex() = default;

  explicit CellIndex(std::size_t dim) : dim_(static_cast<std::uint8_t>(dim)) {
    if (dim == 0 || dim > kMaxDim) throw std::invalid_argument("CellIndex: dimension out of range");
  }

  CellIndex(std::initializer_list<std::int32_t> coords) : CellIndex(coords.size()) {
    std::size_t d = 0;
    for (auto c : coords) coords_[d++] = c;
  }

  std::size_t dim() const noexcept { return dim_; }

  std::int32_t operator[](std::size_t d) const noexcept { return coords_[d]; }
  std::int32_t& operator[](std::size_t d) noexcept { return coords_[d]; }

  /// Index displaced by `delta` cells along direction `d`.
  CellIndex shifted(std::size_t d, std::int32_t delta) const noexcept {
    CellIndex out = *this;
    out.coords_[d] += delta;
    return out;
  }

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;

 private:
  std::uint8_t dim_ = 0;
  std::array<std::int32_t, kMaxDim> coords_{};
};

}  // namespace gbees
