#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "gbees/cell_index.hpp"

namespace gbees {

/// Fixed-capacity phase-space vector; only the first `dim` entries are meaningful.
using Vec = std::array<double, kMaxDim>;

/// Maps lattice indices to phase-space coordinates.
class GridGeometry {
 public:
  GridGeometry(std::vector<double> spacing, std::vector<double> origin);

  std::size_t dim() const noexcept { return spacing_.size(); }
  double spacing(std::size_t d) const noexcept { return spacing_[d]; }
  double origin(std::size_t d) const noexcept { return origin_[d]; }
  const std::vector<double>& spacing() const noexcept { return spacing_; }
  const std::vector<double>& origin() const noexcept { return origin_; }

  double cellVolume() const noexcept { return volume_; }

  /// Phase-space coordinates of the center of `idx`.
  Vec center(const CellIndex& idx) const noexcept;

  /// Nearest lattice index to a phase-space point.
  CellIndex nearestIndex(std::span<const double> x) const;

 private:
  std::vector<double> spacing_;
  std::vector<double> origin_;
  double volume_ = 0.0;
};

/// One record of the active-cell list.
///
/// Neighbor links are raw pointers into the owning grid's node storage; they are
/// maintained by SparseGrid and are null when the neighbor is not in the list.
struct Cell {
  CellIndex index;
  double p = 0.0;
  /// Accumulated flux through the low face in each direction.
  Vec fluxLow{};
  /// Drift component normal to the low face, evaluated at the face center.
  Vec velocityLow{};
  /// instanceId of the model that filled velocityLow; 0 when never filled.
  std::uint64_t velocitySource = 0;
  std::array<Cell*, kMaxDim> low{};
  std::array<Cell*, kMaxDim> high{};

  // Scratch used by the step kernels and pruning.
  double pNext = 0.0;
  bool keep = false;

  /// Link to the neighbor at index + sign * e_d.
  Cell* neighbor(std::size_t d, int sign) const noexcept { return sign > 0 ? high[d] : low[d]; }
};

/// Ordered map of active cells with threshold-driven halo maintenance.
///
/// Invariant after expand(): every cell with p > threshold has all 2n edge
/// neighbors and all 4 * n(n-1)/2 pairwise corner neighbors in the list.
class SparseGrid {
 public:
  using Map = std::map<CellIndex, Cell>;

  SparseGrid(GridGeometry geometry, double threshold);

  SparseGrid(const SparseGrid& other);
  SparseGrid& operator=(const SparseGrid& other);
  SparseGrid(SparseGrid&&) noexcept = default;
  SparseGrid& operator=(SparseGrid&&) noexcept = default;

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::size_t dim() const noexcept { return geometry_.dim(); }
  double threshold() const noexcept { return threshold_; }
  void setThreshold(double eps);

  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  /// Inserts `idx` with density `p0` and wires its edge links. Existing cells are
  /// returned unchanged.
  Cell& insert(const CellIndex& idx, double p0 = 0.0);

  Cell* find(const CellIndex& idx);
  const Cell* find(const CellIndex& idx) const;

  /// Cell at idx + s1*e_{d1} + s2*e_{d2}, reached by following two links.
  /// Throws std::invalid_argument when d1 == d2.
  const Cell* cornerNeighbor(const CellIndex& idx, std::size_t d1, std::size_t d2, int s1,
                             int s2) const;

  /// Adds the edge and pairwise-corner halo of every supra-threshold cell.
  /// Returns the number of cells inserted.
  std::size_t expand();

  /// Removes sub-threshold cells outside the halo of every supra-threshold cell.
  /// Returns the probability mass carried by the removed cells.
  double prune();

  double totalMass() const noexcept;

  /// Removes every cell.
  void clear() noexcept;

  Map::iterator begin() noexcept { return cells_.begin(); }
  Map::iterator end() noexcept { return cells_.end(); }
  Map::const_iterator begin() const noexcept { return cells_.begin(); }
  Map::const_iterator end() const noexcept { return cells_.end(); }

  /// Cell records in key order, cached between structural changes. Intended for
  /// index-based (parallel) loops.
  std::span<Cell* const> cells();
  std::span<const Cell* const> cells() const;

 private:
  void erase(Map::iterator it);
  void markHalo(Cell& c);
  void rebuildCache() const;

  GridGeometry geometry_;
  double threshold_;
  Map cells_;
  mutable std::vector<Cell*> flat_;
  mutable bool flatDirty_ = true;
};

}  // namespace gbees
