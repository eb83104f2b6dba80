#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gbees/dynamics.hpp"
#include "gbees/solver.hpp"
#include "gbees/sparse_grid.hpp"

namespace gbees::reference {

/// Every lattice cell of the box [lo, lo + extent), stored in lexicographic order.
///
/// Serial, unoptimized reference for the sparse kernels: no active list, no halo,
/// flux formulas applied in their scatter form over every interior face of the box.
class DenseGrid {
 public:
  DenseGrid(GridGeometry geometry, CellIndex lo, std::vector<int> extent);

  /// Box covering every cell of `sparse` plus `pad` cells on each side.
  static DenseGrid enclosing(const SparseGrid& sparse, int pad);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::size_t dim() const noexcept { return geometry_.dim(); }
  std::size_t size() const noexcept { return p_.size(); }

  bool contains(const CellIndex& idx) const noexcept;
  /// Density at idx; cells outside the box read as 0.
  double value(const CellIndex& idx) const noexcept;
  double& at(const CellIndex& idx);
  CellIndex indexOf(std::size_t flat) const noexcept;
  std::size_t flatIndex(const CellIndex& idx) const noexcept;

  std::span<double> values() noexcept { return p_; }
  std::span<const double> values() const noexcept { return p_; }

  double totalMass() const noexcept;

 private:
  GridGeometry geometry_;
  CellIndex lo_;
  std::vector<int> extent_;
  std::vector<std::size_t> stride_;
  std::vector<double> p_;
};

/// One explicit step; returns the mass added by clamping negative values.
double step(DenseGrid& grid, const DynamicsModel& model, double dt, Limiter limiter,
            std::span<const double> muBar);

}  // namespace gbees::reference
