#include "gbees/sparse_grid.hpp"

#include <cmath>
#include <stdexcept>

namespace gbees {

GridGeometry::GridGeometry(std::vector<double> spacing, std::vector<double> origin)
    : spacing_(std::move(spacing)), origin_(std::move(origin)) {
  if (spacing_.empty() || spacing_.size() > kMaxDim)
    throw std::invalid_argument("GridGeometry: dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  if (origin_.empty()) origin_.assign(spacing_.size(), 0.0);
  if (origin_.size() != spacing_.size())
    throw std::invalid_argument("GridGeometry: origin and spacing differ in dimension");
  volume_ = 1.0;
  for (double h : spacing_) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("GridGeometry: spacing must be positive");
    volume_ *= h;
  }
}

Vec GridGeometry::center(const CellIndex& idx) const noexcept {
  Vec x{};
  for (std::size_t d = 0; d < dim(); ++d) x[d] = origin_[d] + idx[d] * spacing_[d];
  return x;
}

CellIndex GridGeometry::nearestIndex(std::span<const double> x) const {
  if (x.size() < dim()) throw std::invalid_argument("GridGeometry::nearestIndex: point too short");
  CellIndex idx(dim());
  for (std::size_t d = 0; d < dim(); ++d)
    idx[d] = static_cast<std::int32_t>(std::lround((x[d] - origin_[d]) / spacing_[d]));
  return idx;
}

SparseGrid::SparseGrid(GridGeometry geometry, double threshold)
    : geometry_(std::move(geometry)), threshold_(0.0) {
  setThreshold(threshold);
}

SparseGrid::SparseGrid(const SparseGrid& other)
    : geometry_(other.geometry_), threshold_(other.threshold_), cells_(other.cells_) {
  // Copied links still point into `other`; re-resolve them against our own nodes.
  for (auto& [idx, cell] : cells_) {
    for (std::size_t d = 0; d < dim(); ++d) {
      if (cell.low[d]) cell.low[d] = &cells_.find(idx.shifted(d, -1))->second;
      if (cell.high[d]) cell.high[d] = &cells_.find(idx.shifted(d, +1))->second;
    }
  }
}

SparseGrid& SparseGrid::operator=(const SparseGrid& other) {
  if (this != &other) {
    SparseGrid tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void SparseGrid::setThreshold(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("SparseGrid: threshold must be nonnegative");
  threshold_ = eps;
}

Cell& SparseGrid::insert(const CellIndex& idx, double p0) {
  if (idx.dim() != dim()) throw std::invalid_argument("SparseGrid::insert: index dimension mismatch");
  auto [it, inserted] = cells_.try_emplace(idx);
  Cell& cell = it->second;
  if (!inserted) return cell;
  flatDirty_ = true;
  cell.index = idx;
  cell.p = p0;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (auto lo = cells_.find(idx.shifted(d, -1)); lo != cells_.end()) {
      cell.low[d] = &lo->second;
      lo->second.high[d] = &cell;
    }
    if (auto hi = cells_.find(idx.shifted(d, +1)); hi != cells_.end()) {
      cell.high[d] = &hi->second;
      hi->second.low[d] = &cell;
    }
  }
  return cell;
}

Cell* SparseGrid::find(const CellIndex& idx) {
  auto it = cells_.find(idx);
  return it == cells_.end() ? nullptr : &it->second;
}

const Cell* SparseGrid::find(const CellIndex& idx) const {
  auto it = cells_.find(idx);
  return it == cells_.end() ? nullptr : &it->second;
}

const Cell* SparseGrid::cornerNeighbor(const CellIndex& idx, std::size_t d1, std::size_t d2, int s1,
                                       int s2) const {
  if (d1 == d2) throw std::invalid_argument("cornerNeighbor: directions must differ");
  if (d1 >= dim() || d2 >= dim()) throw std::invalid_argument("cornerNeighbor: direction out of range");
  const Cell* c = find(idx);
  if (!c) return nullptr;
  const Cell* hop = c->neighbor(d1, s1);
  return hop ? hop->neighbor(d2, s2) : nullptr;
}

std::size_t SparseGrid::expand() {
  std::vector<Cell*> supra;
  for (Cell* cell : cells())
    if (cell->p > threshold_) supra.push_back(cell);

  const std::size_t before = cells_.size();
  const std::size_t n = dim();
  for (Cell* c : supra) {
    for (std::size_t d = 0; d < n; ++d) {
      if (!c->low[d]) insert(c->index.shifted(d, -1));
      if (!c->high[d]) insert(c->index.shifted(d, +1));
    }
    for (std::size_t d1 = 0; d1 < n; ++d1) {
      for (std::size_t d2 = d1 + 1; d2 < n; ++d2) {
        for (int s1 : {-1, 1}) {
          Cell* hop = c->neighbor(d1, s1);
          for (int s2 : {-1, 1}) {
            if (!hop->neighbor(d2, s2)) insert(c->index.shifted(d1, s1).shifted(d2, s2));
          }
        }
      }
    }
  }
  return cells_.size() - before;
}

void SparseGrid::markHalo(Cell& c) {
  c.keep = true;
  const std::size_t n = dim();
  for (std::size_t d1 = 0; d1 < n; ++d1) {
    for (int s1 : {-1, 1}) {
      Cell* hop = c.neighbor(d1, s1);
      if (!hop) continue;
      hop->keep = true;
      for (std::size_t d2 = d1 + 1; d2 < n; ++d2) {
        for (int s2 : {-1, 1}) {
          if (Cell* corner = hop->neighbor(d2, s2)) corner->keep = true;
        }
      }
    }
  }
  // Corners are reachable through either edge; when the d1 hop is missing, try d2 first.
  for (std::size_t d1 = 0; d1 < n; ++d1) {
    for (std::size_t d2 = d1 + 1; d2 < n; ++d2) {
      for (int s2 : {-1, 1}) {
        Cell* hop = c.neighbor(d2, s2);
        if (!hop) continue;
        for (int s1 : {-1, 1}) {
          if (Cell* corner = hop->neighbor(d1, s1)) corner->keep = true;
        }
      }
    }
  }
}

double SparseGrid::prune() {
  const auto all = cells();
  for (Cell* cell : all) cell->keep = false;
  for (Cell* cell : all)
    if (cell->p > threshold_) markHalo(*cell);

  double removed = 0.0;
  for (auto it = cells_.begin(); it != cells_.end();) {
    if (it->second.keep) {
      ++it;
      continue;
    }
    removed += it->second.p;
    auto next = std::next(it);
    erase(it);
    it = next;
  }
  return removed * geometry_.cellVolume();
}

void SparseGrid::erase(Map::iterator it) {
  Cell& cell = it->second;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (cell.low[d]) cell.low[d]->high[d] = nullptr;
    if (cell.high[d]) cell.high[d]->low[d] = nullptr;
  }
  cells_.erase(it);
  flatDirty_ = true;
}

double SparseGrid::totalMass() const noexcept {
  double sum = 0.0;
  for (const Cell* cell : cells()) sum += cell->p;
  return sum * geometry_.cellVolume();
}

void SparseGrid::clear() noexcept {
  cells_.clear();
  flat_.clear();
  flatDirty_ = false;
}

void SparseGrid::rebuildCache() const {
  flat_.clear();
  flat_.reserve(cells_.size());
  for (const auto& [idx, cell] : cells_) flat_.push_back(const_cast<Cell*>(&cell));
  flatDirty_ = false;
}

std::span<Cell* const> SparseGrid::cells() {
  if (flatDirty_) rebuildCache();
  return flat_;
}

std::span<const Cell* const> SparseGrid::cells() const {
  if (flatDirty_) rebuildCache();
  return {flat_.data(), flat_.size()};
}

}  // namespace gbees
