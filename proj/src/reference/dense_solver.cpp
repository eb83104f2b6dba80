#include "gbees/reference/dense_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gbees::reference {

DenseGrid::DenseGrid(GridGeometry geometry, CellIndex lo, std::vector<int> extent)
    : geometry_(std::move(geometry)), lo_(lo), extent_(std::move(extent)) {
  const std::size_t n = geometry_.dim();
  if (lo_.dim() != n || extent_.size() != n) throw std::invalid_argument("DenseGrid: dimension mismatch");
  stride_.assign(n, 1);
  std::size_t total = 1;
  for (std::size_t d = n; d-- > 0;) {
    if (extent_[d] <= 0) throw std::invalid_argument("DenseGrid: extent must be positive");
    stride_[d] = total;
    total *= static_cast<std::size_t>(extent_[d]);
  }
  p_.assign(total, 0.0);
}

DenseGrid DenseGrid::enclosing(const SparseGrid& sparse, int pad) {
  const std::size_t n = sparse.dim();
  CellIndex lo(n);
  CellIndex hi(n);
  for (std::size_t d = 0; d < n; ++d) {
    lo[d] = std::numeric_limits<std::int32_t>::max();
    hi[d] = std::numeric_limits<std::int32_t>::min();
  }
  for (const auto& [idx, cell] : sparse) {
    for (std::size_t d = 0; d < n; ++d) {
      lo[d] = std::min(lo[d], idx[d]);
      hi[d] = std::max(hi[d], idx[d]);
    }
  }
  std::vector<int> extent(n);
  for (std::size_t d = 0; d < n; ++d) {
    lo[d] -= pad;
    extent[d] = hi[d] + pad - lo[d] + 1;
  }
  DenseGrid dense(sparse.geometry(), lo, extent);
  for (const auto& [idx, cell] : sparse) dense.at(idx) = cell.p;
  return dense;
}

bool DenseGrid::contains(const CellIndex& idx) const noexcept {
  for (std::size_t d = 0; d < dim(); ++d) {
    const int off = idx[d] - lo_[d];
    if (off < 0 || off >= extent_[d]) return false;
  }
  return true;
}

std::size_t DenseGrid::flatIndex(const CellIndex& idx) const noexcept {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < dim(); ++d) flat += static_cast<std::size_t>(idx[d] - lo_[d]) * stride_[d];
  return flat;
}

CellIndex DenseGrid::indexOf(std::size_t flat) const noexcept {
  CellIndex idx(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    idx[d] = lo_[d] + static_cast<std::int32_t>(flat / stride_[d]);
    flat %= stride_[d];
  }
  return idx;
}

double DenseGrid::value(const CellIndex& idx) const noexcept {
  return contains(idx) ? p_[flatIndex(idx)] : 0.0;
}

double& DenseGrid::at(const CellIndex& idx) {
  if (!contains(idx)) throw std::out_of_range("DenseGrid::at: index outside box");
  return p_[flatIndex(idx)];
}

double DenseGrid::totalMass() const noexcept {
  double sum = 0.0;
  for (double v : p_) sum += v;
  return sum * geometry_.cellVolume();
}

double step(DenseGrid& grid, const DynamicsModel& model, double dt, Limiter limiter,
            std::span<const double> muBar) {
  const std::size_t n = grid.dim();
  const std::size_t cells = grid.size();
  const GridGeometry& geo = grid.geometry();

  // vel[a][k]: a-velocity on the low a-face of cell k; flux[a][k] likewise.
  std::vector<std::vector<double>> vel(n, std::vector<double>(cells));
  std::vector<std::vector<double>> flux(n, std::vector<double>(cells, 0.0));
  for (std::size_t k = 0; k < cells; ++k)
    for (std::size_t a = 0; a < n; ++a) vel[a][k] = faceVelocity(model, geo, grid.indexOf(k), a);

  auto p = [&](const CellIndex& idx) { return grid.value(idx); };
  auto in = [&](const CellIndex& idx) { return grid.contains(idx); };
  auto at = [&](const CellIndex& idx) { return grid.flatIndex(idx); };
  auto plus = [](double v) { return std::max(v, 0.0); };
  auto minus = [](double v) { return std::min(v, 0.0); };

  // Godunov initialization on interior faces.
  for (std::size_t k = 0; k < cells; ++k) {
    const CellIndex idx = grid.indexOf(k);
    for (std::size_t a = 0; a < n; ++a) {
      const CellIndex lo = idx.shifted(a, -1);
      if (!in(lo)) continue;
      flux[a][k] = plus(vel[a][k]) * p(lo) + minus(vel[a][k]) * p(idx);
    }
  }

  // Corner transport upwind: the eight updates for each direction pair (x = a, y = b),
  // with (i, j) the visited cell. Updates touching a face outside the box are skipped.
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dx = geo.spacing(a);
      const double dy = geo.spacing(b);
      for (std::size_t k = 0; k < cells; ++k) {
        const CellIndex ij = grid.indexOf(k);
        const CellIndex im1j = ij.shifted(a, -1);
        const CellIndex ip1j = ij.shifted(a, +1);
        const CellIndex ijm1 = ij.shifted(b, -1);
        const CellIndex ijp1 = ij.shifted(b, +1);
        const CellIndex im1jm1 = im1j.shifted(b, -1);
        const CellIndex ip1jm1 = ip1j.shifted(b, -1);
        const CellIndex im1jp1 = im1j.shifted(b, +1);

        if (in(ijm1)) {
          const double dp = p(ij) - p(ijm1);  // dp_{i,j-1/2}
          const double v = vel[b][k];          // v_{i,j-1/2}
          if (in(im1jm1))  // F_{i-1/2,j-1}
            flux[a][at(ijm1)] -= dt * minus(vel[a][at(ijm1)]) * minus(v) / 2.0 * dp / dy;
          if (in(ip1jm1))  // F_{i+1/2,j-1}
            flux[a][at(ip1jm1)] -= dt * plus(vel[a][at(ip1jm1)]) * minus(v) / 2.0 * dp / dy;
          if (in(im1j))  // F_{i-1/2,j}
            flux[a][k] -= dt * minus(vel[a][k]) * plus(v) / 2.0 * dp / dy;
          if (in(ip1j))  // F_{i+1/2,j}
            flux[a][at(ip1j)] -= dt * plus(vel[a][at(ip1j)]) * plus(v) / 2.0 * dp / dy;
        }
        if (in(im1j)) {
          const double dp = p(ij) - p(im1j);  // dp_{i-1/2,j}
          const double u = vel[a][k];          // u_{i-1/2,j}
          if (in(im1jm1))  // G_{i-1,j-1/2}
            flux[b][at(im1j)] -= dt * minus(vel[b][at(im1j)]) * minus(u) / 2.0 * dp / dx;
          if (in(im1jp1))  // G_{i-1,j+1/2}
            flux[b][at(im1jp1)] -= dt * plus(vel[b][at(im1jp1)]) * minus(u) / 2.0 * dp / dx;
          if (in(ijm1))  // G_{i,j-1/2}
            flux[b][k] -= dt * minus(vel[b][k]) * plus(u) / 2.0 * dp / dx;
          if (in(ijp1))  // G_{i,j+1/2}
            flux[b][at(ijp1)] -= dt * plus(vel[b][at(ijp1)]) * plus(u) / 2.0 * dp / dx;
        }
      }
    }
  }

  // High-resolution corrections and diffusion.
  for (std::size_t k = 0; k < cells; ++k) {
    const CellIndex idx = grid.indexOf(k);
    for (std::size_t a = 0; a < n; ++a) {
      const CellIndex lo = idx.shifted(a, -1);
      if (!in(lo)) continue;
      const double h = geo.spacing(a);
      const double u = vel[a][k];
      const double dp = p(idx) - p(lo);
      double theta = 0.0;
      if (dp != 0.0) {
        theta = u >= 0.0 ? (p(lo) - p(lo.shifted(a, -1))) / dp : (p(idx.shifted(a, +1)) - p(idx)) / dp;
      }
      flux[a][k] += dt * std::abs(u) / 2.0 * (h / dt - std::abs(u)) * dp / h * limiterPhi(theta, limiter);
      flux[a][k] -= muBar[a] * dp / h;
    }
  }

  std::vector<double> next(cells);
  double clamped = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    const CellIndex idx = grid.indexOf(k);
    double rhs = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const CellIndex hi = idx.shifted(a, +1);
      const double fHigh = in(hi) ? flux[a][at(hi)] : 0.0;
      rhs -= (fHigh - flux[a][k]) / geo.spacing(a);
    }
    next[k] = grid.values()[k] + dt * rhs;
    if (next[k] < 0.0) {
      clamped -= next[k];
      next[k] = 0.0;
    }
  }
  std::copy(next.begin(), next.end(), grid.values().begin());
  return clamped * geo.cellVolume();
}

}  // namespace gbees::reference
