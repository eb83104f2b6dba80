#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "gbees/bayes.hpp"
#include "gbees/sparse_grid.hpp"

namespace gbees {

// Snapshot table:
//   # t=<time> dim=<n> spacing=<h0,h1,...> threshold=<eps> mass=<m>
//   # origin=<o0,o1,...>
//   i0 i1 ... x0 x1 ... p          (one row per active cell, key order)

void writeSnapshot(std::ostream& out, const SparseGrid& grid, double t);
void writeSnapshot(const std::filesystem::path& path, const SparseGrid& grid, double t);

struct Snapshot {
  double t = 0.0;
  SparseGrid grid;
};

/// Throws IoError on malformed input or an unreadable file.
Snapshot readSnapshot(std::istream& in);
Snapshot readSnapshot(const std::filesystem::path& path);

/// Measurement schedule rows `t y1 [y2 ...] noiseStd1 [noiseStd2 ...]`, `#` comments.
/// Each row observes `components` of the state.
std::vector<MeasurementEvent> readSchedule(std::istream& in, std::span<const std::size_t> components);
std::vector<MeasurementEvent> readSchedule(const std::filesystem::path& path,
                                           std::span<const std::size_t> components);
void writeSchedule(std::ostream& out, std::span<const MeasurementEvent> events);

}  // namespace gbees
