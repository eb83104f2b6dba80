#include "gbees/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "gbees/errors.hpp"
#include "gbees/format.hpp"

namespace gbees {
namespace {

std::string joinNumbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + formatNumber(v[i]);
  return s;
}

double parseNumber(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw IoError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  return v;
}

std::vector<double> parseList(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t stop = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(parseNumber(text.substr(start, stop - start), what));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// key=value tokens of a comment header line.
std::map<std::string, std::string> headerFields(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream tokens(line.substr(1));
  std::string tok;
  while (tokens >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return fields;
}

}  // namespace

void writeSnapshot(std::ostream& out, const SparseGrid& grid, double t) {
  const GridGeometry& geo = grid.geometry();
  out << "# t=" << formatNumber(t) << " dim=" << grid.dim() << " spacing=" << joinNumbers(geo.spacing())
      << " threshold=" << formatNumber(grid.threshold()) << " mass=" << formatNumber(grid.totalMass()) << '\n';
  out << "# origin=" << joinNumbers(geo.origin()) << '\n';
  std::string row;
  for (const auto& [idx, cell] : grid) {
    row.clear();
    for (std::size_t d = 0; d < grid.dim(); ++d) row += std::to_string(idx[d]) + ' ';
    const Vec x = geo.center(idx);
    for (std::size_t d = 0; d < grid.dim(); ++d) row += formatNumber(x[d]) + ' ';
    row += formatNumber(cell.p);
    out << row << '\n';
  }
}

void writeSnapshot(const std::filesystem::path& path, const SparseGrid& grid, double t) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open snapshot file " + path.string() + " for writing");
  writeSnapshot(out, grid, t);
  if (!out) throw IoError("failed writing snapshot " + path.string());
}

Snapshot readSnapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#') throw IoError("snapshot: missing header line");
  auto fields = headerFields(line);
  for (const char* key : {"t", "dim", "spacing", "threshold"})
    if (!fields.count(key)) throw IoError(std::string("snapshot header lacks '") + key + "'");
  const double t = parseNumber(fields["t"], "t");
  const auto dim = static_cast<std::size_t>(parseNumber(fields["dim"], "dim"));
  const auto spacing = parseList(fields["spacing"], "spacing");
  if (spacing.size() != dim) throw IoError("snapshot: spacing does not match dim");
  std::vector<double> origin(dim, 0.0);

  struct Row {
    CellIndex idx;
    std::vector<double> x;
    double p;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto extra = headerFields(line);
      if (extra.count("origin")) origin = parseList(extra["origin"], "origin");
      continue;
    }
    std::istringstream cols(line);
    Row row{CellIndex(dim), std::vector<double>(dim), 0.0};
    long long v = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(cols >> v)) throw IoError("snapshot: bad index column in '" + line + "'");
      row.idx[d] = static_cast<std::int32_t>(v);
    }
    std::string tok;
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(cols >> tok)) throw IoError("snapshot: bad coordinate column in '" + line + "'");
      row.x[d] = parseNumber(tok, "coordinate");
    }
    if (!(cols >> tok)) throw IoError("snapshot: missing density in '" + line + "'");
    row.p = parseNumber(tok, "density");
    rows.push_back(std::move(row));
  }
  if (origin.size() != dim) throw IoError("snapshot: origin does not match dim");
  Snapshot snap{t, SparseGrid(GridGeometry(spacing, origin), parseNumber(fields["threshold"], "threshold"))};
  for (const Row& row : rows) snap.grid.insert(row.idx, row.p);
  return snap;
}

Snapshot readSnapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open snapshot " + path.string());
  return readSnapshot(in);
}

std::vector<MeasurementEvent> readSchedule(std::istream& in, std::span<const std::size_t> components) {
  std::vector<MeasurementEvent> events;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream cols(line);
    std::vector<double> values;
    std::string tok;
    while (cols >> tok) values.push_back(parseNumber(tok, "schedule value"));
    if (values.empty()) continue;
    const std::size_t m = components.size();
    if (values.size() != 1 + 2 * m)
      throw IoError("schedule line " + std::to_string(lineNo) + ": expected " + std::to_string(1 + 2 * m) +
                    " columns, found " + std::to_string(values.size()));
    MeasurementEvent ev;
    ev.time = values[0];
    ev.y.assign(values.begin() + 1, values.begin() + 1 + static_cast<std::ptrdiff_t>(m));
    std::vector<double> noise(values.begin() + 1 + static_cast<std::ptrdiff_t>(m), values.end());
    try {
      ev.model = std::make_shared<const GaussianMeasurementModel>(GaussianMeasurementModel::observingComponents(
          std::vector<std::size_t>(components.begin(), components.end()), std::move(noise)));
    } catch (const std::invalid_argument& e) {
      throw IoError("schedule line " + std::to_string(lineNo) + ": " + e.what());
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<MeasurementEvent> readSchedule(const std::filesystem::path& path,
                                           std::span<const std::size_t> components) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measurement schedule " + path.string());
  return readSchedule(in, components);
}

void writeSchedule(std::ostream& out, std::span<const MeasurementEvent> events) {
  out << "# t y... noiseStd...\n";
  for (const auto& ev : events) {
    out << formatNumber(ev.time);
    for (double y : ev.y) out << ' ' << formatNumber(y);
    for (double s : ev.model->noiseStd()) out << ' ' << formatNumber(s);
    out << '\n';
  }
}

}  // namespace gbees
