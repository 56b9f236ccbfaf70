#ifndef CTLIMPUTE_SERIES_HPP
#define CTLIMPUTE_SERIES_HPP

/** @file
 * Observation series: delimited-text parsing, gap segmentation and
 * output writing with per-record origin flags.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctlimpute/error.hpp"
#include "ctlimpute/linalg.hpp"

namespace ctlimpute {

struct CsvOptions {
  char delimiter = ',';
  /// Cells equal to one of these (after trimming) are missing. The empty
  /// cell is always missing.
  std::vector<std::string> na_markers{"NA", "NaN", "+"};
  /// Columns forming the observation vector; empty selects every column.
  std::vector<std::string> value_columns;
};

/// An ordered series of scalar or vector observations. Positions are row
/// order, 1-based in every public accessor.
class Series {
 public:
  Series(std::size_t dim, std::vector<std::optional<Vector>> points)
      : dim_(dim), points_(std::move(points)) {
    validate();
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t length() const noexcept { return points_.size(); }

  bool observed(std::size_t index) const { return points_.at(index - 1).has_value(); }
  const Vector& value(std::size_t index) const {
    const auto& p = points_.at(index - 1);
    if (!p) throw data_error("value requested at missing index " + std::to_string(index));
    return *p;
  }
  const std::vector<std::optional<Vector>>& points() const noexcept { return points_; }

  /// Scalar view of a one-dimensional series; missing entries become NaN.
  std::vector<double> scalar_values() const {
    if (dim_ != 1) throw usage_error("scalar view requires a one-column series");
    std::vector<double> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p ? (*p)[0] : std::nan(""));
    return out;
  }

  // Raw text table, kept for verbatim echo on output.
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> value_column_positions;
  char delimiter = ',';

 private:
  void validate() const {
    if (dim_ == 0) throw data_error("series dimension must be positive");
    bool any = false;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i]) continue;
      any = true;
      if (points_[i]->size() != dim_ || !points_[i]->all_finite()) {
        throw data_error("observation " + std::to_string(i + 1) +
                         " must have " + std::to_string(dim_) + " finite components");
      }
    }
    if (!any) throw data_error("no observed values");
  }

  std::size_t dim_;
  std::vector<std::optional<Vector>> points_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = pos + 1;
  }
  // A trailing newline terminates the last record rather than opening one.
  if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') {
    lines.pop_back();
  }
  return lines;
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') return std::nullopt;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

/// Parses delimited text with a header row. A record counts as missing when
/// every selected cell is empty or an NA marker; a record with only some
/// components missing is rejected.
inline Series parse_csv(std::string_view text, const CsvOptions& opts = {}) {
  auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines.front()).empty()) {
    throw data_error("input has no header row");
  }
  auto header = detail::split(lines.front(), opts.delimiter);
  for (auto& h : header) h = std::string(detail::trim(h));

  std::vector<std::size_t> positions;
  if (opts.value_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) positions.push_back(i);
  } else {
    for (const auto& name : opts.value_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw data_error("column '" + name + "' not found in header");
      positions.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (positions.empty()) throw data_error("zero selected columns");

  const auto is_missing = [&](std::string_view cell) {
    cell = detail::trim(cell);
    return cell.empty() ||
           std::find(opts.na_markers.begin(), opts.na_markers.end(), cell) !=
               opts.na_markers.end();
  };

  std::vector<std::vector<std::string>> cells;
  std::vector<std::optional<Vector>> points;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto row = detail::split(lines[li], opts.delimiter);
    if (row.size() != header.size()) {
      throw data_error("ragged row " + std::to_string(li) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(row.size()));
    }
    std::size_t missing = 0;
    Vector v(positions.size());
    for (std::size_t c = 0; c < positions.size(); ++c) {
      const std::string_view cell = row[positions[c]];
      if (is_missing(cell)) {
        ++missing;
        continue;
      }
      const auto num = detail::parse_number(detail::trim(cell));
      if (!num) {
        throw data_error("non-numeric cell '" + std::string(cell) + "' in row " +
                         std::to_string(li) + ", column '" + header[positions[c]] + "'");
      }
      v[c] = *num;
    }
    if (missing == positions.size()) {
      points.emplace_back(std::nullopt);
    } else if (missing > 0) {
      throw data_error("row " + std::to_string(li) +
                       " is partially missing; every component must be present or all missing");
    } else {
      points.emplace_back(std::move(v));
    }
    cells.push_back(std::move(row));
  }
  if (points.empty()) throw data_error("no observed values");

  Series s(positions.size(), std::move(points));
  s.header = std::move(header);
  s.cells = std::move(cells);
  s.value_column_positions = std::move(positions);
  s.delimiter = opts.delimiter;
  return s;
}

inline std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

/// Builds a series (with a synthetic text table x1..xk, missing cells "NA")
/// from in-memory points. Values are printed at round-trip precision.
inline Series make_series(std::vector<std::optional<Vector>> points, char delimiter = ',') {
  std::size_t dim = 0;
  for (const auto& p : points)
    if (p) {
      dim = p->size();
      break;
    }
  Series s(dim, std::move(points));
  for (std::size_t c = 0; c < dim; ++c) {
    s.header.push_back("x" + std::to_string(c + 1));
    s.value_column_positions.push_back(c);
  }
  for (const auto& p : s.points()) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < dim; ++c) row.push_back(p ? format_number((*p)[c], 17) : "NA");
    s.cells.push_back(std::move(row));
  }
  s.delimiter = delimiter;
  return s;
}

/// One maximal run of missing indices. All indices are 1-based.
struct GapSegment {
  std::size_t gap_start = 0;
  std::size_t gap_end = 0;
  /// gap_end + 1. For an open gap this lies one past the series end.
  std::size_t anchor_index = 0;
  /// Absent only for an open gap (series ends inside the gap).
  std::optional<Vector> anchor_value;
  std::vector<std::size_t> seed_indices;
  /// True when some seed index is itself inside an earlier gap.
  bool seeds_include_imputed = false;

  std::size_t length() const noexcept { return gap_end - gap_start + 1; }
  bool open() const noexcept { return !anchor_value.has_value(); }
};

struct GapLayout {
  /// Length of the leading fully observed run.
  std::size_t prefix_length = 0;
  std::vector<GapSegment> gaps;
};

/// Splits a series into maximal gaps, each with `order` seed indices and a
/// single-observation anchor. Gaps come back in increasing position; seeds
/// for a later gap may fall inside an earlier one (they are filled first).
inline GapLayout detect_gaps(const Series& s, std::size_t order,
                             bool allow_open_gap = false) {
  if (order < 1) throw usage_error("model order must be at least 1");
  GapLayout layout;
  const std::size_t n = s.length();
  while (layout.prefix_length < n && s.observed(layout.prefix_length + 1)) {
    ++layout.prefix_length;
  }
  std::size_t i = 1;
  while (i <= n) {
    if (s.observed(i)) {
      ++i;
      continue;
    }
    GapSegment g;
    g.gap_start = i;
    while (i <= n && !s.observed(i)) ++i;
    g.gap_end = i - 1;
    g.anchor_index = g.gap_end + 1;
    if (g.gap_start == 1) throw data_error("gap has no seed window (series starts with a missing value)");
    if (g.gap_start - 1 < order) {
      throw data_error("gap at " + std::to_string(g.gap_start) + " has only " +
                       std::to_string(g.gap_start - 1) + " values before it; order " +
                       std::to_string(order) + " needs " + std::to_string(order));
    }
    if (g.anchor_index <= n) {
      g.anchor_value = s.value(g.anchor_index);
    } else if (!allow_open_gap) {
      throw data_error("gap " + std::to_string(g.gap_start) + ".." +
                       std::to_string(g.gap_end) +
                       " runs to the end of the series and has no anchor");
    }
    for (std::size_t k = g.gap_start - order; k < g.gap_start; ++k) {
      g.seed_indices.push_back(k);
      if (!s.observed(k)) g.seeds_include_imputed = true;
    }
    layout.gaps.push_back(std::move(g));
  }
  return layout;
}

/// Provenance of one output record.
enum class Origin { observed, imputed };

/// Writes the source table back with missing records filled in and an
/// `origin` column appended. Observed cells are echoed verbatim.
///
/// `imputed` is indexed by 0-based row; it must hold a value of the series'
/// dimension exactly at the missing rows.
inline std::string write_csv(const Series& s, const std::vector<std::optional<Vector>>& imputed,
                             int precision = 6) {
  if (precision < 1 || precision > 17) throw usage_error("precision must be within 1..17");
  if (imputed.size() != s.length()) {
    throw data_error("imputed table length does not match the series");
  }
  const char d = s.delimiter;
  std::string out;
  for (std::size_t c = 0; c < s.header.size(); ++c) {
    out += s.header[c];
    out += d;
  }
  out += "origin\n";
  for (std::size_t r = 0; r < s.length(); ++r) {
    std::vector<std::string> row = s.cells[r];
    Origin origin = Origin::observed;
    if (!s.points()[r]) {
      if (!imputed[r] || imputed[r]->size() != s.dim()) {
        throw data_error("no imputed value for missing index " + std::to_string(r + 1));
      }
      origin = Origin::imputed;
      for (std::size_t c = 0; c < s.dim(); ++c) {
        row[s.value_column_positions[c]] = format_number((*imputed[r])[c], precision);
      }
    }
    for (const auto& cell : row) {
      out += cell;
      out += d;
    }
    out += origin == Origin::observed ? "observed" : "imputed";
    out += '\n';
  }
  return out;
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_SERIES_HPP
