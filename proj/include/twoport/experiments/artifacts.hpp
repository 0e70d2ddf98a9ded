#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <system_error>
#include <vector>

#include "twoport/experiments/config.hpp"
#include "twoport/experiments/runners.hpp"

namespace twoport::experiments {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string to_csv(const ResultTable& t) {
  std::string out;
  for (const std::string& line : t.provenance) out += "# " + line + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

/// Parsed CSV: comment lines without the "# " prefix, header and values.
struct CsvContent {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline CsvContent parse_csv(const std::string& text) {
  CsvContent out;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.rfind("# ", 0) == 0) {
      out.comments.push_back(line.substr(2));
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!header) {
      out.columns = cells;
      header = true;
      continue;
    }
    std::vector<double> row;
    for (const std::string& cell : cells) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw Error("malformed CSV cell '" + cell + "'");
      }
      row.push_back(v);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace detail {

inline std::string fmt2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                           "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

/// Line chart of the table's series against its x column. The x axis is
/// logarithmic when every x value is positive.
inline std::string to_svg(const ResultTable& t) {
  constexpr double W = 760, H = 480, L = 80, R = 200, T = 40, B = 60;
  const double pw = W - L - R, ph = H - T - B;

  bool log_x = !t.rows.empty();
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& row : t.rows) {
    const double x = row[t.x_column];
    if (!(x > 0.0)) log_x = false;
    if (std::isfinite(x)) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
    }
    for (int s : t.series) {
      if (std::isfinite(row[s])) {
        y_lo = std::min(y_lo, row[s]);
        y_hi = std::max(y_hi, row[s]);
      }
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0;
  if (!std::isfinite(y_lo)) y_lo = 0.0, y_hi = 1.0;
  if (log_x) x_lo = std::log10(x_lo), x_hi = std::log10(x_hi);
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  auto px = [&](double x) {
    const double u = log_x ? std::log10(x) : x;
    return L + (u - x_lo) / (x_hi - x_lo) * pw;
  };
  auto py = [&](double y) { return T + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt2(W) + "\" height=\"" +
       detail::fmt2(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + detail::fmt2(W) + "\" height=\"" + detail::fmt2(H) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"" + detail::fmt2(L) + "\" y=\"24\" font-size=\"14\">" + t.name + "</text>\n";
  s += "<rect x=\"" + detail::fmt2(L) + "\" y=\"" + detail::fmt2(T) + "\" width=\"" +
       detail::fmt2(pw) + "\" height=\"" + detail::fmt2(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks: decades on a log axis, five intervals otherwise.
  std::vector<double> xt;
  if (log_x) {
    for (double d = std::ceil(x_lo - 1e-9); d <= x_hi + 1e-9; d += 1.0) xt.push_back(std::pow(10.0, d));
  } else {
    for (int i = 0; i <= 5; ++i) xt.push_back(x_lo + (x_hi - x_lo) * i / 5.0);
  }
  for (double x : xt) {
    const double X = px(x);
    s += "<line x1=\"" + detail::fmt2(X) + "\" y1=\"" + detail::fmt2(T + ph) + "\" x2=\"" +
         detail::fmt2(X) + "\" y2=\"" + detail::fmt2(T + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt2(X) + "\" y=\"" + detail::fmt2(T + ph + 20) +
         "\" text-anchor=\"middle\">" + detail::tick_label(x) + "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = y_lo + (y_hi - y_lo) * i / 5.0;
    const double Y = py(y);
    s += "<line x1=\"" + detail::fmt2(L - 5) + "\" y1=\"" + detail::fmt2(Y) + "\" x2=\"" +
         detail::fmt2(L) + "\" y2=\"" + detail::fmt2(Y) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt2(L - 8) + "\" y=\"" + detail::fmt2(Y + 4) +
         "\" text-anchor=\"end\">" + detail::tick_label(y) + "</text>\n";
  }
  const std::string x_name = t.columns.empty() ? "x" : t.columns[t.x_column];
  s += "<text x=\"" + detail::fmt2(L + pw / 2) + "\" y=\"" + detail::fmt2(H - 15) +
       "\" text-anchor=\"middle\">" + x_name + (log_x ? " (log)" : "") + "</text>\n";
  s += "<text x=\"20\" y=\"" + detail::fmt2(T + ph / 2) + "\" transform=\"rotate(-90 20 " +
       detail::fmt2(T + ph / 2) + ")\" text-anchor=\"middle\">" + t.y_label + "</text>\n";

  // Rows are grouped in order of first appearance of their group key.
  std::vector<std::vector<double>> keys;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> key;
    for (int g : t.group_columns) key.push_back(t.rows[r][g]);
    const auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      members.push_back({r});
    } else {
      members[it - keys.begin()].push_back(r);
    }
  }

  for (std::size_t si = 0; si < t.series.size(); ++si) {
    const int col = t.series[si];
    const char* color = detail::kPalette[si % std::size(detail::kPalette)];
    for (const auto& rows : members) {
      std::string pts;
      auto flush = [&] {
        if (!pts.empty()) {
          s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
          pts.clear();
        }
      };
      for (std::size_t r : rows) {
        const double x = t.rows[r][t.x_column], y = t.rows[r][col];
        if (!std::isfinite(x) || !std::isfinite(y)) {
          flush();
          continue;
        }
        if (!pts.empty()) pts += ' ';
        pts += detail::fmt2(px(x)) + "," + detail::fmt2(py(y));
      }
      flush();
    }
    const double ly = T + 14 + 18 * static_cast<double>(si);
    s += "<line x1=\"" + detail::fmt2(L + pw + 12) + "\" y1=\"" + detail::fmt2(ly - 4) +
         "\" x2=\"" + detail::fmt2(L + pw + 36) + "\" y2=\"" + detail::fmt2(ly - 4) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::fmt2(L + pw + 42) + "\" y=\"" + detail::fmt2(ly) + "\">" +
         t.columns[col] + "</text>\n";
  }
  if (t.rows.empty()) {
    s += "<text x=\"" + detail::fmt2(L + pw / 2) + "\" y=\"" + detail::fmt2(T + ph / 2) +
         "\" text-anchor=\"middle\">no data</text>\n";
  }
  s += "</svg>\n";
  return s;
}

struct ArtifactPaths {
  std::filesystem::path csv;
  std::filesystem::path svg;
};

namespace detail {

/// Writes through a temporary file so that a failed write leaves nothing behind.
inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out || !out.flush()) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot write " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

}  // namespace detail

inline ArtifactPaths emit_artifacts(const ResultTable& t, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  ArtifactPaths paths{dir / (t.name + ".csv"), dir / (t.name + ".svg")};
  detail::write_file(paths.csv, to_csv(t));
  try {
    detail::write_file(paths.svg, to_svg(t));
  } catch (...) {
    std::filesystem::remove(paths.csv, ec);
    throw;
  }
  return paths;
}

}  // namespace twoport::experiments
