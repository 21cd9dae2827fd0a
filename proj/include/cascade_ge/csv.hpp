#pragma once

// Minimal CSV plumbing: comma-separated files with one header row, optional
// leading `#` metadata lines, and full-precision (17 significant digit)
// numeric output so every file round-trips losslessly.

#include "cascade_ge/common.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cascade_ge {
namespace csv {

struct Table {
  std::vector<std::string> meta;                  // '#' lines, verbatim, no '#'
  std::vector<std::string> columns;               // header row
  std::vector<std::vector<std::string>> rows;     // raw cells

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require_column(const std::string& name, const std::string& path) const {
    const int c = column(name);
    if (c < 0)
      throw ValidationError(path + ": missing required column '" + name + "'");
    return c;
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace; the formats here never quote cells.
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.meta.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
      continue;
    }
    if (!have_header) {
      t.columns = split_line(line);
      have_header = true;
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != t.columns.size())
      throw ValidationError(path + ": row with " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ValidationError(path + ": empty file");
  return t;
}

inline double parse_double(const std::string& cell, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || (end && *end != '\0'))
    throw ValidationError(where + ": not a number: '" + cell + "'");
  if (errno == ERANGE)
    throw ValidationError(where + ": value out of range: '" + cell + "'");
  return v;
}

inline long parse_int(const std::string& cell, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(cell.c_str(), &end, 10);
  if (end == cell.c_str() || (end && *end != '\0') || errno == ERANGE)
    throw ValidationError(where + ": not an integer: '" + cell + "'");
  return v;
}

// Writer that stamps the standard metadata header on every output file.
class Writer {
 public:
  Writer(const std::string& path, const std::string& config_hash,
         std::uint64_t seed)
      : out_(path), path_(path) {
    if (!out_) throw ValidationError("cannot write '" + path + "'");
    out_ << "# cascade-ge " << kVersion << " config=" << config_hash
         << " seed=" << seed << "\n";
  }

  void meta(const std::string& line) { out_ << "# " << line << "\n"; }

  void header(const std::vector<std::string>& cols) { row_of_strings(cols); }

  void row_of_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  // Convenience: mixed cells assembled by the caller via cell()/cell17().
  template <class... Parts>
  void row(const Parts&... parts) {
    std::vector<std::string> cells;
    (cells.push_back(to_cell(parts)), ...);
    row_of_strings(cells);
  }

  const std::string& path() const { return path_; }

 private:
  static std::string to_cell(const std::string& s) { return s; }
  static std::string to_cell(const char* s) { return s; }
  static std::string to_cell(double v) { return to_string17(v); }
  static std::string to_cell(int v) { return std::to_string(v); }
  static std::string to_cell(long v) { return std::to_string(v); }
  static std::string to_cell(std::size_t v) { return std::to_string(v); }

  std::ofstream out_;
  std::string path_;
};

}  // namespace csv
}  // namespace cascade_ge
