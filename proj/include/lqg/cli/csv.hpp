#pragma once

// CSV emission with fixed float formatting, atomic file replacement, and a
// minimal numeric CSV reader for tabulated inputs.

#include <Eigen/Dense>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lqg/error.hpp"
#include "lqg/linalg.hpp"

namespace lqg::cli {

/// Shortest round-trip is not used on purpose: every float gets 17
/// significant digits so the files are stable across platforms.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { append(header); }

  class Row {
   public:
    explicit Row(CsvTable& t) : table_(t) {}
    Row& operator<<(double v) { return push(format_double(v)); }
    Row& operator<<(long long v) { return push(std::to_string(v)); }
    Row& operator<<(Index v) { return push(std::to_string(v)); }
    Row& operator<<(int v) { return push(std::to_string(v)); }
    Row& operator<<(bool v) { return push(v ? "true" : "false"); }
    Row& operator<<(const std::string& v) { return push(v); }
    Row& operator<<(const char* v) { return push(v); }
    ~Row() { table_.append(cells_); }

   private:
    Row& push(std::string s) {
      cells_.push_back(std::move(s));
      return *this;
    }
    CsvTable& table_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }
  const std::string& str() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  void append(const std::vector<std::string>& cells) {
    require(cells.size() == width_, ErrorKind::InvalidArgument, "csv row width does not match the header");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) text_ += ',';
      text_ += cells[k];
    }
    text_ += '\n';
    ++rows_;
  }

  std::size_t width_;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Writes to a sibling temporary and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Numeric matrix from a CSV file. A first line that does not parse as numbers
/// is treated as a header; blank lines and lines starting with '#' are skipped.
inline MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> vals;
    bool numeric = true;
    std::size_t start = 0;
    while (start <= t.size()) {
      const auto comma = t.find(',', start);
      const auto cell = t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      double v = 0.0;
      if (!parse_double(cell, v)) {
        numeric = false;
        break;
      }
      vals.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no numeric rows");
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace lqg::cli
