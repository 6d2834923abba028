#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/tensor.hpp"

namespace dmvc::data {

using ng::Tensor;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string where(const std::filesystem::path& path, std::size_t row, std::size_t col) {
  return path.string() + ":" + std::to_string(row) + ":" + std::to_string(col);
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  return is;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot write " + path.string());
  return os;
}

}  // namespace detail

/// Headerless comma-separated dense matrix. Blank lines are skipped; rows
/// and columns in messages are 1-based.
inline Tensor read_csv(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view rest = detail::trim(line);
    if (rest.empty()) continue;
    std::size_t col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto cell = detail::trim(rest.substr(0, comma));
      ++col;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw LoadError(detail::where(path, line_no, col) + ": cannot parse '" + std::string(cell) + "' as a number");
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (rows == 0) cols = col;
    else if (col != cols)
      throw LoadError(detail::where(path, line_no, col) + ": row has " + std::to_string(col) + " columns, expected " +
                      std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw LoadError(path.string() + ": no data rows");
  return Tensor({rows, cols}, std::move(values));
}

inline void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

/// Shortest round-trip representation of every value.
inline void write_csv(const std::filesystem::path& path, const Tensor& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      append_number(out, m(r, c));
    }
    out.push_back('\n');
  }
  auto os = detail::open_out(path);
  os << out;
}

/// One non-negative integer per line.
inline std::vector<std::size_t> read_labels(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto cell = detail::trim(line);
    if (cell.empty()) continue;
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
      throw LoadError(detail::where(path, line_no, 1) + ": cannot parse '" + std::string(cell) + "' as a label");
    labels.push_back(v);
  }
  return labels;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels) {
  std::string out;
  for (auto l : labels) out += std::to_string(l) + '\n';
  auto os = detail::open_out(path);
  os << out;
}

}  // namespace dmvc::data
