// Matrix files. Binary: one JSON header line
//   {"rows": n, "cols": m, "order": "row-major"}
// followed by n*m little-endian float64 values in row-major order. CSV: one
// line per row, comma separated, no header. Numbers are written in the
// shortest form that round-trips exactly.
#pragma once

#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include "r1glm/core.hpp"

namespace r1glm {

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_matrix_binary(std::ostream &out, const Matrix &m) {
  out << "{\"rows\": " << m.rows() << ", \"cols\": " << m.cols() << ", \"order\": \"row-major\"}\n";
  std::vector<char> bytes(static_cast<std::size_t>(m.size()) * 8);
  std::size_t at = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      auto word = std::bit_cast<std::uint64_t>(m(i, j));
      for (int b = 0; b < 8; ++b) bytes[at++] = static_cast<char>((word >> (8 * b)) & 0xff);
    }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Matrix read_matrix_binary(std::istream &in) {
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), "matrix file is empty");
  static const std::regex pattern(
      R"re(^\s*\{\s*"rows"\s*:\s*(\d+)\s*,\s*"cols"\s*:\s*(\d+)\s*,\s*"order"\s*:\s*"([a-z-]+)"\s*\}\s*$)re");
  std::smatch match;
  require(std::regex_match(header, match, pattern), "matrix header line 1: expected {\"rows\": n, \"cols\": m, "
                                                    "\"order\": \"row-major\"}");
  require(match[3] == "row-major", "matrix header line 1: only row-major order is supported");
  const Index rows = std::stoll(match[1]), cols = std::stoll(match[2]);
  Matrix m(rows, cols);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows * cols) * 8);
  in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(in.gcount() == static_cast<std::streamsize>(bytes.size()),
          "matrix file is truncated: expected " + std::to_string(bytes.size()) + " data bytes");
  in.peek();
  require(in.eof(), "matrix file has trailing bytes after the data block");
  std::size_t at = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      std::uint64_t word = 0;
      for (int b = 0; b < 8; ++b) word |= static_cast<std::uint64_t>(bytes[at++]) << (8 * b);
      m(i, j) = std::bit_cast<double>(word);
    }
  return m;
}

inline void write_matrix_csv(std::ostream &out, const Matrix &m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream &in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      double v = 0.0;
      const char *first = line.data() + start, *last = line.data() + end;
      while (first < last && *first == ' ') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      require(ec == std::errc() && ptr == last, "matrix CSV line " + std::to_string(line_no) + ": bad number '" +
                                                    line.substr(start, end - start) + "'");
      row.push_back(v);
      if (end == line.size()) break;
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("matrix CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(rows.front().size()) + " fields, found " +
                                  std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "matrix CSV is empty");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

/// Binary when the file starts with '{', CSV otherwise.
inline Matrix read_matrix_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open matrix file " + path);
  const int first = in.peek();
  return first == '{' ? read_matrix_binary(in) : read_matrix_csv(in);
}

inline void write_matrix_file(const std::string &path, const Matrix &m, bool csv) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path);
  if (csv) write_matrix_csv(out, m);
  else write_matrix_binary(out, m);
  require(static_cast<bool>(out), "write failed for " + path);
}

}  // namespace r1glm
