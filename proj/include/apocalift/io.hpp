#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "apocalift/tensor.hpp"
#include "apocalift/types.hpp"

namespace apocalift {

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token) {
  double v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw std::runtime_error("failed to parse number: '" + token + "'");
  return v;
}

// Matrix text format: first line "m n", then m rows of n values.

inline void write_matrix_text(std::ostream& os, const MatrixX<double>& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline MatrixX<double> read_matrix_text(std::istream& is) {
  Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows <= 0 || cols <= 0)
    throw std::runtime_error("matrix text: bad header");
  MatrixX<double> m(rows, cols);
  std::string token;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      if (!(is >> token)) throw std::runtime_error("matrix text: truncated data");
      m(i, j) = parse_double(token);
    }
  return m;
}

inline MatrixX<double> read_matrix_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open matrix file: " + path);
  return read_matrix_text(f);
}

// Tensor text format: header "d n_1 ... n_d", then values in lexicographic
// order, whitespace-separated.

inline void write_tensor_text(std::ostream& os, const DenseTensor<double>& t) {
  os << t.order();
  for (Index d : t.dims()) os << ' ' << d;
  os << '\n';
  for (Index i = 0; i < t.size(); ++i) {
    if (i) os << (i % 8 == 0 ? '\n' : ' ');
    os << format_double(t.values()(i));
  }
  os << '\n';
}

inline DenseTensor<double> read_tensor_text(std::istream& is) {
  Index d = 0;
  if (!(is >> d) || d <= 0) throw std::runtime_error("tensor text: bad order");
  std::vector<Index> dims(d);
  for (Index k = 0; k < d; ++k)
    if (!(is >> dims[k])) throw std::runtime_error("tensor text: bad header");
  DenseTensor<double>::validate_dims(dims);
  DenseTensor<double> t(dims);
  std::string token;
  for (Index i = 0; i < t.size(); ++i) {
    if (!(is >> token)) throw std::runtime_error("tensor text: truncated data");
    t.values()(i) = parse_double(token);
  }
  return t;
}

inline DenseTensor<double> read_tensor_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open tensor file: " + path);
  return read_tensor_text(f);
}

}  // namespace apocalift
