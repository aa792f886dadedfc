#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

#include "apocalift/types.hpp"

namespace apocalift {

/// Dense tensor with entries stored in lexicographic (row-major) order: the
/// last index varies fastest. All reshapes and flattenings below follow the
/// same ordering, so round-trips are exact.
template <typename Scalar>
class DenseTensor {
 public:
  static constexpr Index kMaxOrder = 6;
  static constexpr Index kMaxSize = 1000000;

  DenseTensor() = default;

  explicit DenseTensor(std::vector<Index> dims) : dims_(std::move(dims)) {
    validate_dims(dims_);
    data_ = VectorX<Scalar>::Zero(count(dims_));
  }

  DenseTensor(std::vector<Index> dims, VectorX<Scalar> values)
      : dims_(std::move(dims)), data_(std::move(values)) {
    validate_dims(dims_);
    if (data_.size() != count(dims_))
      throw std::invalid_argument("DenseTensor: value count does not match shape");
  }

  static void validate_dims(const std::vector<Index>& dims) {
    if (dims.empty() || static_cast<Index>(dims.size()) > kMaxOrder)
      throw std::invalid_argument("DenseTensor: order must lie in [1,6]");
    Index total = 1;
    for (Index d : dims) {
      if (d <= 0) throw std::invalid_argument("DenseTensor: dimensions must be positive");
      total *= d;
      if (total > kMaxSize) throw std::invalid_argument("DenseTensor: size cap exceeded");
    }
  }

  static Index count(const std::vector<Index>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Index(1), std::multiplies<Index>());
  }

  Index order() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  Index size() const { return data_.size(); }
  const VectorX<Scalar>& values() const { return data_; }
  VectorX<Scalar>& values() { return data_; }
  Scalar norm() const { return data_.norm(); }

  Index offset(const std::vector<Index>& idx) const {
    Index off = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k) off = off * dims_[k] + idx[k];
    return off;
  }

  Scalar operator()(const std::vector<Index>& idx) const { return data_(offset(idx)); }
  Scalar& operator()(const std::vector<Index>& idx) { return data_(offset(idx)); }

 private:
  std::vector<Index> dims_;
  VectorX<Scalar> data_;
};

namespace tensor_detail {

// Strides of the lexicographic layout.
inline std::vector<Index> strides(const std::vector<Index>& dims) {
  std::vector<Index> s(dims.size(), 1);
  for (Index k = static_cast<Index>(dims.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * dims[k + 1];
  return s;
}

}  // namespace tensor_detail

/// Mode-k flattening: rows run over index k, columns over the remaining
/// indices in their original lexicographic order.
template <typename Scalar>
MatrixX<Scalar> flatten(const DenseTensor<Scalar>& t, Index mode) {
  const auto& dims = t.dims();
  const Index d = t.order();
  if (mode < 0 || mode >= d) throw std::invalid_argument("flatten: mode out of range");
  const Index rows = dims[mode];
  const Index cols = t.size() / rows;
  MatrixX<Scalar> out(rows, cols);
  const auto str = tensor_detail::strides(dims);
  std::vector<Index> idx(d, 0);
  for (Index off = 0; off < t.size(); ++off) {
    Index rem = off;
    Index col = 0;
    for (Index k = 0; k < d; ++k) {
      idx[k] = rem / str[k];
      rem %= str[k];
      if (k != mode) col = col * dims[k] + idx[k];
    }
    out(idx[mode], col) = t.values()(off);
  }
  return out;
}

/// Inverse of `flatten` for a (possibly resized) mode-k dimension.
template <typename Scalar>
DenseTensor<Scalar> unflatten(const MatrixX<Scalar>& m, std::vector<Index> dims, Index mode) {
  dims[mode] = m.rows();
  DenseTensor<Scalar> out(dims);
  const Index d = static_cast<Index>(dims.size());
  const auto str = tensor_detail::strides(dims);
  for (Index off = 0; off < out.size(); ++off) {
    Index rem = off;
    Index row = 0;
    Index col = 0;
    for (Index k = 0; k < d; ++k) {
      const Index ik = rem / str[k];
      rem %= str[k];
      if (k == mode)
        row = ik;
      else
        col = col * dims[k] + ik;
    }
    out.values()(off) = m(row, col);
  }
  return out;
}

/// Multilinear mode-k product T x_k M (contracts index k of T with M's
/// columns).
template <typename Scalar>
DenseTensor<Scalar> mode_product(const DenseTensor<Scalar>& t, const MatrixX<Scalar>& m,
                                 Index mode) {
  if (m.cols() != t.dims()[mode])
    throw std::invalid_argument("mode_product: factor shape mismatch");
  return unflatten(MatrixX<Scalar>(m * flatten(t, mode)), t.dims(), mode);
}

/// Row-major matricization grouping the first `split` indices into rows.
template <typename Scalar>
MatrixX<Scalar> matricize(const DenseTensor<Scalar>& t, Index split) {
  if (split <= 0 || split >= t.order())
    throw std::invalid_argument("matricize: split out of range");
  Index rows = 1;
  for (Index k = 0; k < split; ++k) rows *= t.dims()[k];
  const Index cols = t.size() / rows;
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(t.values().data(), rows, cols);
}

}  // namespace apocalift
