#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cegzsl/error.hpp"

namespace cegzsl {

// Dense row-major 2-D array. Training runs in float; the gradient oracle
// evaluates a double-precision shadow of the same computation.
template <class T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix payload of " + std::to_string(data_.size()) +
                       " values does not fill " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <class U>
  Matrix<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Matrix<U>(rows_, cols_, std::move(out));
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Mat = Matrix<float>;
using MatD = Matrix<double>;

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <class T>
std::string shape_str(const Matrix<T>& m) {
  return shape_str(m.rows(), m.cols());
}

template <class T>
bool all_finite(const Matrix<T>& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](T v) { return std::isfinite(v); });
}

// a (n x k) * b (k x m)
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix<T> out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a(i, p);
      if (av == T{0}) continue;
      const T* br = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

// a^T (k x n)^T * b (k x m) -> n x m
template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn " + shape_str(a) + "^T * " + shape_str(b));
  }
  Matrix<T> out(a.cols(), b.cols());
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const T* ar = a.data() + p * n;
    const T* br = b.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const T av = ar[i];
      if (av == T{0}) continue;
      T* o = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

// a (n x k) * b^T (m x k)^T -> n x m
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Matrix<T> out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* ar = a.data() + i * k;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T* br = b.data() + j * k;
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) = s;
    }
  }
  return out;
}

// [a | b] column concatenation.
template <class T>
Matrix<T> concat_cols(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols " + shape_str(a) + " | " + shape_str(b));
  }
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), out.row(i).begin() + a.cols());
  }
  return out;
}

// Columns [begin, begin + count) of m. Used to route gradients of concat_cols.
template <class T>
Matrix<T> slice_cols(const Matrix<T>& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols()) throw ShapeError("slice_cols out of range");
  Matrix<T> out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::copy(r.begin() + begin, r.begin() + begin + count, out.row(i).begin());
  }
  return out;
}

// Rows [begin, begin + count) of m.
template <class T>
Matrix<T> slice_rows(const Matrix<T>& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.rows()) throw ShapeError("slice_rows out of range");
  std::vector<T> data(m.data() + begin * m.cols(), m.data() + (begin + count) * m.cols());
  return Matrix<T>(count, m.cols(), std::move(data));
}

// [a ; b] row concatenation.
template <class T>
Matrix<T> concat_rows(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows " + shape_str(a) + " ; " + shape_str(b));
  }
  std::vector<T> data(a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Matrix<T>(a.rows() + b.rows(), a.cols(), std::move(data));
}

template <class T, class Index>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const Index> idx) {
  Matrix<T> out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = static_cast<std::size_t>(idx[i]);
    if (src >= m.rows()) throw ShapeError("gather_rows index out of range");
    std::copy(m.row(src).begin(), m.row(src).end(), out.row(i).begin());
  }
  return out;
}

template <class T>
void add_inplace(Matrix<T>& acc, const Matrix<T>& g) {
  if (!acc.same_shape(g)) throw ShapeError("add " + shape_str(acc) + " += " + shape_str(g));
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace cegzsl
