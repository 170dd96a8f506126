#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace xrisk {

// Dense row-major tensor. Rank is dynamic but in practice everything here
// is a vector or a matrix.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (auto d : shape_) n *= d;
    data_.assign(n, T{});
  }

  Tensor(std::initializer_list<std::size_t> shape)
      : Tensor(std::vector<std::size_t>(shape)) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i) { return data_[i]; }
  const T& operator()(std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
  }

  T* row(std::size_t i) { return data_.data() + i * cols(); }
  const T* row(std::size_t i) const { return data_.data() + i * cols(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T{}); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

// y(out) = x(in) . W(in,out) + b(out)
template <class T>
inline void vecmat(const T* x, const Tensor<T>& w, const T* b, T* y) {
  const std::size_t in = w.rows(), out = w.cols();
  for (std::size_t o = 0; o < out; ++o) y[o] = b ? b[o] : T{};
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    if (xi == T{}) continue;
    const T* wrow = w.row(i);
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * wrow[o];
  }
}

// dW(in,out) += x(in) outer dy(out);  db += dy;  dx(in) += W . dy
template <class T>
inline void vecmat_backward(const T* x, const Tensor<T>& w, const T* dy,
                            Tensor<T>& dw, T* db, T* dx) {
  const std::size_t in = w.rows(), out = w.cols();
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    T* dwrow = dw.row(i);
    const T* wrow = w.row(i);
    T acc = T{};
    for (std::size_t o = 0; o < out; ++o) {
      dwrow[o] += xi * dy[o];
      acc += wrow[o] * dy[o];
    }
    if (dx) dx[i] += acc;
  }
  if (db)
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[o];
}

// Y(m,out) = X(m,in) . W(in,out) + broadcast b(out)
template <class T>
inline void matmul_bias(const Tensor<T>& x, const Tensor<T>& w, const T* b,
                        Tensor<T>& y) {
  const std::size_t m = x.rows();
  for (std::size_t r = 0; r < m; ++r) vecmat(x.row(r), w, b, y.row(r));
}

// dX(m,in) += dY(m,out) . W^T; dW += X^T dY; db += column sums of dY
template <class T>
inline void matmul_bias_backward(const Tensor<T>& x, const Tensor<T>& w,
                                 const Tensor<T>& dy, Tensor<T>& dx,
                                 Tensor<T>& dw, T* db) {
  const std::size_t m = x.rows();
  for (std::size_t r = 0; r < m; ++r)
    vecmat_backward(x.row(r), w, dy.row(r), dw, db, dx.row(r));
}

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc = T{};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace xrisk
