#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace slr {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape &shape);

/// Dense n-D array in row-major order.
///
/// Value type with ordinary copy semantics. Element access helpers cover the
/// 2-D and 3-D cases used throughout (channel x row x column).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{}, data_(1, T{}) {}
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), T{}) {}
  Tensor(std::initializer_list<std::size_t> shape) : Tensor(Shape(shape)) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string(shape_));
  }

  const Shape &shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T> &vec() { return data_; }
  const std::vector<T> &vec() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  T &operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T &operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  T &operator()(std::size_t ch, std::size_t r, std::size_t c) {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }
  const T &operator()(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }

  /// View of one leading-axis slice (e.g. one channel of a C x H x W tensor).
  std::span<T> slice(std::size_t i) {
    const std::size_t n = data_.size() / shape_.at(0);
    return std::span<T>(data_).subspan(i * n, n);
  }
  std::span<const T> slice(std::size_t i) const {
    const std::size_t n = data_.size() / shape_.at(0);
    return std::span<const T>(data_).subspan(i * n, n);
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  void fill(const T &v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor &operator+=(const Tensor &o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor &operator-=(const Tensor &o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  template <class S>
  Tensor &operator*=(const S &s) {
    for (auto &v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor &b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor &b) { return a -= b; }
  template <class S>
  friend Tensor operator*(const S &s, Tensor a) { return a *= s; }

  bool operator==(const Tensor &o) const = default;

  void check_same(const Tensor &o) const {
    if (o.shape_ != shape_)
      throw std::invalid_argument("shape mismatch: " + shape_string(shape_) + " vs " +
                                  shape_string(o.shape_));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using ComplexTensor = Tensor<cplx>;
using RealTensor = Tensor<double>;

/// Sum of squared magnitudes.
double norm2(const ComplexTensor &x);
double norm2(const RealTensor &x);
inline double norm(const ComplexTensor &x) { return std::sqrt(norm2(x)); }
inline double norm(const RealTensor &x) { return std::sqrt(norm2(x)); }

/// <a, b> = sum conj(a) * b.
cplx inner(const ComplexTensor &a, const ComplexTensor &b);
double inner(const RealTensor &a, const RealTensor &b);

bool all_finite(const ComplexTensor &x);
bool all_finite(const RealTensor &x);

RealTensor abs(const ComplexTensor &x);
ComplexTensor to_complex(const RealTensor &x);

/// Root sum-of-squares over the leading (channel) axis of a C x H x W tensor.
RealTensor sos(const ComplexTensor &x);

}  // namespace slr
