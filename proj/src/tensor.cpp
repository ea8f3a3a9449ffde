#include "slr/tensor.hpp"

#include <cmath>

namespace slr {

std::string shape_string(const Shape &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

double norm2(const ComplexTensor &x) {
  double s = 0;
  for (const auto &v : x) s += std::norm(v);
  return s;
}

double norm2(const RealTensor &x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}

cplx inner(const ComplexTensor &a, const ComplexTensor &b) {
  a.check_same(b);
  cplx s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double inner(const RealTensor &a, const RealTensor &b) {
  a.check_same(b);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(const ComplexTensor &x) {
  for (const auto &v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

bool all_finite(const RealTensor &x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

RealTensor abs(const ComplexTensor &x) {
  RealTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
  return out;
}

ComplexTensor to_complex(const RealTensor &x) {
  ComplexTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  return out;
}

RealTensor sos(const ComplexTensor &x) {
  if (x.ndim() == 2) return abs(x);
  if (x.ndim() != 3) throw std::invalid_argument("sos: expected C x H x W, got " + shape_string(x.shape()));
  const std::size_t h = x.extent(1), w = x.extent(2);
  RealTensor out({h, w});
  for (std::size_t c = 0; c < x.extent(0); ++c) {
    auto ch = x.slice(c);
    for (std::size_t i = 0; i < h * w; ++i) out[i] += std::norm(ch[i]);
  }
  for (auto &v : out) v = std::sqrt(v);
  return out;
}

}  // namespace slr
