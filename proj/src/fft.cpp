#include "slr/fft.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>

namespace slr {
namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

class Radix2 {
 public:
  explicit Radix2(std::size_t n) : n_(n), rev_(n), twiddle_(n / 2) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  void run(std::span<cplx> x, bool inverse) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2, step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          cplx w = twiddle_[j * step];
          if (inverse) w = std::conj(w);
          const cplx u = x[start + j];
          const cplx v = x[start + j + half] * w;
          x[start + j] = u + v;
          x[start + j + half] = u - v;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<cplx> twiddle_;
};

class Bluestein {
 public:
  explicit Bluestein(std::size_t n) : n_(n) {
    m_ = 1;
    while (m_ < 2 * n - 1) m_ <<= 1;
    radix_ = std::make_unique<Radix2>(m_);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the phase argument small for large k.
      const auto k2 = static_cast<double>((k * k) % (2 * n));
      const double a = -std::numbers::pi * k2 / static_cast<double>(n);
      chirp_[k] = {std::cos(a), std::sin(a)};
    }
    kernel_.assign(m_, cplx{});
    kernel_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) kernel_[k] = kernel_[m_ - k] = std::conj(chirp_[k]);
    radix_->run(kernel_, false);
  }

  void run(std::span<cplx> x, bool inverse) const {
    std::vector<cplx> buf(m_, cplx{});
    for (std::size_t k = 0; k < n_; ++k) {
      const cplx c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      buf[k] = x[k] * c;
    }
    radix_->run(buf, false);
    for (std::size_t k = 0; k < m_; ++k)
      buf[k] *= inverse ? std::conj(kernel_[(m_ - k) % m_]) : kernel_[k];
    radix_->run(buf, true);
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t k = 0; k < n_; ++k) {
      const cplx c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      x[k] = buf[k] * c * scale;
    }
  }

 private:
  std::size_t n_, m_;
  std::unique_ptr<Radix2> radix_;
  std::vector<cplx> chirp_, kernel_;
};

struct Plan {
  std::unique_ptr<Radix2> radix;
  std::unique_ptr<Bluestein> bluestein;
};

const Plan &plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Plan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Plan p;
  if (is_pow2(n))
    p.radix = std::make_unique<Radix2>(n);
  else
    p.bluestein = std::make_unique<Bluestein>(n);
  return cache.emplace(n, std::move(p)).first->second;
}

void check_axes(const ComplexTensor &x, Axes axes) {
  for (auto a : axes)
    if (a >= x.ndim())
      throw std::out_of_range("fft axis " + std::to_string(a) + " out of range for tensor " +
                              shape_string(x.shape()));
  if (axes[0] == axes[1]) throw std::invalid_argument("fft axes must be distinct");
}

void transform_axis(ComplexTensor &x, std::size_t axis, bool inverse) {
  const auto &shape = x.shape();
  const std::size_t n = shape[axis];
  if (n <= 1) return;
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t outer = x.size() / (n * inner);
  std::vector<cplx> line(n);
  cplx *base = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      cplx *p = base + o * n * inner + in;
      for (std::size_t k = 0; k < n; ++k) line[k] = p[k * inner];
      fft1d(line, inverse);
      for (std::size_t k = 0; k < n; ++k) p[k * inner] = line[k];
    }
  }
}

ComplexTensor roll(const ComplexTensor &x, Axes axes, bool forward) {
  check_axes(x, axes);
  const auto &shape = x.shape();
  ComplexTensor out(shape);
  const std::size_t nd = shape.size();
  std::vector<std::size_t> shift(nd, 0);
  for (auto a : axes) {
    const std::size_t n = shape[a];
    shift[a] = forward ? n / 2 : n - n / 2;
  }
  std::vector<std::size_t> stride(nd, 1);
  for (std::size_t i = nd; i-- > 1;) stride[i - 1] = stride[i] * shape[i];
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t flat = 0; flat < x.size(); ++flat) {
    std::size_t dst = 0;
    for (std::size_t d = 0; d < nd; ++d) dst += ((idx[d] + shift[d]) % shape[d]) * stride[d];
    out[dst] = x[flat];
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace

void fft1d(std::span<cplx> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  const Plan &p = plan_for(n);
  if (p.radix)
    p.radix->run(data, inverse);
  else
    p.bluestein->run(data, inverse);
}

Axes last_two_axes(const ComplexTensor &x) {
  if (x.ndim() < 2) throw std::out_of_range("fft2 needs at least 2 axes, got " + shape_string(x.shape()));
  return {x.ndim() - 2, x.ndim() - 1};
}

ComplexTensor fft2(const ComplexTensor &x, Axes axes) {
  check_axes(x, axes);
  ComplexTensor out = x;
  transform_axis(out, axes[0], false);
  transform_axis(out, axes[1], false);
  return out;
}

ComplexTensor ifft2(const ComplexTensor &x, Axes axes) {
  check_axes(x, axes);
  ComplexTensor out = x;
  transform_axis(out, axes[0], true);
  transform_axis(out, axes[1], true);
  const double scale = 1.0 / static_cast<double>(x.extent(axes[0]) * x.extent(axes[1]));
  out *= scale;
  return out;
}

ComplexTensor fftshift(const ComplexTensor &x, Axes axes) { return roll(x, axes, true); }
ComplexTensor ifftshift(const ComplexTensor &x, Axes axes) { return roll(x, axes, false); }

}  // namespace slr
