#pragma once

#include <array>
#include <span>

#include "slr/tensor.hpp"

namespace slr {

using Axes = std::array<std::size_t, 2>;

/// One-dimensional complex DFT of arbitrary length, unnormalized in both
/// directions. Powers of two use an iterative radix-2 kernel; other lengths go
/// through Bluestein's chirp-z reduction onto a power-of-two transform.
void fft1d(std::span<cplx> data, bool inverse);

/// Default axes: the last two of the tensor.
Axes last_two_axes(const ComplexTensor &x);

/// Unnormalized forward DFT along two axes.
ComplexTensor fft2(const ComplexTensor &x, Axes axes);
inline ComplexTensor fft2(const ComplexTensor &x) { return fft2(x, last_two_axes(x)); }

/// Inverse DFT along two axes, scaled by 1/(N_a * N_b).
ComplexTensor ifft2(const ComplexTensor &x, Axes axes);
inline ComplexTensor ifft2(const ComplexTensor &x) { return ifft2(x, last_two_axes(x)); }

/// Moves frequency zero from index 0 to index floor(N/2) along both axes.
ComplexTensor fftshift(const ComplexTensor &x, Axes axes);
inline ComplexTensor fftshift(const ComplexTensor &x) { return fftshift(x, last_two_axes(x)); }
ComplexTensor ifftshift(const ComplexTensor &x, Axes axes);
inline ComplexTensor ifftshift(const ComplexTensor &x) { return ifftshift(x, last_two_axes(x)); }

/// Signed integer frequency of DFT index i on an n-point grid, in
/// {-floor(n/2), ..., ceil(n/2) - 1}.
inline long signed_frequency(std::size_t i, std::size_t n) {
  const std::size_t half = (n + 1) / 2;
  return i < half ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

/// Frequency of position p in fftshift (centered) order.
inline long centered_frequency(std::size_t p, std::size_t n) {
  return static_cast<long>(p) - static_cast<long>(n / 2);
}

}  // namespace slr
