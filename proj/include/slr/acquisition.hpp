#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slr/rng.hpp"
#include "slr/tensor.hpp"

namespace slr::acq {

enum class MaskKind { UniformLines, VariableDensityLines, VariableDensity2d };

MaskKind parse_mask_kind(const std::string &name);
std::string to_string(MaskKind kind);

/// Fully sampled centered block of k-space, extents in (rows, cols).
struct CalibrationRegion {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Cartesian sampling pattern in standard DFT order. Phase encodes run along
/// rows; line masks sample whole rows.
struct SamplingMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> sampled;
  std::optional<CalibrationRegion> calib;

  SamplingMask() = default;
  SamplingMask(std::size_t h, std::size_t w, bool value = false)
      : height(h), width(w), sampled(h * w, value ? 1 : 0) {}

  bool operator()(std::size_t r, std::size_t c) const { return sampled[r * width + c] != 0; }
  bool at(std::size_t i) const { return sampled[i] != 0; }
  double fraction() const;
  std::size_t count() const;

  /// 0/1 tensor (H x W), as persisted alongside datasets.
  ComplexTensor as_tensor() const;
  static SamplingMask from_tensor(const ComplexTensor &t);
  /// Element-wise product of two masks of the same grid.
  SamplingMask operator&(const SamplingMask &o) const;
  bool operator==(const SamplingMask &o) const {
    return height == o.height && width == o.width && sampled == o.sampled;
  }
};

/// DFT row/column indices covered by a centered calibration extent.
std::vector<std::size_t> centered_indices(std::size_t n, std::size_t extent);

/// Variable-density kinds sample with probability proportional to
/// exp(-(k / sigma)^2), sigma = density_width * extent, rescaled to hit the
/// target rate. density_width = 0 picks the kind's default (1/6 for lines,
/// 1/2 for 2-D).
double default_density_width(MaskKind kind);
SamplingMask make_mask(Rng &rng, std::size_t height, std::size_t width, MaskKind kind,
                       double acceleration, std::size_t calib_extent, double density_width = 0);

struct CoilSensitivities {
  ComplexTensor maps;  // M x H x W
  std::size_t bandwidth = 0;
  bool normalized = true;
};

/// Random coil maps whose spectra live in a centered bandwidth x bandwidth
/// window. With `normalize` the maps are divided pixelwise by their root
/// sum-of-squares (which widens their spectra); without it they are only
/// globally scaled to unit mean SOS energy and stay exactly bandlimited.
CoilSensitivities make_sensitivities(Rng &rng, std::size_t height, std::size_t width,
                                     std::size_t coils, std::size_t bandwidth, bool normalize = true);

using LabelMap = Tensor<int>;

struct Phantom {
  ComplexTensor image;  // H x W
  LabelMap regions;     // H x W, 0 = background
};

/// Overlapping ellipses and rectangles with random complex amplitudes,
/// |a| in [0.2, 1]; later shapes overwrite earlier ones so the image is
/// constant on every labeled region. The object stays inside the central
/// `fill` fraction of the field of view along each axis.
Phantom make_phantom(Rng &rng, std::size_t height, std::size_t width, std::size_t n_shapes, double fill = 0.5);

/// Piecewise-constant phantom whose edges are zero sets of a trigonometric
/// polynomial, sampled exactly in k-space.
///
/// Each shape is {mu_s > 0} with mu_s(x, y) = bx cos 2pi(x - x0) +
/// by cos 2pi(y - y0) - a on the unit torus, so its spectrum has 3 x 3 support
/// and the product mu = prod mu_s has (2S + 1) x (2S + 1) support. The k-space
/// samples are H*W times the continuous Fourier-series coefficients computed
/// by boundary quadrature, so the gradient spectrum j2pi k gamma_hat is
/// annihilated by mu_hat under valid convolution up to quadrature roundoff.
struct EdgePhantom {
  Phantom phantom;          // image = ifft2(kspace); regions are shape bitmasks
  ComplexTensor kspace;     // H x W, DFT order
  ComplexTensor annihilator;  // centered (2S+1) x (2S+1) coefficients of mu
};

EdgePhantom make_edge_phantom(Rng &rng, std::size_t height, std::size_t width, std::size_t n_shapes);

/// Multi-channel k-space grid with its sampling mask (DFT order).
struct MultiChannelKSpace {
  ComplexTensor data;  // M x H x W
  SamplingMask mask;
};

/// Coil images gamma_i = s_i * gamma.
ComplexTensor coil_images(const ComplexTensor &image, const CoilSensitivities &sens);

/// Per-channel fft2 followed by masking. No noise.
MultiChannelKSpace apply_forward(const ComplexTensor &coil_images, const SamplingMask &mask);
/// Mask then per-channel ifft2: the zero-filled reconstruction.
ComplexTensor apply_adjoint(const MultiChannelKSpace &b);

/// Zero every off-mask entry of an M x H x W k-space tensor in place.
void apply_mask(ComplexTensor &kspace, const SamplingMask &mask);

/// Adds complex Gaussian noise (per-component std sigma) on sampled entries.
MultiChannelKSpace add_noise(MultiChannelKSpace b, Rng &rng, double sigma);

struct Acquisition {
  ComplexTensor coil_images;  // ground truth Gamma
  MultiChannelKSpace kspace;
  double noise_sigma = 0;
};

}  // namespace slr::acq
