#pragma once

#include <Eigen/Dense>
#include <string>

#include "slr/acquisition.hpp"
#include "slr/tensor.hpp"

namespace slr::lift {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class Stacking { VerticalGradient, HorizontalMultichannel };

Stacking parse_stacking(const std::string &name);
std::string to_string(Stacking s);

/// Lifting geometry. Filters span `filter_rows` x `filter_cols` k-space taps.
///
/// Vertical-gradient stacking lifts G(gamma_hat): each of the `channels` inputs
/// becomes two gradient bands and the band Hankel blocks are stacked by rows,
/// so every band shares the same filters. Horizontal stacking lifts the
/// channels directly (G = identity) and concatenates their blocks by columns.
struct LiftingSpec {
  Stacking stacking = Stacking::HorizontalMultichannel;
  std::size_t filter_rows = 5;
  std::size_t filter_cols = 5;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t bands() const { return stacking == Stacking::VerticalGradient ? 2 * channels : channels; }
  std::size_t taps() const { return filter_rows * filter_cols; }
  std::size_t valid_rows() const { return height - filter_rows + 1; }
  std::size_t valid_cols() const { return width - filter_cols + 1; }
  std::size_t valid_count() const { return valid_rows() * valid_cols(); }
  std::size_t lifted_rows() const {
    return stacking == Stacking::VerticalGradient ? bands() * valid_count() : valid_count();
  }
  std::size_t lifted_cols() const {
    return stacking == Stacking::VerticalGradient ? taps() : taps() * bands();
  }
  /// Throws if the window does not fit or counts are zero.
  void validate() const;
  LiftingSpec with_grid(std::size_t h, std::size_t w) const {
    LiftingSpec s = *this;
    s.height = h;
    s.width = w;
    return s;
  }
};

/// Gradient weighting: band 0 = j 2 pi kx x_hat, band 1 = j 2 pi ky x_hat,
/// with signed integer frequencies of the DFT-ordered input. Accepts H x W or
/// 1 x H x W; multi-channel input is rejected.
ComplexTensor grad_weight(const ComplexTensor &x_hat);
/// G^H z = -(j 2 pi kx z1 + j 2 pi ky z2). Requires exactly two bands.
ComplexTensor grad_weight_adjoint(const ComplexTensor &z);

/// Channel-wise gradient weighting of M x H x W into 2M bands ordered
/// (c0 x, c0 y, c1 x, ...), and its adjoint.
ComplexTensor grad_weight_channels(const ComplexTensor &x_hat);
ComplexTensor grad_weight_channels_adjoint(const ComplexTensor &z);

/// 4 pi^2 (kx^2 + ky^2) on an H x W DFT grid: the diagonal of G^H G.
RealTensor grad_gram_diagonal(std::size_t height, std::size_t width);

/// Lifted matrix plus the bookkeeping needed to interpret its rows/columns.
struct LiftedMatrix {
  CMatrix matrix;
  LiftingSpec spec;
};

/// Block-Hankel lifting of Z (bands x H x W, centered/fftshifted k-space so
/// frequencies are contiguous). Row n (valid positions, lexicographic) and
/// column m (window offsets, lexicographic) hold Z[n - m], so the product with
/// a filter vector is the valid linear convolution Z * q.
LiftedMatrix hankel_lift(const ComplexTensor &z, const LiftingSpec &spec);

/// Adjoint of hankel_lift: scatter-add matrix entries back onto the grid.
ComplexTensor lift_adjoint(const CMatrix &m, const LiftingSpec &spec);

/// T(Z)^H T(Z) by explicit product.
CMatrix lift_gram(const ComplexTensor &z, const LiftingSpec &spec);
/// Same Gram matrix assembled from FFT cross-correlations of masked bands.
CMatrix lift_gram_fft(const ComplexTensor &z, const LiftingSpec &spec);

enum class NullSpaceOrigin { IrlsWeight, CalibrationNullspace };

struct NullSpaceBasis {
  CMatrix q;  // lifted_cols x V
  double epsilon = 0;
  NullSpaceOrigin origin = NullSpaceOrigin::IrlsWeight;

  std::size_t filters() const { return static_cast<std::size_t>(q.cols()); }
};

/// Q = (gram + eps I)^(-1/4) via Hermitian eigendecomposition, kept as the
/// full Hermitian matrix.
NullSpaceBasis nullspace_weight(const CMatrix &gram, double epsilon);

/// Orthonormal null-space filters estimated from the calibration block of the
/// mask: right singular vectors of T_R with singular value below
/// rank_tol * sigma_max (plus any columns beyond the row count).
NullSpaceBasis calibrated_nullspace(const acq::MultiChannelKSpace &calib_ksp, const LiftingSpec &spec,
                                    double rank_tol = 1e-6);

/// Centered calibration block of a DFT-ordered k-space tensor, after the
/// weighting selected by the lifting (gradient bands use full-grid frequencies).
ComplexTensor calibration_block(const ComplexTensor &kspace, const acq::CalibrationRegion &region,
                                const LiftingSpec &spec);

/// J(Q): the convolutional filterbank equivalent to right-multiplying the
/// lifted matrix by Q.
///
/// Vertical stacking is SIMO: every filter q_i is applied to every band and
/// output (i, b) sits at channel i * bands + b. Horizontal stacking is MIMO:
/// output i = sum_c z_c * q_{i,c}.
struct FilterBank {
  LiftingSpec spec;
  std::size_t filters = 0;
  std::vector<ComplexTensor> taps;  // per filter: bands_used x filter_rows x filter_cols

  std::size_t output_channels() const {
    return spec.stacking == Stacking::VerticalGradient ? filters * spec.bands() : filters;
  }
};

FilterBank build_filterbank(const CMatrix &q, const LiftingSpec &spec);

/// Valid convolutions: bands x H x W -> output_channels x Hv x Wv.
ComplexTensor apply_filterbank(const FilterBank &bank, const ComplexTensor &z);
/// Flipped-filter correlation scattered back onto the full grid.
ComplexTensor apply_filterbank_adjoint(const FilterBank &bank, const ComplexTensor &w);

/// L(Z) = Z - ratio * J^H J Z, the first-order denoiser with ratio = lambda / beta.
ComplexTensor residual_projector(const FilterBank &bank, const ComplexTensor &z, double ratio);

/// Places valid-position outputs (C x Hv x Wv) at their grid positions n in a
/// zero C x H x W tensor.
ComplexTensor embed_valid(const ComplexTensor &w, const LiftingSpec &spec);

/// ||T(Z) Q||_F^2 and its gradient operator T^H(T(Z) Q Q^H), through the
/// explicit lifted matrix.
class LiftedPenalty {
 public:
  LiftedPenalty(CMatrix q, LiftingSpec spec);

  double value(const ComplexTensor &z) const;
  ComplexTensor normal(const ComplexTensor &z) const;
  const LiftingSpec &spec() const { return spec_; }

 private:
  CMatrix q_;
  LiftingSpec spec_;
};

}  // namespace slr::lift
