#include "slr/lifting.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slr/fft.hpp"

namespace slr::lift {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_bands(const ComplexTensor &z, const LiftingSpec &spec, const char *who) {
  if (z.ndim() != 3 || z.extent(0) != spec.bands() || z.extent(1) != spec.height ||
      z.extent(2) != spec.width)
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(spec.bands()) + "x" +
                                std::to_string(spec.height) + "x" + std::to_string(spec.width) + ", got " +
                                shape_string(z.shape()));
}

ComplexTensor as_single_channel(const ComplexTensor &x) {
  if (x.ndim() == 2) return x.reshaped({1, x.extent(0), x.extent(1)});
  if (x.ndim() == 3 && x.extent(0) == 1) return x;
  throw std::invalid_argument("grad_weight: single-channel input required, got " + shape_string(x.shape()));
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Stacking parse_stacking(const std::string &name) {
  if (name == "vertical-gradient") return Stacking::VerticalGradient;
  if (name == "horizontal-multichannel") return Stacking::HorizontalMultichannel;
  throw std::invalid_argument("unknown stacking '" + name + "'");
}

std::string to_string(Stacking s) {
  return s == Stacking::VerticalGradient ? "vertical-gradient" : "horizontal-multichannel";
}

void LiftingSpec::validate() const {
  if (channels == 0) throw std::invalid_argument("lifting needs at least one channel");
  if (filter_rows == 0 || filter_cols == 0) throw std::invalid_argument("filter window must be non-empty");
  if (filter_rows > height || filter_cols > width)
    throw std::invalid_argument("filter window " + std::to_string(filter_rows) + "x" +
                                std::to_string(filter_cols) + " larger than grid " + std::to_string(height) +
                                "x" + std::to_string(width));
}

ComplexTensor grad_weight_channels(const ComplexTensor &x) {
  if (x.ndim() != 3) throw std::invalid_argument("grad_weight_channels: expected M x H x W");
  const std::size_t m = x.extent(0), h = x.extent(1), w = x.extent(2);
  ComplexTensor z({2 * m, h, w});
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < h; ++r) {
      const double ky = kTwoPi * static_cast<double>(signed_frequency(r, h));
      for (std::size_t col = 0; col < w; ++col) {
        const double kx = kTwoPi * static_cast<double>(signed_frequency(col, w));
        const cplx v = x(c, r, col);
        z(2 * c, r, col) = cplx(0, kx) * v;
        z(2 * c + 1, r, col) = cplx(0, ky) * v;
      }
    }
  return z;
}

ComplexTensor grad_weight_channels_adjoint(const ComplexTensor &z) {
  if (z.ndim() != 3 || z.extent(0) % 2 != 0)
    throw std::invalid_argument("grad_weight adjoint: expected an even number of bands, got " +
                                shape_string(z.shape()));
  const std::size_t m = z.extent(0) / 2, h = z.extent(1), w = z.extent(2);
  ComplexTensor x({m, h, w});
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < h; ++r) {
      const double ky = kTwoPi * static_cast<double>(signed_frequency(r, h));
      for (std::size_t col = 0; col < w; ++col) {
        const double kx = kTwoPi * static_cast<double>(signed_frequency(col, w));
        x(c, r, col) = -(cplx(0, kx) * z(2 * c, r, col) + cplx(0, ky) * z(2 * c + 1, r, col));
      }
    }
  return x;
}

ComplexTensor grad_weight(const ComplexTensor &x_hat) { return grad_weight_channels(as_single_channel(x_hat)); }

ComplexTensor grad_weight_adjoint(const ComplexTensor &z) {
  if (z.ndim() != 3 || z.extent(0) != 2)
    throw std::invalid_argument("grad_weight_adjoint: expected 2 bands, got " + shape_string(z.shape()));
  return grad_weight_channels_adjoint(z);
}

RealTensor grad_gram_diagonal(std::size_t height, std::size_t width) {
  RealTensor d({height, width});
  for (std::size_t r = 0; r < height; ++r) {
    const double ky = kTwoPi * static_cast<double>(signed_frequency(r, height));
    for (std::size_t c = 0; c < width; ++c) {
      const double kx = kTwoPi * static_cast<double>(signed_frequency(c, width));
      d(r, c) = kx * kx + ky * ky;
    }
  }
  return d;
}

LiftedMatrix hankel_lift(const ComplexTensor &z, const LiftingSpec &spec) {
  spec.validate();
  check_bands(z, spec, "hankel_lift");
  const std::size_t fr = spec.filter_rows, fc = spec.filter_cols, taps = spec.taps();
  const std::size_t vr = spec.valid_rows(), vc = spec.valid_cols(), nv = spec.valid_count();
  const bool vertical = spec.stacking == Stacking::VerticalGradient;
  LiftedMatrix out{CMatrix(static_cast<Eigen::Index>(spec.lifted_rows()),
                           static_cast<Eigen::Index>(spec.lifted_cols())),
                   spec};
  for (std::size_t b = 0; b < spec.bands(); ++b)
    for (std::size_t vy = 0; vy < vr; ++vy)
      for (std::size_t vx = 0; vx < vc; ++vx) {
        const std::size_t ny = vy + fr - 1, nx = vx + fc - 1;
        const std::size_t n = vy * vc + vx;
        const auto row = static_cast<Eigen::Index>(vertical ? b * nv + n : n);
        for (std::size_t my = 0; my < fr; ++my)
          for (std::size_t mx = 0; mx < fc; ++mx) {
            const std::size_t m = my * fc + mx;
            const auto col = static_cast<Eigen::Index>(vertical ? m : b * taps + m);
            out.matrix(row, col) = z(b, ny - my, nx - mx);
          }
      }
  return out;
}

ComplexTensor lift_adjoint(const CMatrix &mat, const LiftingSpec &spec) {
  spec.validate();
  if (mat.rows() != static_cast<Eigen::Index>(spec.lifted_rows()) ||
      mat.cols() != static_cast<Eigen::Index>(spec.lifted_cols()))
    throw std::invalid_argument("lift_adjoint: matrix size does not match spec");
  const std::size_t fr = spec.filter_rows, fc = spec.filter_cols, taps = spec.taps();
  const std::size_t vr = spec.valid_rows(), vc = spec.valid_cols(), nv = spec.valid_count();
  const bool vertical = spec.stacking == Stacking::VerticalGradient;
  ComplexTensor z({spec.bands(), spec.height, spec.width});
  for (std::size_t b = 0; b < spec.bands(); ++b)
    for (std::size_t vy = 0; vy < vr; ++vy)
      for (std::size_t vx = 0; vx < vc; ++vx) {
        const std::size_t ny = vy + fr - 1, nx = vx + fc - 1;
        const std::size_t n = vy * vc + vx;
        const auto row = static_cast<Eigen::Index>(vertical ? b * nv + n : n);
        for (std::size_t my = 0; my < fr; ++my)
          for (std::size_t mx = 0; mx < fc; ++mx) {
            const std::size_t m = my * fc + mx;
            const auto col = static_cast<Eigen::Index>(vertical ? m : b * taps + m);
            z(b, ny - my, nx - mx) += mat(row, col);
          }
      }
  return z;
}

CMatrix lift_gram(const ComplexTensor &z, const LiftingSpec &spec) {
  const auto t = hankel_lift(z, spec);
  CMatrix g = t.matrix.adjoint() * t.matrix;
  return g;
}

CMatrix lift_gram_fft(const ComplexTensor &z, const LiftingSpec &spec) {
  spec.validate();
  check_bands(z, spec, "lift_gram_fft");
  const std::size_t fr = spec.filter_rows, fc = spec.filter_cols, taps = spec.taps();
  const std::size_t h = spec.height, w = spec.width, bands = spec.bands();
  const std::size_t vr = spec.valid_rows(), vc = spec.valid_cols();
  const bool vertical = spec.stacking == Stacking::VerticalGradient;
  const std::size_t ph = next_pow2(h + fr - 1), pw = next_pow2(w + fc - 1);

  auto padded_fft = [&](std::size_t b, long r_lo, long c_lo, bool restrict) {
    ComplexTensor p({ph, pw});
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        if (restrict) {
          const long rr = static_cast<long>(r) - r_lo, cc = static_cast<long>(c) - c_lo;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(vr) || cc >= static_cast<long>(vc)) continue;
        }
        p(r, c) = z(b, r, c);
      }
    return fft2(p);
  };

  std::vector<ComplexTensor> full(bands);
  for (std::size_t b = 0; b < bands; ++b) full[b] = padded_fft(b, 0, 0, false);

  CMatrix g = CMatrix::Zero(static_cast<Eigen::Index>(spec.lifted_cols()),
                            static_cast<Eigen::Index>(spec.lifted_cols()));
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t my = 0; my < fr; ++my)
      for (std::size_t mx = 0; mx < fc; ++mx) {
        const std::size_t m = my * fc + mx;
        // Rows p = n - m with n valid: p in [fr-1-my, ...) x [fc-1-mx, ...).
        const long r_lo = static_cast<long>(fr - 1 - my), c_lo = static_cast<long>(fc - 1 - mx);
        const ComplexTensor a = padded_fft(b, r_lo, c_lo, true);
        const std::size_t b2_lo = vertical ? b : 0, b2_hi = vertical ? b + 1 : bands;
        for (std::size_t b2 = b2_lo; b2 < b2_hi; ++b2) {
          ComplexTensor prod({ph, pw});
          for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = std::conj(a[i]) * full[b2][i];
          const ComplexTensor corr = ifft2(prod);
          for (std::size_t my2 = 0; my2 < fr; ++my2)
            for (std::size_t mx2 = 0; mx2 < fc; ++mx2) {
              const std::size_t m2 = my2 * fc + mx2;
              // lag d = m - m2
              const long dy = static_cast<long>(my) - static_cast<long>(my2);
              const long dx = static_cast<long>(mx) - static_cast<long>(mx2);
              const auto ry = static_cast<std::size_t>((dy + static_cast<long>(ph)) % static_cast<long>(ph));
              const auto rx = static_cast<std::size_t>((dx + static_cast<long>(pw)) % static_cast<long>(pw));
              const auto row = static_cast<Eigen::Index>(vertical ? m : b * taps + m);
              const auto col = static_cast<Eigen::Index>(vertical ? m2 : b2 * taps + m2);
              g(row, col) += corr(ry, rx);
            }
        }
      }
  }
  return g;
}

NullSpaceBasis nullspace_weight(const CMatrix &gram, double epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("nullspace_weight: epsilon must be > 0");
  if (gram.rows() != gram.cols()) throw std::invalid_argument("nullspace_weight: gram must be square");
  const double scale = std::max(1.0, gram.norm());
  if ((gram - gram.adjoint()).norm() > 1e-8 * scale)
    throw std::invalid_argument("nullspace_weight: gram is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
  if (eig.info() != Eigen::Success) throw std::runtime_error("nullspace_weight: eigensolver failed");
  Eigen::VectorXd d = eig.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::pow(std::max(d(i), 0.0) + epsilon, -0.25);
  const CMatrix &u = eig.eigenvectors();
  NullSpaceBasis out;
  out.q = u * d.cast<cplx>().asDiagonal() * u.adjoint();
  out.epsilon = epsilon;
  out.origin = NullSpaceOrigin::IrlsWeight;
  return out;
}

ComplexTensor calibration_block(const ComplexTensor &kspace, const acq::CalibrationRegion &region,
                                const LiftingSpec &spec) {
  if (kspace.ndim() != 3) throw std::invalid_argument("calibration_block: expected M x H x W");
  const std::size_t h = kspace.extent(1), w = kspace.extent(2);
  if (region.rows > h || region.cols > w) throw std::invalid_argument("calibration region exceeds grid");
  const ComplexTensor weighted =
      spec.stacking == Stacking::VerticalGradient ? grad_weight_channels(kspace) : kspace;
  const ComplexTensor centered = fftshift(weighted);
  const std::size_t r0 = h / 2 - region.rows / 2, c0 = w / 2 - region.cols / 2;
  ComplexTensor block({weighted.extent(0), region.rows, region.cols});
  for (std::size_t b = 0; b < weighted.extent(0); ++b)
    for (std::size_t r = 0; r < region.rows; ++r)
      for (std::size_t c = 0; c < region.cols; ++c) block(b, r, c) = centered(b, r0 + r, c0 + c);
  return block;
}

NullSpaceBasis calibrated_nullspace(const acq::MultiChannelKSpace &calib_ksp, const LiftingSpec &spec,
                                    double rank_tol) {
  if (!calib_ksp.mask.calib) throw std::invalid_argument("calibrated_nullspace: mask has no calibration region");
  const auto region = *calib_ksp.mask.calib;
  if (region.rows < spec.filter_rows || region.cols < spec.filter_cols)
    throw std::invalid_argument("calibrated_nullspace: calibration region " + std::to_string(region.rows) + "x" +
                                std::to_string(region.cols) + " too small for any row of the filter window");
  const LiftingSpec calib_spec = spec.with_grid(region.rows, region.cols);
  const ComplexTensor block = calibration_block(calib_ksp.data, region, spec);
  const auto t = hankel_lift(block, calib_spec);
  Eigen::BDCSVD<CMatrix> svd(t.matrix, Eigen::ComputeFullV);
  const Eigen::VectorXd &s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  std::vector<Eigen::Index> keep;
  const Eigen::Index cols = t.matrix.cols();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (j >= s.size() || s(j) < rank_tol * smax) keep.push_back(j);
  NullSpaceBasis out;
  out.q = CMatrix(cols, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.q.col(static_cast<Eigen::Index>(i)) = svd.matrixV().col(keep[i]);
  out.origin = NullSpaceOrigin::CalibrationNullspace;
  return out;
}

FilterBank build_filterbank(const CMatrix &q, const LiftingSpec &spec) {
  spec.validate();
  if (q.rows() != static_cast<Eigen::Index>(spec.lifted_cols()))
    throw std::invalid_argument("build_filterbank: Q has " + std::to_string(q.rows()) + " taps, expected " +
                                std::to_string(spec.lifted_cols()));
  FilterBank bank{spec, static_cast<std::size_t>(q.cols()), {}};
  const bool vertical = spec.stacking == Stacking::VerticalGradient;
  const std::size_t used = vertical ? 1 : spec.bands();
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    ComplexTensor f({used, spec.filter_rows, spec.filter_cols});
    for (std::size_t b = 0; b < used; ++b)
      for (std::size_t m = 0; m < spec.taps(); ++m)
        f[b * spec.taps() + m] = q(static_cast<Eigen::Index>(b * spec.taps() + m), i);
    bank.taps.push_back(std::move(f));
  }
  return bank;
}

namespace {

// dst += a * src, written out in real arithmetic so it vectorizes
void axpy_row(cplx a, const cplx *src, cplx *dst, std::size_t n) {
  const double ar = a.real(), ai = a.imag();
  const double *s = reinterpret_cast<const double *>(src);
  double *d = reinterpret_cast<double *>(dst);
  for (std::size_t i = 0; i < n; ++i) {
    const double sr = s[2 * i], si = s[2 * i + 1];
    d[2 * i] += ar * sr - ai * si;
    d[2 * i + 1] += ar * si + ai * sr;
  }
}

// out[v] += sum_m f[m] z[v + (fr-1) - m], v over valid positions.
void conv_valid_accumulate(std::span<const cplx> z, std::span<const cplx> f, std::span<cplx> out,
                           const LiftingSpec &s) {
  const std::size_t fr = s.filter_rows, fc = s.filter_cols, w = s.width;
  const std::size_t vr = s.valid_rows(), vc = s.valid_cols();
  for (std::size_t my = 0; my < fr; ++my)
    for (std::size_t mx = 0; mx < fc; ++mx) {
      const cplx tap = f[my * fc + mx];
      if (tap == cplx(0)) continue;
      for (std::size_t vy = 0; vy < vr; ++vy)
        axpy_row(tap, z.data() + (vy + fr - 1 - my) * w + (fc - 1 - mx), out.data() + vy * vc, vc);
    }
}

// Adjoint of conv_valid_accumulate: z[v + (fr-1) - m] += conj(f[m]) out[v].
void corr_scatter_accumulate(std::span<const cplx> out, std::span<const cplx> f, std::span<cplx> z,
                             const LiftingSpec &s) {
  const std::size_t fr = s.filter_rows, fc = s.filter_cols, w = s.width;
  const std::size_t vr = s.valid_rows(), vc = s.valid_cols();
  for (std::size_t my = 0; my < fr; ++my)
    for (std::size_t mx = 0; mx < fc; ++mx) {
      const cplx tap = std::conj(f[my * fc + mx]);
      if (tap == cplx(0)) continue;
      for (std::size_t vy = 0; vy < vr; ++vy)
        axpy_row(tap, out.data() + vy * vc, z.data() + (vy + fr - 1 - my) * w + (fc - 1 - mx), vc);
    }
}

}  // namespace

ComplexTensor apply_filterbank(const FilterBank &bank, const ComplexTensor &z) {
  const auto &s = bank.spec;
  check_bands(z, s, "apply_filterbank");
  const std::size_t taps = s.taps(), bands = s.bands();
  const bool vertical = s.stacking == Stacking::VerticalGradient;
  ComplexTensor out({bank.output_channels(), s.valid_rows(), s.valid_cols()});
  for (std::size_t i = 0; i < bank.filters; ++i) {
    const auto &f = bank.taps[i];
    for (std::size_t b = 0; b < bands; ++b) {
      const std::size_t oc = vertical ? i * bands + b : i;
      const std::size_t fb = vertical ? 0 : b;
      conv_valid_accumulate(z.slice(b), std::span<const cplx>(f.data() + fb * taps, taps), out.slice(oc), s);
    }
  }
  return out;
}

ComplexTensor apply_filterbank_adjoint(const FilterBank &bank, const ComplexTensor &w) {
  const auto &s = bank.spec;
  if (w.ndim() != 3 || w.extent(0) != bank.output_channels() || w.extent(1) != s.valid_rows() ||
      w.extent(2) != s.valid_cols())
    throw std::invalid_argument("apply_filterbank_adjoint: shape mismatch " + shape_string(w.shape()));
  const std::size_t taps = s.taps(), bands = s.bands();
  const bool vertical = s.stacking == Stacking::VerticalGradient;
  ComplexTensor z({bands, s.height, s.width});
  for (std::size_t i = 0; i < bank.filters; ++i) {
    const auto &f = bank.taps[i];
    for (std::size_t b = 0; b < bands; ++b) {
      const std::size_t oc = vertical ? i * bands + b : i;
      const std::size_t fb = vertical ? 0 : b;
      corr_scatter_accumulate(w.slice(oc), std::span<const cplx>(f.data() + fb * taps, taps), z.slice(b), s);
    }
  }
  return z;
}

ComplexTensor residual_projector(const FilterBank &bank, const ComplexTensor &z, double ratio) {
  ComplexTensor jhj = apply_filterbank_adjoint(bank, apply_filterbank(bank, z));
  ComplexTensor out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= ratio * jhj[i];
  return out;
}

ComplexTensor embed_valid(const ComplexTensor &w, const LiftingSpec &spec) {
  if (w.ndim() != 3 || w.extent(1) != spec.valid_rows() || w.extent(2) != spec.valid_cols())
    throw std::invalid_argument("embed_valid: shape mismatch " + shape_string(w.shape()));
  ComplexTensor out({w.extent(0), spec.height, spec.width});
  for (std::size_t c = 0; c < w.extent(0); ++c)
    for (std::size_t vy = 0; vy < spec.valid_rows(); ++vy)
      for (std::size_t vx = 0; vx < spec.valid_cols(); ++vx)
        out(c, vy + spec.filter_rows - 1, vx + spec.filter_cols - 1) = w(c, vy, vx);
  return out;
}

LiftedPenalty::LiftedPenalty(CMatrix q, LiftingSpec spec) : q_(std::move(q)), spec_(std::move(spec)) {
  spec_.validate();
  if (q_.rows() != static_cast<Eigen::Index>(spec_.lifted_cols()))
    throw std::invalid_argument("LiftedPenalty: Q row count does not match lifted columns");
}

double LiftedPenalty::value(const ComplexTensor &z) const {
  if (q_.cols() == 0) return 0.0;
  return (hankel_lift(z, spec_).matrix * q_).squaredNorm();
}

ComplexTensor LiftedPenalty::normal(const ComplexTensor &z) const {
  if (q_.cols() == 0) return ComplexTensor(z.shape());
  const CMatrix tq = hankel_lift(z, spec_).matrix * q_;
  return lift_adjoint(tq * q_.adjoint(), spec_);
}

}  // namespace slr::lift
