#include "slr/nn/ops.hpp"

#include <Eigen/Dense>
#include <stdexcept>

#include "slr/fft.hpp"
#include "slr/lifting.hpp"

namespace slr::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  std::size_t c, h, w, f, k;
  std::size_t pad() const { return k / 2; }
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return h * w; }
};

ConvGeom conv_geometry(const RealTensor &x, const RealTensor &w, const RealTensor &b) {
  if (x.ndim() != 3) throw std::invalid_argument("conv2d: input must be C x H x W, got " + shape_string(x.shape()));
  if (w.ndim() != 4 || w.extent(2) != w.extent(3) || w.extent(2) % 2 == 0)
    throw std::invalid_argument("conv2d: weights must be F x C x k x k with odd k, got " + shape_string(w.shape()));
  if (w.extent(1) != x.extent(0))
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.extent(1)) + " input channels, got " +
                                std::to_string(x.extent(0)));
  if (b.ndim() != 1 || b.extent(0) != w.extent(0)) throw std::invalid_argument("conv2d: bias must have F entries");
  return {x.extent(0), x.extent(1), x.extent(2), w.extent(0), w.extent(2)};
}

RowMat im2col(const RealTensor &x, const ConvGeom &g) {
  RowMat col = RowMat::Zero(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
  const long p = static_cast<long>(g.pad());
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double *dst = col.data() + ((c * g.k + ky) * g.k + kx) * g.cols();
        const long dy = static_cast<long>(ky) - p, dx = static_cast<long>(kx) - p;
        for (std::size_t y = 0; y < g.h; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          const double *src = x.data() + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(g.w), static_cast<long>(g.w) - dx);
          for (long xx = x0; xx < x1; ++xx) dst[y * g.w + static_cast<std::size_t>(xx)] = src[xx + dx];
        }
      }
  return col;
}

RealTensor col2im(const RowMat &col, const ConvGeom &g) {
  RealTensor x({g.c, g.h, g.w});
  const long p = static_cast<long>(g.pad());
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double *src = col.data() + ((c * g.k + ky) * g.k + kx) * g.cols();
        const long dy = static_cast<long>(ky) - p, dx = static_cast<long>(kx) - p;
        for (std::size_t y = 0; y < g.h; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          double *dst = x.data() + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(g.w), static_cast<long>(g.w) - dx);
          for (long xx = x0; xx < x1; ++xx) dst[xx + dx] += src[y * g.w + static_cast<std::size_t>(xx)];
        }
      }
  return x;
}

RealTensor conv_forward(const RealTensor &x, const RealTensor &w, const RealTensor &b, const ConvGeom &g,
                        const RowMat &col) {
  RealTensor y({g.f, g.h, g.w});
  MapMat ym(y.data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(g.cols()));
  ConstMapMat wm(w.data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(g.rows()));
  ym.noalias() = wm * col;
  for (std::size_t f = 0; f < g.f; ++f) ym.row(static_cast<Eigen::Index>(f)).array() += b[f];
  (void)x;
  return y;
}

template <class T>
Tensor<T> elementwise(const Tensor<T> &a, const Tensor<T> &b, double sign) {
  a.check_same(b);
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * b[i];
  return out;
}

ComplexTensor apply_g(const ComplexTensor &x, Weighting w) {
  return w == Weighting::Gradient ? lift::grad_weight_channels(x) : x;
}
ComplexTensor apply_gh(const ComplexTensor &z, Weighting w) {
  return w == Weighting::Gradient ? lift::grad_weight_channels_adjoint(z) : z;
}

}  // namespace

Weighting parse_weighting(const std::string &name) {
  if (name == "identity") return Weighting::Identity;
  if (name == "gradient") return Weighting::Gradient;
  throw std::invalid_argument("unknown weighting '" + name + "' (expected identity or gradient)");
}

std::string to_string(Weighting w) { return w == Weighting::Gradient ? "gradient" : "identity"; }

RealTensor conv2d(const RealTensor &x, const RealTensor &w, const RealTensor &b) {
  const ConvGeom g = conv_geometry(x, w, b);
  return conv_forward(x, w, b, g, im2col(x, g));
}

RealTensor dc_denominator(const acq::SamplingMask &mask, double lambda1, double lambda2, Weighting weighting) {
  if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("dc_solve: regularization weights must be >= 0");
  const RealTensor wg = weighting == Weighting::Gradient ? lift::grad_gram_diagonal(mask.height, mask.width)
                                                         : RealTensor({mask.height, mask.width});
  RealTensor den({mask.height, mask.width});
  for (std::size_t i = 0; i < den.size(); ++i) {
    den[i] = (mask.at(i) ? 1.0 : 0.0) + lambda1 * (weighting == Weighting::Gradient ? wg[i] : 1.0) + lambda2;
    if (!(den[i] > 0))
      throw std::invalid_argument("dc_solve: zero denominator (unsampled location with no active regularizer)");
  }
  return den;
}

ComplexTensor dc_solve(const acq::MultiChannelKSpace &b, const ComplexTensor &theta, const ComplexTensor *phi,
                       double lambda1, double lambda2, Weighting weighting) {
  const RealTensor den = dc_denominator(b.mask, lambda1, lambda2, weighting);
  const ComplexTensor gh = apply_gh(theta, weighting);
  gh.check_same(b.data);
  if (lambda2 != 0 && !phi) throw std::invalid_argument("dc_solve: lambda2 > 0 needs an image prior");
  if (phi) phi->check_same(b.data);
  const std::size_t plane = den.size();
  ComplexTensor x(b.data.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t p = i % plane;
    cplx num = (b.mask.at(p) ? b.data[i] : cplx(0)) + lambda1 * gh[i];
    if (phi && lambda2 != 0) num += lambda2 * (*phi)[i];
    x[i] = num / den[p];
  }
  return x;
}

namespace op {

Var conv2d(Tape &t, Var x, Var w, Var b) {
  const RealTensor &xv = t.real(x), &wv = t.real(w), &bv = t.real(b);
  const ConvGeom g = conv_geometry(xv, wv, bv);
  RowMat col = im2col(xv, g);
  RealTensor y = conv_forward(xv, wv, bv, g, col);
  const bool need_x = t.requires_grad(x);
  return t.record(std::move(y), {x, w, b},
                  [x, w, b, g, need_x, col = std::move(col)](Tape &tp, const Value &gv) {
                    const RealTensor &gy = std::get<RealTensor>(gv);
                    ConstMapMat gym(gy.data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(g.cols()));
                    if (tp.requires_grad(w)) {
                      RealTensor gw(tp.real(w).shape());
                      MapMat gwm(gw.data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(g.rows()));
                      gwm.noalias() = gym * col.transpose();
                      tp.accumulate(w, gw);
                    }
                    if (tp.requires_grad(b)) {
                      RealTensor gb({g.f});
                      for (std::size_t f = 0; f < g.f; ++f) gb[f] = gym.row(static_cast<Eigen::Index>(f)).sum();
                      tp.accumulate(b, gb);
                    }
                    if (need_x) {
                      ConstMapMat wm(tp.real(w).data(), static_cast<Eigen::Index>(g.f),
                                     static_cast<Eigen::Index>(g.rows()));
                      RowMat gcol = wm.transpose() * gym;
                      tp.accumulate(x, col2im(gcol, g));
                    }
                  });
}

Var relu(Tape &t, Var x) {
  RealTensor y = t.real(x);
  for (auto &v : y) v = v > 0 ? v : 0.0;
  return t.record(std::move(y), {x}, [x](Tape &tp, const Value &gv) {
    RealTensor g = std::get<RealTensor>(gv);
    const RealTensor &xv = tp.real(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(xv[i] > 0)) g[i] = 0;
    tp.accumulate(x, g);
  });
}

namespace {
Var add_sub(Tape &t, Var a, Var b, double sign) {
  if (t.holds_complex(a)) {
    ComplexTensor y = elementwise(t.complex(a), t.complex(b), sign);
    return t.record(std::move(y), {a, b}, [a, b, sign](Tape &tp, const Value &gv) {
      const auto &g = std::get<ComplexTensor>(gv);
      tp.accumulate(a, g);
      if (tp.requires_grad(b)) tp.accumulate(b, sign * g);
    });
  }
  RealTensor y = elementwise(t.real(a), t.real(b), sign);
  return t.record(std::move(y), {a, b}, [a, b, sign](Tape &tp, const Value &gv) {
    const auto &g = std::get<RealTensor>(gv);
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, sign * g);
  });
}
}  // namespace

Var add(Tape &t, Var a, Var b) { return add_sub(t, a, b, 1.0); }
Var sub(Tape &t, Var a, Var b) { return add_sub(t, a, b, -1.0); }

Var scale(Tape &t, Var a, double s) {
  if (t.holds_complex(a))
    return t.record(s * t.complex(a), {a},
                    [a, s](Tape &tp, const Value &gv) { tp.accumulate(a, s * std::get<ComplexTensor>(gv)); });
  return t.record(s * t.real(a), {a},
                  [a, s](Tape &tp, const Value &gv) { tp.accumulate(a, s * std::get<RealTensor>(gv)); });
}

Var pack(Tape &t, Var z) {
  const ComplexTensor &zv = t.complex(z);
  if (zv.ndim() != 3) throw std::invalid_argument("pack: expected C x H x W");
  const std::size_t c = zv.extent(0), plane = zv.extent(1) * zv.extent(2);
  RealTensor x({2 * c, zv.extent(1), zv.extent(2)});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) {
      x[(2 * ch) * plane + i] = zv[ch * plane + i].real();
      x[(2 * ch + 1) * plane + i] = zv[ch * plane + i].imag();
    }
  return t.record(std::move(x), {z}, [z, c, plane](Tape &tp, const Value &gv) {
    const auto &g = std::get<RealTensor>(gv);
    ComplexTensor gz(tp.complex(z).shape());
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) gz[ch * plane + i] = cplx(g[(2 * ch) * plane + i], g[(2 * ch + 1) * plane + i]);
    tp.accumulate(z, gz);
  });
}

Var unpack(Tape &t, Var x) {
  const RealTensor &xv = t.real(x);
  if (xv.ndim() != 3 || xv.extent(0) % 2 != 0) throw std::invalid_argument("unpack: expected 2C x H x W");
  const std::size_t c = xv.extent(0) / 2, plane = xv.extent(1) * xv.extent(2);
  ComplexTensor z({c, xv.extent(1), xv.extent(2)});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) z[ch * plane + i] = cplx(xv[(2 * ch) * plane + i], xv[(2 * ch + 1) * plane + i]);
  return t.record(std::move(z), {x}, [x, c, plane](Tape &tp, const Value &gv) {
    const auto &g = std::get<ComplexTensor>(gv);
    RealTensor gx(tp.real(x).shape());
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) {
        gx[(2 * ch) * plane + i] = g[ch * plane + i].real();
        gx[(2 * ch + 1) * plane + i] = g[ch * plane + i].imag();
      }
    tp.accumulate(x, gx);
  });
}

Var shift(Tape &t, Var z, bool inverse) {
  ComplexTensor y = inverse ? ifftshift(t.complex(z)) : fftshift(t.complex(z));
  return t.record(std::move(y), {z}, [z, inverse](Tape &tp, const Value &gv) {
    const auto &g = std::get<ComplexTensor>(gv);
    tp.accumulate(z, inverse ? fftshift(g) : ifftshift(g));
  });
}

Var fft2(Tape &t, Var z) {
  return t.record(slr::fft2(t.complex(z)), {z}, [z](Tape &tp, const Value &gv) {
    const auto &g = std::get<ComplexTensor>(gv);
    const auto &s = g.shape();
    const double n = static_cast<double>(s[s.size() - 1] * s[s.size() - 2]);
    tp.accumulate(z, n * slr::ifft2(g));
  });
}

Var ifft2(Tape &t, Var z) {
  return t.record(slr::ifft2(t.complex(z)), {z}, [z](Tape &tp, const Value &gv) {
    const auto &g = std::get<ComplexTensor>(gv);
    const auto &s = g.shape();
    const double n = static_cast<double>(s[s.size() - 1] * s[s.size() - 2]);
    tp.accumulate(z, (1.0 / n) * slr::fft2(g));
  });
}

Var grad_weight(Tape &t, Var z) {
  return t.record(lift::grad_weight_channels(t.complex(z)), {z}, [z](Tape &tp, const Value &gv) {
    tp.accumulate(z, lift::grad_weight_channels_adjoint(std::get<ComplexTensor>(gv)));
  });
}

Var grad_weight_adjoint(Tape &t, Var z) {
  return t.record(lift::grad_weight_channels_adjoint(t.complex(z)), {z}, [z](Tape &tp, const Value &gv) {
    tp.accumulate(z, lift::grad_weight_channels(std::get<ComplexTensor>(gv)));
  });
}

Var dc_solve(Tape &t, const acq::MultiChannelKSpace &b, Var theta, const Var *phi, double lambda1, double lambda2,
             Weighting weighting) {
  ComplexTensor x = nn::dc_solve(b, t.complex(theta), phi ? &t.complex(*phi) : nullptr, lambda1, lambda2, weighting);
  RealTensor den = dc_denominator(b.mask, lambda1, lambda2, weighting);
  const bool has_phi = phi != nullptr;
  const Var phi_v = has_phi ? *phi : theta;
  auto backward = [theta, phi_v, has_phi, lambda1, lambda2, weighting, den = std::move(den)](Tape &tp,
                                                                                            const Value &gv) {
    ComplexTensor g = std::get<ComplexTensor>(gv);
    const std::size_t plane = den.size();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= den[i % plane];
    if (tp.requires_grad(theta)) tp.accumulate(theta, lambda1 * apply_g(g, weighting));
    if (has_phi && tp.requires_grad(phi_v)) tp.accumulate(phi_v, lambda2 * g);
  };
  if (has_phi) return t.record(std::move(x), {theta, *phi}, std::move(backward));
  return t.record(std::move(x), {theta}, std::move(backward));
}

Var mse(Tape &t, Var a, const ComplexTensor &target) {
  const ComplexTensor &av = t.complex(a);
  av.check_same(target);
  const double n = 2.0 * static_cast<double>(av.size());
  RealTensor loss({1});
  loss[0] = norm2(av - target) / n;
  return t.record(std::move(loss), {a}, [a, target, n](Tape &tp, const Value &gv) {
    const double s = std::get<RealTensor>(gv)[0] * 2.0 / n;
    tp.accumulate(a, s * (tp.complex(a) - target));
  });
}

Var mse(Tape &t, Var a, const RealTensor &target) {
  const RealTensor &av = t.real(a);
  av.check_same(target);
  const double n = static_cast<double>(av.size());
  RealTensor loss({1});
  loss[0] = norm2(av - target) / n;
  return t.record(std::move(loss), {a}, [a, target, n](Tape &tp, const Value &gv) {
    const double s = std::get<RealTensor>(gv)[0] * 2.0 / n;
    tp.accumulate(a, s * (tp.real(a) - target));
  });
}

}  // namespace op
}  // namespace slr::nn
