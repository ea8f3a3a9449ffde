#include "slr/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slr/fft.hpp"

namespace slr::acq {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_grid(std::size_t h, std::size_t w, const SamplingMask &mask) {
  if (mask.height != h || mask.width != w)
    throw std::invalid_argument("mask grid " + std::to_string(mask.height) + "x" +
                                std::to_string(mask.width) + " does not match data grid " +
                                std::to_string(h) + "x" + std::to_string(w));
}

// Scale c so that sum_i min(1, c * w_i) hits `target`.
std::vector<double> probabilities_for(const std::vector<double> &weights, double target) {
  std::vector<double> p(weights.size(), 0.0);
  if (target <= 0) return p;
  if (target >= static_cast<double>(weights.size())) {
    std::fill(p.begin(), p.end(), 1.0);
    return p;
  }
  auto total = [&](double c) {
    double s = 0;
    for (double w : weights) s += std::min(1.0, c * w);
    return s;
  };
  double lo = 0, hi = 1;
  while (total(hi) < target) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < target ? lo : hi) = mid;
  }
  for (std::size_t i = 0; i < weights.size(); ++i) p[i] = std::min(1.0, hi * weights[i]);
  return p;
}

struct EdgeShape {
  double x0, y0, bx, by, a;
  cplx amplitude;

  double mu(double x, double y) const {
    return bx * std::cos(kTwoPi * (x - x0)) + by * std::cos(kTwoPi * (y - y0)) - a;
  }
  // mu along the ray (x0, y0) + t (cos th, sin th).
  double ray(double t, double c, double s) const {
    return bx * std::cos(kTwoPi * t * c) + by * std::cos(kTwoPi * t * s) - a;
  }
};

}  // namespace

MaskKind parse_mask_kind(const std::string &name) {
  if (name == "uniform-lines") return MaskKind::UniformLines;
  if (name == "variable-density-lines") return MaskKind::VariableDensityLines;
  if (name == "variable-density-2d") return MaskKind::VariableDensity2d;
  throw std::invalid_argument("unknown mask kind '" + name + "'");
}

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::UniformLines: return "uniform-lines";
    case MaskKind::VariableDensityLines: return "variable-density-lines";
    case MaskKind::VariableDensity2d: return "variable-density-2d";
  }
  return "unknown";
}

double SamplingMask::fraction() const {
  return sampled.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(sampled.size());
}

std::size_t SamplingMask::count() const {
  return static_cast<std::size_t>(std::count(sampled.begin(), sampled.end(), std::uint8_t{1}));
}

ComplexTensor SamplingMask::as_tensor() const {
  ComplexTensor t({height, width});
  for (std::size_t i = 0; i < sampled.size(); ++i) t[i] = sampled[i] ? 1.0 : 0.0;
  return t;
}

SamplingMask SamplingMask::from_tensor(const ComplexTensor &t) {
  if (t.ndim() != 2) throw std::invalid_argument("mask tensor must be H x W, got " + shape_string(t.shape()));
  SamplingMask m(t.extent(0), t.extent(1));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == cplx(1.0))
      m.sampled[i] = 1;
    else if (t[i] != cplx(0.0))
      throw std::invalid_argument("mask tensor entries must be 0 or 1");
  }
  return m;
}

SamplingMask SamplingMask::operator&(const SamplingMask &o) const {
  check_grid(o.height, o.width, *this);
  SamplingMask out = *this;
  for (std::size_t i = 0; i < sampled.size(); ++i) out.sampled[i] = sampled[i] & o.sampled[i];
  return out;
}

std::vector<std::size_t> centered_indices(std::size_t n, std::size_t extent) {
  if (extent > n) throw std::invalid_argument("calibration extent exceeds grid");
  std::vector<std::size_t> idx;
  const long lo = -static_cast<long>(extent / 2);
  for (std::size_t i = 0; i < extent; ++i) {
    const long f = lo + static_cast<long>(i);
    idx.push_back(static_cast<std::size_t>((f + static_cast<long>(n)) % static_cast<long>(n)));
  }
  return idx;
}

double default_density_width(MaskKind kind) { return kind == MaskKind::VariableDensity2d ? 0.5 : 1.0 / 6.0; }

SamplingMask make_mask(Rng &rng, std::size_t height, std::size_t width, MaskKind kind,
                       double acceleration, std::size_t calib_extent, double density_width) {
  if (density_width == 0) density_width = default_density_width(kind);
  if (!(density_width > 0)) throw std::invalid_argument("density width must be > 0");
  if (!(acceleration >= 1.0)) throw std::invalid_argument("acceleration must be >= 1");
  if (height == 0 || width == 0) throw std::invalid_argument("mask grid must be non-empty");
  const bool lines = kind != MaskKind::VariableDensity2d;
  if (calib_extent > height || (!lines && calib_extent > width))
    throw std::invalid_argument("calibration extent " + std::to_string(calib_extent) + " exceeds grid");

  SamplingMask mask(height, width, acceleration == 1.0);
  if (calib_extent > 0) mask.calib = CalibrationRegion{calib_extent, lines ? width : calib_extent};
  if (acceleration == 1.0) return mask;

  std::vector<std::uint8_t> calib_row(height, 0), calib_col(width, 0);
  for (auto r : centered_indices(height, calib_extent)) calib_row[r] = 1;
  if (lines)
    std::fill(calib_col.begin(), calib_col.end(), calib_extent > 0 ? 1 : 0);
  else
    for (auto c : centered_indices(width, calib_extent)) calib_col[c] = 1;

  auto set_row = [&](std::size_t r) {
    std::fill_n(mask.sampled.begin() + static_cast<long>(r * width), width, std::uint8_t{1});
  };

  switch (kind) {
    case MaskKind::UniformLines: {
      for (std::size_t r = 0; r < height; ++r) {
        const auto cur = static_cast<long>(std::floor(static_cast<double>(r) / acceleration));
        const auto prev = static_cast<long>(std::floor((static_cast<double>(r) - 1.0) / acceleration));
        if (r == 0 || cur != prev || calib_row[r]) set_row(r);
      }
      break;
    }
    case MaskKind::VariableDensityLines: {
      const double sigma = static_cast<double>(height) * density_width;
      std::vector<double> w;
      std::vector<std::size_t> free_rows;
      std::size_t n_calib = 0;
      for (std::size_t r = 0; r < height; ++r) {
        if (calib_row[r]) {
          ++n_calib;
          continue;
        }
        const double k = static_cast<double>(signed_frequency(r, height)) / sigma;
        w.push_back(std::exp(-k * k));
        free_rows.push_back(r);
      }
      const double target = static_cast<double>(height) / acceleration - static_cast<double>(n_calib);
      const auto p = probabilities_for(w, target);
      for (std::size_t r = 0; r < height; ++r)
        if (calib_row[r]) set_row(r);
      for (std::size_t i = 0; i < free_rows.size(); ++i)
        if (rng.uniform() < p[i]) set_row(free_rows[i]);
      break;
    }
    case MaskKind::VariableDensity2d: {
      const double sy = static_cast<double>(height) * density_width, sx = static_cast<double>(width) * density_width;
      std::vector<double> w;
      std::vector<std::size_t> free_idx;
      std::size_t n_calib = 0;
      for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          if (calib_row[r] && calib_col[c]) {
            ++n_calib;
            mask.sampled[r * width + c] = 1;
            continue;
          }
          const double ky = static_cast<double>(signed_frequency(r, height)) / sy;
          const double kx = static_cast<double>(signed_frequency(c, width)) / sx;
          w.push_back(std::exp(-(kx * kx + ky * ky)));
          free_idx.push_back(r * width + c);
        }
      }
      const double target =
          static_cast<double>(height * width) / acceleration - static_cast<double>(n_calib);
      const auto p = probabilities_for(w, target);
      for (std::size_t i = 0; i < free_idx.size(); ++i)
        if (rng.uniform() < p[i]) mask.sampled[free_idx[i]] = 1;
      break;
    }
  }
  return mask;
}

CoilSensitivities make_sensitivities(Rng &rng, std::size_t height, std::size_t width,
                                     std::size_t coils, std::size_t bandwidth, bool normalize) {
  if (coils == 0) throw std::invalid_argument("need at least one coil");
  if (bandwidth == 0 || bandwidth > std::min(height, width))
    throw std::invalid_argument("sensitivity bandwidth " + std::to_string(bandwidth) +
                                " must be in [1, min(grid)]");
  ComplexTensor centered({coils, height, width});
  const std::size_t r0 = height / 2 - bandwidth / 2, c0 = width / 2 - bandwidth / 2;
  for (std::size_t m = 0; m < coils; ++m)
    for (std::size_t r = 0; r < bandwidth; ++r)
      for (std::size_t c = 0; c < bandwidth; ++c) centered(m, r0 + r, c0 + c) = rng.complex_normal();
  ComplexTensor maps = ifft2(ifftshift(centered));

  const std::size_t n = height * width;
  std::vector<double> ss(n, 0.0);
  for (std::size_t m = 0; m < coils; ++m) {
    auto ch = maps.slice(m);
    for (std::size_t i = 0; i < n; ++i) ss[i] += std::norm(ch[i]);
  }
  if (normalize) {
    for (std::size_t m = 0; m < coils; ++m) {
      auto ch = maps.slice(m);
      for (std::size_t i = 0; i < n; ++i) ch[i] /= std::sqrt(ss[i]);
    }
  } else {
    double mean = 0;
    for (double v : ss) mean += v;
    mean /= static_cast<double>(n);
    maps *= 1.0 / std::sqrt(mean);
  }
  return {std::move(maps), bandwidth, normalize};
}

Phantom make_phantom(Rng &rng, std::size_t height, std::size_t width, std::size_t n_shapes, double fill) {
  if (height < 16 || width < 16) throw std::invalid_argument("phantom grid must be at least 16x16");
  if (!(fill >= 0.3 && fill <= 1.0)) throw std::invalid_argument("phantom fill must lie in [0.3, 1]");
  Phantom ph{ComplexTensor({height, width}), LabelMap({height, width})};
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  const double extent = std::min(h, w);
  for (std::size_t s = 0; s < n_shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.6;
    const double cy = rng.uniform(0.5 - fill / 4, 0.5 + fill / 4) * h, cx = rng.uniform(0.5 - fill / 4, 0.5 + fill / 4) * w;
    const double ay = rng.uniform(0.06, fill / 4) * extent, ax = rng.uniform(0.06, fill / 4) * extent;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const cplx amp = std::polar(rng.uniform(0.2, 1.0), rng.uniform(0.0, kTwoPi));
    const double ct = std::cos(theta), st = std::sin(theta);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
        const double u = (ct * dx + st * dy) / ax, v = (-st * dx + ct * dy) / ay;
        const bool inside = ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        if (inside) {
          ph.image(r, c) = amp;
          ph.regions(r, c) = static_cast<int>(s + 1);
        }
      }
    }
  }
  return ph;
}

EdgePhantom make_edge_phantom(Rng &rng, std::size_t height, std::size_t width, std::size_t n_shapes) {
  if (height < 16 || width < 16) throw std::invalid_argument("phantom grid must be at least 16x16");
  if (n_shapes > 30) throw std::invalid_argument("edge phantom supports at most 30 shapes");
  std::vector<EdgeShape> shapes;
  for (std::size_t s = 0; s < n_shapes; ++s) {
    EdgeShape e{};
    e.x0 = rng.uniform(0.3, 0.7);
    e.y0 = rng.uniform(0.3, 0.7);
    e.bx = rng.uniform(0.7, 1.0);
    e.by = rng.uniform(0.7, 1.0);
    e.a = rng.uniform(0.72, 0.9) * (e.bx + e.by);
    e.amplitude = std::polar(rng.uniform(0.2, 1.0), rng.uniform(0.0, kTwoPi));
    shapes.push_back(e);
  }

  EdgePhantom out;
  out.kspace = ComplexTensor({height, width});
  const double hw = static_cast<double>(height * width);
  const std::size_t quad = std::max<std::size_t>(2048, 64 * std::max(height, width));

  for (const auto &e : shapes) {
    // Boundary r(t) = center + rho(theta) u(theta), theta = 2 pi t.
    std::vector<double> px(quad), py(quad), dx(quad), dy(quad);
    for (std::size_t q = 0; q < quad; ++q) {
      const double th = kTwoPi * static_cast<double>(q) / static_cast<double>(quad);
      const double c = std::cos(th), s = std::sin(th);
      double lo = 0, hi = 0.5 / std::max(std::abs(c), std::abs(s));
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (e.ray(mid, c, s) > 0 ? lo : hi) = mid;
      }
      double rho = 0.5 * (lo + hi);
      for (int it = 0; it < 3; ++it) {
        const double f = e.ray(rho, c, s);
        const double df = -kTwoPi * (e.bx * c * std::sin(kTwoPi * rho * c) + e.by * s * std::sin(kTwoPi * rho * s));
        if (df != 0) rho -= f / df;
      }
      // Gradient of mu at the boundary point, and d rho / d theta.
      const double gx = -kTwoPi * e.bx * std::sin(kTwoPi * rho * c);
      const double gy = -kTwoPi * e.by * std::sin(kTwoPi * rho * s);
      const double drho = -rho * (gx * (-s) + gy * c) / (gx * c + gy * s);
      px[q] = e.x0 + rho * c;
      py[q] = e.y0 + rho * s;
      dx[q] = kTwoPi * (drho * c - rho * s);
      dy[q] = kTwoPi * (drho * s + rho * c);
    }
    double area = 0;
    for (std::size_t q = 0; q < quad; ++q) area += 0.5 * (px[q] * dy[q] - py[q] * dx[q]);
    area /= static_cast<double>(quad);

    for (std::size_t r = 0; r < height; ++r) {
      const auto ky = static_cast<double>(signed_frequency(r, height));
      for (std::size_t col = 0; col < width; ++col) {
        const auto kx = static_cast<double>(signed_frequency(col, width));
        cplx coef;
        if (kx == 0 && ky == 0) {
          coef = area;
        } else {
          cplx acc = 0;
          for (std::size_t q = 0; q < quad; ++q) {
            const double phase = -kTwoPi * (kx * px[q] + ky * py[q]);
            acc += (kx * dy[q] - ky * dx[q]) * cplx(std::cos(phase), std::sin(phase));
          }
          acc /= static_cast<double>(quad);
          coef = cplx(0, 1) / (kTwoPi * (kx * kx + ky * ky)) * acc;
        }
        out.kspace(r, col) += hw * e.amplitude * coef;
      }
    }
  }

  out.phantom.image = ifft2(out.kspace);
  out.phantom.regions = LabelMap({height, width});
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      int label = 0;
      for (std::size_t s = 0; s < shapes.size(); ++s)
        if (shapes[s].mu(static_cast<double>(c) / static_cast<double>(width),
                         static_cast<double>(r) / static_cast<double>(height)) > 0)
          label |= 1 << s;
      out.phantom.regions(r, c) = label;
    }

  // mu_hat = convolution of the per-shape 3 x 3 coefficient arrays.
  ComplexTensor mu({1, 1});
  mu(0, 0) = 1.0;
  for (const auto &e : shapes) {
    ComplexTensor f({3, 3});
    f(1, 1) = -e.a;
    f(1, 0) = 0.5 * e.bx * std::polar(1.0, kTwoPi * e.x0);  // kx = -1
    f(1, 2) = 0.5 * e.bx * std::polar(1.0, -kTwoPi * e.x0);
    f(0, 1) = 0.5 * e.by * std::polar(1.0, kTwoPi * e.y0);  // ky = -1
    f(2, 1) = 0.5 * e.by * std::polar(1.0, -kTwoPi * e.y0);
    const std::size_t n = mu.extent(0);
    ComplexTensor next({n + 2, n + 2});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t u = 0; u < 3; ++u)
          for (std::size_t v = 0; v < 3; ++v) next(i + u, j + v) += mu(i, j) * f(u, v);
    mu = std::move(next);
  }
  out.annihilator = std::move(mu);
  return out;
}

ComplexTensor coil_images(const ComplexTensor &image, const CoilSensitivities &sens) {
  const auto &maps = sens.maps;
  if (image.ndim() != 2 || maps.extent(1) != image.extent(0) || maps.extent(2) != image.extent(1))
    throw std::invalid_argument("coil_images: image " + shape_string(image.shape()) +
                                " does not match maps " + shape_string(maps.shape()));
  ComplexTensor out(maps.shape());
  const std::size_t n = image.size();
  for (std::size_t m = 0; m < maps.extent(0); ++m) {
    auto s = maps.slice(m);
    auto o = out.slice(m);
    for (std::size_t i = 0; i < n; ++i) o[i] = s[i] * image[i];
  }
  return out;
}

void apply_mask(ComplexTensor &kspace, const SamplingMask &mask) {
  const std::size_t nd = kspace.ndim();
  if (nd < 2) throw std::invalid_argument("apply_mask: need at least 2 axes");
  check_grid(kspace.extent(nd - 2), kspace.extent(nd - 1), mask);
  const std::size_t n = mask.sampled.size();
  for (std::size_t i = 0; i < kspace.size(); ++i)
    if (!mask.sampled[i % n]) kspace[i] = 0;
}

MultiChannelKSpace apply_forward(const ComplexTensor &coil_images, const SamplingMask &mask) {
  if (coil_images.ndim() != 3) throw std::invalid_argument("apply_forward: expected M x H x W");
  check_grid(coil_images.extent(1), coil_images.extent(2), mask);
  ComplexTensor k = fft2(coil_images);
  apply_mask(k, mask);
  return {std::move(k), mask};
}

ComplexTensor apply_adjoint(const MultiChannelKSpace &b) {
  if (b.data.ndim() != 3) throw std::invalid_argument("apply_adjoint: expected M x H x W");
  ComplexTensor k = b.data;
  apply_mask(k, b.mask);
  return ifft2(k);
}

MultiChannelKSpace add_noise(MultiChannelKSpace b, Rng &rng, double sigma) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0) return b;
  const std::size_t n = b.mask.sampled.size();
  for (std::size_t i = 0; i < b.data.size(); ++i)
    if (b.mask.sampled[i % n]) b.data[i] += rng.complex_normal(sigma);
  return b;
}

}  // namespace slr::acq
