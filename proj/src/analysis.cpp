#include "slr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "slr/cten.hpp"
#include "slr/fft.hpp"

namespace slr::analysis {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class T>
double snr_impl(const Tensor<T> &org, const Tensor<T> &rec) {
  org.check_same(rec);
  const double err = norm(org - rec);
  if (err == 0) return kInf;
  return 20.0 * std::log10(norm(rec) / err);
}

double max_abs(const RealTensor &x) {
  double m = 0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> gaussian_window() {
  std::vector<double> g(11);
  double s = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * 1.5 * 1.5));
    s += g[static_cast<std::size_t>(i)];
  }
  for (auto &v : g) v /= s;
  return g;
}

double ssim_plane(const double *a, const double *b, std::size_t h, std::size_t w, double range) {
  if (h < 11 || w < 11) throw std::invalid_argument("ssim: images must be at least 11x11");
  static const std::vector<double> g = gaussian_window();
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0;
  for (std::size_t y = 0; y + 11 <= h; ++y)
    for (std::size_t x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double wt = g[i] * g[j];
          const double va = a[(y + i) * w + x + j], vb = b[(y + i) * w + x + j];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / static_cast<double>((h - 10) * (w - 10));
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

template <class F>
std::pair<double, double> mean_std(const std::vector<MetricRow> &rows, F get) {
  if (rows.empty()) return {0, 0};
  double s = 0;
  for (const auto &r : rows) s += get(r);
  const double mean = s / static_cast<double>(rows.size());
  double v = 0;
  for (const auto &r : rows) v += (get(r) - mean) * (get(r) - mean);
  return {mean, std::sqrt(v / static_cast<double>(rows.size()))};
}

ComplexTensor as_channels(const ComplexTensor &x) {
  if (x.ndim() == 2) return x.reshaped({1, x.extent(0), x.extent(1)});
  if (x.ndim() == 3) return x;
  throw std::invalid_argument("expected H x W or M x H x W, got " + shape_string(x.shape()));
}

// Adds sum_c |ifft2(ifftshift(out_c))|^2 into acc.
void accumulate_sos(const ComplexTensor &out_centered, RealTensor &acc, double weight) {
  const ComplexTensor img = ifft2(ifftshift(out_centered));
  const std::size_t plane = acc.size();
  if (img.size() % plane != 0) throw std::invalid_argument("probe: operator output grid does not match image grid");
  for (std::size_t i = 0; i < img.size(); ++i) acc[i % plane] += weight * std::norm(img[i]);
}

ComplexTensor weighted_centered(const ComplexTensor &x_hat, const lift::LiftingSpec &spec) {
  if (spec.stacking == lift::Stacking::VerticalGradient) return fftshift(lift::grad_weight_channels(x_hat));
  return fftshift(x_hat);
}

}  // namespace

double snr(const ComplexTensor &org, const ComplexTensor &rec) { return snr_impl(org, rec); }
double snr(const RealTensor &org, const RealTensor &rec) { return snr_impl(org, rec); }

double psnr(const RealTensor &org, const RealTensor &rec) {
  org.check_same(rec);
  const double err = norm(org - rec);
  if (err == 0) return kInf;
  return 20.0 * std::log10(max_abs(org) * std::sqrt(static_cast<double>(org.size())) / err);
}

RealTensor magnitude(const ComplexTensor &x) {
  if (x.ndim() == 3) return sos(x);
  return abs(x);
}

double psnr(const ComplexTensor &org, const ComplexTensor &rec) { return psnr(magnitude(org), magnitude(rec)); }

double ssim(const RealTensor &org, const RealTensor &rec) {
  org.check_same(rec);
  double range = max_abs(org);
  if (range == 0) range = 1.0;
  if (org.ndim() == 2) return ssim_plane(org.data(), rec.data(), org.extent(0), org.extent(1), range);
  if (org.ndim() == 3) {
    const std::size_t plane = org.extent(1) * org.extent(2);
    double s = 0;
    for (std::size_t c = 0; c < org.extent(0); ++c)
      s += ssim_plane(org.data() + c * plane, rec.data() + c * plane, org.extent(1), org.extent(2), range);
    return s / static_cast<double>(org.extent(0));
  }
  throw std::invalid_argument("ssim: expected a 2-D or 3-D tensor");
}

double ssim(const ComplexTensor &org, const ComplexTensor &rec) { return ssim(magnitude(org), magnitude(rec)); }

void MetricReport::add(const std::string &id, const ComplexTensor &org, const ComplexTensor &rec) {
  rows.push_back({id, snr(org, rec), psnr(org, rec), ssim(org, rec)});
}

double MetricReport::mean_snr() const { return mean_std(rows, [](const MetricRow &r) { return r.snr; }).first; }
double MetricReport::mean_psnr() const { return mean_std(rows, [](const MetricRow &r) { return r.psnr; }).first; }
double MetricReport::mean_ssim() const { return mean_std(rows, [](const MetricRow &r) { return r.ssim; }).first; }
double MetricReport::std_snr() const { return mean_std(rows, [](const MetricRow &r) { return r.snr; }).second; }
double MetricReport::std_psnr() const { return mean_std(rows, [](const MetricRow &r) { return r.psnr; }).second; }
double MetricReport::std_ssim() const { return mean_std(rows, [](const MetricRow &r) { return r.ssim; }).second; }

std::string report_csv(const MetricReport &r) {
  std::ostringstream os;
  os << "id,method,snr_db,psnr_db,ssim\n";
  for (const auto &row : r.rows)
    os << row.id << ',' << r.method << ',' << fmt(row.snr) << ',' << fmt(row.psnr) << ',' << fmt(row.ssim) << "\n";
  return os.str();
}

void emit_csv(const MetricReport &r, const std::filesystem::path &path) { write_text(path, report_csv(r)); }

std::string summary_csv(const std::vector<MetricReport> &reports) {
  std::ostringstream os;
  os << "method,n,snr_mean,snr_std,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
  for (const auto &r : reports)
    os << r.method << ',' << r.rows.size() << ',' << fmt(r.mean_snr()) << ',' << fmt(r.std_snr()) << ','
       << fmt(r.mean_psnr()) << ',' << fmt(r.std_psnr()) << ',' << fmt(r.mean_ssim()) << ',' << fmt(r.std_ssim())
       << "\n";
  return os.str();
}

std::string pgm_text(const RealTensor &img) {
  if (img.ndim() != 2) throw std::invalid_argument("PGM output needs an H x W image");
  const std::size_t h = img.extent(0), w = img.extent(1);
  double mx = 0;
  for (double v : img) mx = std::max(mx, v);
  std::ostringstream os;
  os << "P2\n" << w << ' ' << h << "\n65535\n";
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = mx > 0 ? std::clamp(img(r, c) / mx, 0.0, 1.0) : 0.0;
      os << (c ? " " : "") << static_cast<unsigned>(std::lround(v * 65535.0));
    }
    os << "\n";
  }
  return os.str();
}

void emit_image(const RealTensor &x, const std::filesystem::path &path) { write_text(path, pgm_text(x)); }

void emit_image(const ComplexTensor &x, const std::filesystem::path &path, ImageKind kind,
                const ComplexTensor *reference) {
  if (kind == ImageKind::ErrorMap) {
    if (!reference) throw std::invalid_argument("error-map output needs a reference image");
    emit_image(magnitude(x - *reference), path);
    return;
  }
  emit_image(magnitude(x), path);
}

Pgm parse_pgm(const std::string &text) {
  std::istringstream is(text);
  std::string magic;
  Pgm p;
  if (!(is >> magic) || magic != "P2") throw FormatError("not a plain PGM (P2) file");
  if (!(is >> p.width >> p.height >> p.maxval)) throw FormatError("truncated PGM header");
  p.values.resize(p.width * p.height);
  for (auto &v : p.values)
    if (!(is >> v) || v > p.maxval) throw FormatError("bad or truncated PGM payload");
  return p;
}

Injection parse_injection(const std::string &s) {
  if (s == "image") return Injection::Image;
  if (s == "g-domain") return Injection::GDomain;
  throw std::invalid_argument("unknown probe injection '" + s + "' (expected image or g-domain)");
}

std::string to_string(Injection i) { return i == Injection::Image ? "image" : "g-domain"; }

ProbeOperator filterbank_operator(const lift::FilterBank &bank) {
  return [bank](const ComplexTensor &z) { return lift::embed_valid(lift::apply_filterbank(bank, z), bank.spec); };
}

ProbeResult annihilation_probe(const ProbeOperator &op, const ComplexTensor &gamma_star,
                               const lift::LiftingSpec &spec, const ProbeConfig &config, Rng &rng) {
  if (!(config.sigma > 0)) throw std::invalid_argument("probe: sigma must be > 0");
  if (config.realizations < 1) throw std::invalid_argument("probe: need at least one realization");
  const ComplexTensor g = as_channels(gamma_star);
  const std::size_t h = g.extent(1), w = g.extent(2);
  const ComplexTensor z_star = weighted_centered(fft2(g), spec);
  const ComplexTensor clean = op(z_star);
  if (!all_finite(clean)) throw std::runtime_error("probe: operator produced non-finite output");
  ProbeResult res;
  res.sos = RealTensor({h, w});
  res.realizations = config.realizations;
  res.sigma = config.sigma;
  for (std::size_t r = 0; r < config.realizations; ++r) {
    ComplexTensor z;
    if (config.injection == Injection::Image) {
      z = weighted_centered(fft2(g + random_complex(rng, g.shape(), config.sigma)), spec);
    } else {
      z = z_star + fftshift(fft2(random_complex(rng, z_star.shape(), config.sigma)));
    }
    ComplexTensor out = op(z);
    if (config.subtract) out -= clean;
    accumulate_sos(out, res.sos, 1.0);
  }
  res.sos *= 1.0 / static_cast<double>(config.realizations);
  if (!all_finite(res.sos)) throw std::runtime_error("probe: non-finite SOS map");
  return res;
}

RealTensor linear_probe_reference(const ProbeOperator &op, const lift::LiftingSpec &spec, Injection injection,
                                  double sigma) {
  const std::size_t h = spec.height, w = spec.width;
  const std::size_t in_channels = injection == Injection::Image ? spec.channels : spec.bands();
  const Shape in_shape{in_channels, h, w};
  RealTensor sos({h, w});
  const ComplexTensor zero_out = op(injection == Injection::Image ? weighted_centered(ComplexTensor(in_shape), spec)
                                                                  : ComplexTensor(in_shape));
  for (std::size_t c = 0; c < in_channels; ++c)
    for (std::size_t p = 0; p < h * w; ++p) {
      ComplexTensor e(in_shape);
      e[c * h * w + p] = 1.0;
      const ComplexTensor z = injection == Injection::Image ? weighted_centered(fft2(e), spec) : fftshift(fft2(e));
      accumulate_sos(op(z) - zero_out, sos, 2.0 * sigma * sigma);
    }
  return sos;
}

std::size_t PixelClasses::edge_count() const { return static_cast<std::size_t>(std::count(edge.begin(), edge.end(), 1)); }
std::size_t PixelClasses::flat_count() const { return static_cast<std::size_t>(std::count(flat.begin(), flat.end(), 1)); }

PixelClasses classify_pixels(const ComplexTensor &image, std::size_t radius, double tol) {
  const ComplexTensor g = as_channels(image);
  const std::size_t m = g.extent(0), h = g.extent(1), w = g.extent(2);
  double peak = 0;
  for (const auto &v : g) peak = std::max(peak, std::abs(v));
  const double thr = tol * peak;
  auto differs = [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < m; ++c)
      if (std::abs(g[c * h * w + a] - g[c * h * w + b]) > thr) return true;
    return false;
  };
  PixelClasses pc{std::vector<std::uint8_t>(h * w, 0), std::vector<std::uint8_t>(h * w, 0)};
  const long r = static_cast<long>(radius);
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
      const long nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto &q : nb)
        if (q[0] >= 0 && q[0] < static_cast<long>(h) && q[1] >= 0 && q[1] < static_cast<long>(w) &&
            differs(p, static_cast<std::size_t>(q[0]) * w + static_cast<std::size_t>(q[1])))
          pc.edge[p] = 1;
      bool flat = !pc.edge[p];
      for (long dy = -r; flat && dy <= r; ++dy)
        for (long dx = -r; flat && dx <= r; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= static_cast<long>(h) || xx < 0 || xx >= static_cast<long>(w)) continue;
          if (differs(p, static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx))) flat = false;
        }
      pc.flat[p] = flat ? 1 : 0;
    }
  return pc;
}

double masked_mean(const RealTensor &x, const std::vector<std::uint8_t> &mask) {
  if (mask.size() != x.size()) throw std::invalid_argument("masked_mean: mask size mismatch");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) {
      s += x[i];
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double relative_l2(const RealTensor &a, const RealTensor &b) {
  a.check_same(b);
  const double nb = norm(b);
  return nb > 0 ? norm(a - b) / nb : norm(a - b);
}

}  // namespace slr::analysis
