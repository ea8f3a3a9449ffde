#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slr/lifting.hpp"
#include "slr/rng.hpp"
#include "slr/tensor.hpp"

namespace slr::analysis {

/// 20 log10(||rec|| / ||org - rec||); +inf when the two are identical.
double snr(const ComplexTensor &org, const ComplexTensor &rec);
double snr(const RealTensor &org, const RealTensor &rec);

/// 20 log10(peak sqrt(N) / ||org - rec||), peak = max |org|; on magnitudes.
double psnr(const RealTensor &org, const RealTensor &rec);
double psnr(const ComplexTensor &org, const ComplexTensor &rec);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03)
/// with dynamic range = max |org|. Inputs are H x W; C x H x W real inputs
/// average the per-channel values.
double ssim(const RealTensor &org, const RealTensor &rec);
double ssim(const ComplexTensor &org, const ComplexTensor &rec);

/// Magnitude image used by psnr/ssim for complex data: |x| for H x W,
/// root sum-of-squares over channels for M x H x W.
RealTensor magnitude(const ComplexTensor &x);

struct MetricRow {
  std::string id;
  double snr = 0;
  double psnr = 0;
  double ssim = 0;
};

struct MetricReport {
  std::string method;
  std::vector<MetricRow> rows;

  void add(const std::string &id, const ComplexTensor &org, const ComplexTensor &rec);
  double mean_snr() const;
  double mean_psnr() const;
  double mean_ssim() const;
  double std_snr() const;
  double std_psnr() const;
  double std_ssim() const;
};

/// Header plus one row per example: id,method,snr_db,psnr_db,ssim.
std::string report_csv(const MetricReport &r);
void emit_csv(const MetricReport &r, const std::filesystem::path &path);
/// Aggregate line: method,n,snr_mean,snr_std,psnr_mean,psnr_std,ssim_mean,ssim_std.
std::string summary_csv(const std::vector<MetricReport> &reports);

enum class ImageKind { Magnitude, ErrorMap };

/// Plain 16-bit PGM (P2), linear scaling of [0, max] to [0, 65535].
std::string pgm_text(const RealTensor &img);
void emit_image(const ComplexTensor &x, const std::filesystem::path &path, ImageKind kind = ImageKind::Magnitude,
                const ComplexTensor *reference = nullptr);
void emit_image(const RealTensor &x, const std::filesystem::path &path);

struct Pgm {
  std::size_t width = 0, height = 0, maxval = 0;
  std::vector<unsigned> values;
};
Pgm parse_pgm(const std::string &text);

enum class Injection { Image, GDomain };

Injection parse_injection(const std::string &s);
std::string to_string(Injection i);

struct ProbeConfig {
  double sigma = 0.01;
  std::size_t realizations = 1000;
  Injection injection = Injection::GDomain;
  bool subtract = true;
};

struct ProbeResult {
  RealTensor sos;  // H x W, mean over realizations
  std::size_t realizations = 0;
  double sigma = 0;
  std::optional<RealTensor> reference;
};

/// Black-box operator on centered lifted-domain k-space (bands x H x W) that
/// returns full-grid centered k-space (any channel count).
using ProbeOperator = std::function<ComplexTensor(const ComplexTensor &)>;

/// Linear filterbank as a probe operator: valid outputs embedded back onto the grid.
ProbeOperator filterbank_operator(const lift::FilterBank &bank);

/// Mean over R realizations of sum_c |IFFT(out_c)|^2, where out is the
/// operator's response to the perturbed input (minus its response to the
/// clean input when subtract is set). gamma_star is H x W or M x H x W.
ProbeResult annihilation_probe(const ProbeOperator &op, const ComplexTensor &gamma_star,
                               const lift::LiftingSpec &spec, const ProbeConfig &config, Rng &rng);

/// Exact expected SOS of a linear operator under the probe's perturbation
/// model, from its responses to unit impulses.
RealTensor linear_probe_reference(const ProbeOperator &op, const lift::LiftingSpec &spec, Injection injection,
                                  double sigma);

/// Edge and flat pixels of a piecewise-constant image (H x W or M x H x W).
/// A pixel is an edge pixel when some channel differs from a 4-neighbour by
/// more than tol * max|x|; it is flat when every channel is constant over its
/// (2 radius + 1)^2 neighbourhood.
struct PixelClasses {
  std::vector<std::uint8_t> edge, flat;
  std::size_t edge_count() const;
  std::size_t flat_count() const;
};
PixelClasses classify_pixels(const ComplexTensor &image, std::size_t radius = 2, double tol = 1e-9);

/// Mean of x over the pixels where mask is set (NaN for an empty mask).
double masked_mean(const RealTensor &x, const std::vector<std::uint8_t> &mask);

/// Relative L2 distance ||a - b|| / ||b||.
double relative_l2(const RealTensor &a, const RealTensor &b);

}  // namespace slr::analysis
