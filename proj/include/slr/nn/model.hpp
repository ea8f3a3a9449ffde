#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "slr/nn/ops.hpp"
#include "slr/rng.hpp"

namespace slr::nn {

/// Residual-branch CNN: (layers - 1) conv + ReLU blocks and a final conv,
/// channels -> filters -> ... -> channels, square odd kernels.
struct CnnSpec {
  std::size_t layers = 3;
  std::size_t filters = 16;
  std::size_t kernel = 3;
  std::size_t channels = 8;  // real channels = 2 x complex bands

  void validate() const;
  std::size_t in_channels(std::size_t layer) const { return layer == 0 ? channels : filters; }
  std::size_t out_channels(std::size_t layer) const { return layer + 1 == layers ? channels : filters; }
  std::size_t parameter_count() const;
  bool operator==(const CnnSpec &) const = default;
};

struct CnnParams {
  std::vector<RealTensor> weights;  // F x C x k x k per layer
  std::vector<RealTensor> biases;   // F per layer
};

CnnParams zero_params(const CnnSpec &spec);
/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) with fan = channels * k^2; zero biases.
CnnParams xavier_init(Rng &rng, const CnnSpec &spec);

struct CnnVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

CnnVars bind(Tape &t, const CnnParams &p, bool trainable);
/// N(x) on the tape.
Var cnn_forward(Tape &t, Var x, const CnnSpec &spec, const CnnVars &p);
/// N(x) without recording gradients.
RealTensor cnn_forward(const RealTensor &x, const CnnSpec &spec, const CnnParams &p);
/// D(x) = x - N(x).
RealTensor cnn_denoise(const RealTensor &x, const CnnSpec &spec, const CnnParams &p);

/// Unrolled K-DSLR (k-space prior only) or H-DSLR (k-space plus image prior).
struct UnrolledModel {
  CnnSpec kspace_spec;
  CnnParams theta_k;
  std::optional<CnnSpec> image_spec;
  std::optional<CnnParams> theta_i;
  std::size_t iterations = 3;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  Weighting weighting = Weighting::Identity;
  // multiplies k-space before N_k (output divided back); 0 = 1 / sqrt(H W)
  double kspace_scale = 0.0;

  bool hybrid() const { return theta_i.has_value(); }
  void validate(std::size_t coils) const;
  double resolved_kspace_scale(std::size_t height, std::size_t width) const;
};

/// Complex bands fed to N_k for a given coil count.
std::size_t kspace_bands(Weighting w, std::size_t coils);

UnrolledModel make_model(Rng &rng, const CnnSpec &kspace_spec, const std::optional<CnnSpec> &image_spec,
                         std::size_t iterations, double lambda1, double lambda2, Weighting weighting);

struct ModelVars {
  CnnVars k;
  std::optional<CnnVars> i;
};

ModelVars bind(Tape &t, const UnrolledModel &m, bool trainable);

/// k-space annihilation branch N_k applied to centered G-domain data
/// (bands x H x W), including the input scaling.
Var kspace_network(Tape &t, Var z_centered, const UnrolledModel &m, const ModelVars &v);
ComplexTensor kspace_network(const ComplexTensor &z_centered, const UnrolledModel &m);

/// Unrolled graph; returns the image-domain output (M x H x W).
Var unrolled_graph(Tape &t, const acq::MultiChannelKSpace &b, const UnrolledModel &m, const ModelVars &v);

ComplexTensor kdslr_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m);
ComplexTensor hdslr_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m);
/// Dispatches on m.hybrid().
ComplexTensor unrolled_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m);

struct CheckpointInfo {
  std::size_t epoch = 0;
  double loss = 0;
};

/// Directory of CTEN weight tensors plus meta.json.
void save_checkpoint(const std::filesystem::path &dir, const UnrolledModel &m, const CheckpointInfo &info);
UnrolledModel load_checkpoint(const std::filesystem::path &dir, CheckpointInfo *info = nullptr);

/// Flat views over all trainable tensors (k network first, then image network).
std::vector<RealTensor *> parameter_tensors(UnrolledModel &m);
std::vector<const RealTensor *> parameter_tensors(const UnrolledModel &m);

}  // namespace slr::nn
