#pragma once

#include "slr/acquisition.hpp"
#include "slr/nn/tape.hpp"

namespace slr::nn {

enum class Weighting { Identity, Gradient };

Weighting parse_weighting(const std::string &name);
std::string to_string(Weighting w);

/// Same-size 2-D cross-correlation with zero padding.
/// x: C x H x W, w: F x C x k x k (k odd), b: F.
RealTensor conv2d(const RealTensor &x, const RealTensor &w, const RealTensor &b);

/// Tikhonov data-consistency solve, pointwise in k-space:
///   (mask B + l1 G^H theta + l2 phi) / (mask + l1 w_G + l2).
/// theta lives in the range of G (2M bands for gradient weighting, M for
/// identity); phi may be null when l2 == 0.
ComplexTensor dc_solve(const acq::MultiChannelKSpace &b, const ComplexTensor &theta, const ComplexTensor *phi,
                       double lambda1, double lambda2, Weighting weighting);

/// mask + l1 w_G + l2 on the H x W grid; throws on a zero entry.
RealTensor dc_denominator(const acq::SamplingMask &mask, double lambda1, double lambda2, Weighting weighting);

namespace op {

Var conv2d(Tape &t, Var x, Var w, Var b);
Var relu(Tape &t, Var x);
Var add(Tape &t, Var a, Var b);
Var sub(Tape &t, Var a, Var b);
Var scale(Tape &t, Var a, double s);

/// Complex C x H x W to real 2C x H x W with channels (re_0, im_0, re_1, ...).
Var pack(Tape &t, Var z);
Var unpack(Tape &t, Var x);

/// fftshift (inverse = false) or ifftshift over the last two axes.
Var shift(Tape &t, Var z, bool inverse);
Var fft2(Tape &t, Var z);
Var ifft2(Tape &t, Var z);

/// Channel-wise gradient weighting (M -> 2M bands) and its adjoint.
Var grad_weight(Tape &t, Var z);
Var grad_weight_adjoint(Tape &t, Var z);

/// Differentiable in theta and phi; B and the mask are data.
Var dc_solve(Tape &t, const acq::MultiChannelKSpace &b, Var theta, const Var *phi, double lambda1, double lambda2,
             Weighting weighting);

/// Mean squared error against a constant target, averaged over real scalars
/// (a complex entry counts as two).
Var mse(Tape &t, Var a, const ComplexTensor &target);
Var mse(Tape &t, Var a, const RealTensor &target);

}  // namespace op
}  // namespace slr::nn
