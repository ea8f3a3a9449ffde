#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slr/acquisition.hpp"
#include "slr/cg.hpp"
#include "slr/lifting.hpp"

namespace slr::solve {

using lift::CMatrix;
using lift::LiftingSpec;

/// Continuation of the IRLS regularizer, relative to the largest eigenvalue
/// of the Gram matrix at the initial guess.
struct EpsilonSchedule {
  double initial_factor = 1e-2;
  double decay = 0.5;
  double floor_factor = 1e-9;
};

struct IrlsConfig {
  double lambda = 1.0;
  EpsilonSchedule epsilon;
  int outer_iterations = 50;
  CgOptions cg;
  LiftingSpec spec;
  // stop once the relative change of the cost between outer iterations falls below this
  double plateau_tolerance = 1e-6;

  void validate() const;
};

enum class QSource { Recompute, FixedCalibrated };

struct SplitConfig {
  double lambda = 1.0;
  double beta = 100.0;
  int iterations = 100;
  QSource q_source = QSource::FixedCalibrated;
  EpsilonSchedule epsilon;
  LiftingSpec spec;
  double rank_tolerance = 1e-6;
  // relative change of the k-space estimate
  double plateau_tolerance = 1e-10;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double cost = 0;
  double cost_before = 0;  // majorant with the same Q, before the image update
  double dc_residual = 0;
  double epsilon = 0;
  double seconds = 0;
};

struct ReconResult {
  ComplexTensor image;   // M x H x W
  ComplexTensor kspace;  // DFT order
  std::vector<TraceRow> trace;
  double setup_seconds = 0;
  double solve_seconds = 0;
  bool cg_converged = true;
};

/// Trace as CSV; `seconds` is the only wall-clock column.
std::string trace_csv(const std::vector<TraceRow> &trace, bool with_timing = true);

/// Fills grid size and channel count from the measured data.
LiftingSpec resolve_spec(const LiftingSpec &spec, const acq::MultiChannelKSpace &b);

/// G applied to DFT-ordered k-space followed by the centering shift, i.e. the
/// tensor that gets lifted.
ComplexTensor weighted_centered(const ComplexTensor &x_hat, const LiftingSpec &spec);
/// Adjoint of weighted_centered.
ComplexTensor weighted_centered_adjoint(const ComplexTensor &z, const LiftingSpec &spec);
/// Diagonal of G^H G on the DFT grid (all ones for the identity weighting).
RealTensor weight_gram_diagonal(const LiftingSpec &spec);

/// ||A(Gamma) - B||^2 + lambda ||T(G(Gamma_hat)) Q||_F^2 for an image-domain Gamma.
double slr_cost(const ComplexTensor &gamma, const acq::MultiChannelKSpace &b, const CMatrix &q, double lambda,
                const LiftingSpec &spec);
/// Same objective for a k-space estimate.
double slr_cost_kspace(const ComplexTensor &x_hat, const acq::MultiChannelKSpace &b, const CMatrix &q,
                       double lambda, const LiftingSpec &spec);

/// Normal operator mask + lambda G^H T^H(T(G .) Q Q^H).
LinearOperator slr_normal_operator(const acq::SamplingMask &mask, const CMatrix &q, double lambda,
                                   const LiftingSpec &spec);

struct ImageUpdate {
  ComplexTensor image;
  ComplexTensor kspace;
  CgReport cg;
};

/// CG solve of the fixed-Q normal equations. `warm` (k-space) defaults to the
/// zero-filled data.
ImageUpdate irls_image_update(const acq::MultiChannelKSpace &b, const CMatrix &q, double lambda,
                              const LiftingSpec &spec, const CgOptions &cg, const ComplexTensor *warm = nullptr);

ReconResult irls_solve(const acq::MultiChannelKSpace &b, const IrlsConfig &config);

/// Closed-form Fourier-domain update (mask B + beta G^H Z) / (mask + beta w_G),
/// with Z given in the centered lifted domain.
ComplexTensor split_image_update(const acq::MultiChannelKSpace &b, const ComplexTensor &z, double beta,
                                 const LiftingSpec &spec);

/// Alternation of the residual-projector denoiser and the analytic image
/// update. A calibrated basis is required for QSource::FixedCalibrated.
ReconResult split_solve(const acq::MultiChannelKSpace &b, const SplitConfig &config,
                        const std::optional<lift::NullSpaceBasis> &calibrated = std::nullopt);

ReconResult calibrated_solve(const acq::MultiChannelKSpace &b, const lift::NullSpaceBasis &q, double lambda,
                             const LiftingSpec &spec, const CgOptions &cg);

double dc_residual(const ComplexTensor &x_hat, const acq::MultiChannelKSpace &b);

}  // namespace slr::solve
