#include "slr/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "slr/fft.hpp"

namespace slr::solve {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ComplexTensor masked(const ComplexTensor &x, const acq::SamplingMask &mask) {
  ComplexTensor y = x;
  acq::apply_mask(y, mask);
  return y;
}

double largest_eigenvalue(const CMatrix &gram) {
  if (gram.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

ComplexTensor to_image(const ComplexTensor &x_hat) { return ifft2(x_hat); }

}  // namespace

void IrlsConfig::validate() const {
  std::vector<std::string> bad;
  if (!(lambda >= 0)) bad.push_back("lambda must be >= 0");
  if (!(epsilon.initial_factor > 0)) bad.push_back("epsilon initial factor must be > 0");
  if (!(epsilon.decay > 0 && epsilon.decay <= 1)) bad.push_back("epsilon decay must lie in (0, 1]");
  if (!(epsilon.floor_factor > 0)) bad.push_back("epsilon floor must be > 0");
  if (outer_iterations < 0) bad.push_back("outer iterations must be >= 0");
  if (cg.max_iterations < 0 || !(cg.tolerance >= 0)) bad.push_back("bad CG options");
  if (!bad.empty()) {
    std::string msg = "invalid IRLS config:";
    for (const auto &m : bad) msg += " " + m + ";";
    throw std::invalid_argument(msg);
  }
}

void SplitConfig::validate() const {
  std::vector<std::string> bad;
  if (!(lambda >= 0)) bad.push_back("lambda must be >= 0");
  if (!(beta > 0)) bad.push_back("beta must be > 0");
  if (!(lambda < beta)) bad.push_back("the Taylor denoiser needs lambda < beta");
  if (iterations < 0) bad.push_back("iterations must be >= 0");
  if (!(epsilon.decay > 0 && epsilon.decay <= 1)) bad.push_back("epsilon decay must lie in (0, 1]");
  if (!bad.empty()) {
    std::string msg = "invalid split config:";
    for (const auto &m : bad) msg += " " + m + ";";
    throw std::invalid_argument(msg);
  }
}

std::string trace_csv(const std::vector<TraceRow> &trace, bool with_timing) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "iteration,cost,dc_residual,epsilon" << (with_timing ? ",seconds" : "") << "\n";
  for (const auto &r : trace) {
    os << r.iteration << ',' << r.cost << ',' << r.dc_residual << ',' << r.epsilon;
    if (with_timing) os << ',' << r.seconds;
    os << "\n";
  }
  return os.str();
}

LiftingSpec resolve_spec(const LiftingSpec &spec, const acq::MultiChannelKSpace &b) {
  if (b.data.ndim() != 3) throw std::invalid_argument("k-space must be M x H x W");
  if (b.mask.height != b.data.extent(1) || b.mask.width != b.data.extent(2))
    throw std::invalid_argument("mask grid does not match k-space");
  LiftingSpec s = spec;
  s.channels = b.data.extent(0);
  s.height = b.data.extent(1);
  s.width = b.data.extent(2);
  s.validate();
  return s;
}

ComplexTensor weighted_centered(const ComplexTensor &x_hat, const LiftingSpec &spec) {
  if (spec.stacking == lift::Stacking::VerticalGradient) return fftshift(lift::grad_weight_channels(x_hat));
  return fftshift(x_hat);
}

ComplexTensor weighted_centered_adjoint(const ComplexTensor &z, const LiftingSpec &spec) {
  if (spec.stacking == lift::Stacking::VerticalGradient)
    return lift::grad_weight_channels_adjoint(ifftshift(z));
  return ifftshift(z);
}

RealTensor weight_gram_diagonal(const LiftingSpec &spec) {
  if (spec.stacking == lift::Stacking::VerticalGradient) return lift::grad_gram_diagonal(spec.height, spec.width);
  RealTensor w({spec.height, spec.width});
  w.fill(1.0);
  return w;
}

double dc_residual(const ComplexTensor &x_hat, const acq::MultiChannelKSpace &b) {
  const double bn = norm(b.data);
  const ComplexTensor r = masked(x_hat, b.mask) - b.data;
  return bn > 0 ? norm(r) / bn : norm(r);
}

double slr_cost_kspace(const ComplexTensor &x_hat, const acq::MultiChannelKSpace &b, const CMatrix &q,
                       double lambda, const LiftingSpec &spec) {
  const LiftingSpec s = resolve_spec(spec, b);
  double cost = norm2(masked(x_hat, b.mask) - b.data);
  if (lambda != 0 && q.cols() > 0) cost += lambda * lift::LiftedPenalty(q, s).value(weighted_centered(x_hat, s));
  return cost;
}

double slr_cost(const ComplexTensor &gamma, const acq::MultiChannelKSpace &b, const CMatrix &q, double lambda,
                const LiftingSpec &spec) {
  return slr_cost_kspace(fft2(gamma), b, q, lambda, spec);
}

LinearOperator slr_normal_operator(const acq::SamplingMask &mask, const CMatrix &q, double lambda,
                                   const LiftingSpec &spec) {
  const bool has_penalty = lambda != 0 && q.cols() > 0;
  std::shared_ptr<lift::LiftedPenalty> penalty;
  if (has_penalty) penalty = std::make_shared<lift::LiftedPenalty>(q, spec);
  return [mask, lambda, spec, penalty](const ComplexTensor &x) {
    ComplexTensor y = masked(x, mask);
    if (penalty) {
      const ComplexTensor g = weighted_centered_adjoint(penalty->normal(weighted_centered(x, spec)), spec);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += lambda * g[i];
    }
    return y;
  };
}

ImageUpdate irls_image_update(const acq::MultiChannelKSpace &b, const CMatrix &q, double lambda,
                              const LiftingSpec &spec, const CgOptions &cg, const ComplexTensor *warm) {
  const LiftingSpec s = resolve_spec(spec, b);
  const ComplexTensor rhs = masked(b.data, b.mask);
  ComplexTensor x = warm ? *warm : rhs;
  x.check_same(rhs);
  ImageUpdate out;
  out.cg = conjugate_gradient(slr_normal_operator(b.mask, q, lambda, s), rhs, x, cg);
  out.image = to_image(x);
  out.kspace = std::move(x);
  return out;
}

ReconResult irls_solve(const acq::MultiChannelKSpace &b, const IrlsConfig &config) {
  config.validate();
  const auto t0 = Clock::now();
  const LiftingSpec s = resolve_spec(config.spec, b);
  ReconResult res;
  ComplexTensor x = masked(b.data, b.mask);
  double eps = 0, eps_floor = 0;
  double prev_cost = -1;
  for (int it = 0; it < config.outer_iterations; ++it) {
    const CMatrix gram = lift::lift_gram(weighted_centered(x, s), s);
    if (it == 0) {
      double smax = largest_eigenvalue(gram);
      if (!(smax > 0)) smax = 1.0;
      eps = config.epsilon.initial_factor * smax;
      eps_floor = config.epsilon.floor_factor * smax;
      res.setup_seconds = seconds_since(t0);
    }
    const CMatrix q = lift::nullspace_weight(gram, eps).q;
    TraceRow row;
    row.iteration = it;
    row.epsilon = eps;
    row.cost_before = slr_cost_kspace(x, b, q, config.lambda, s);
    auto upd = irls_image_update(b, q, config.lambda, s, config.cg, &x);
    res.cg_converged = res.cg_converged && upd.cg.converged;
    x = std::move(upd.kspace);
    row.cost = slr_cost_kspace(x, b, q, config.lambda, s);
    row.dc_residual = dc_residual(x, b);
    row.seconds = seconds_since(t0);
    res.trace.push_back(row);
    eps = std::max(config.epsilon.decay * eps, eps_floor);
    if (prev_cost > 0 && std::abs(prev_cost - row.cost) <= config.plateau_tolerance * prev_cost) break;
    prev_cost = row.cost;
  }
  res.image = to_image(x);
  res.kspace = std::move(x);
  res.solve_seconds = seconds_since(t0);
  return res;
}

ComplexTensor split_image_update(const acq::MultiChannelKSpace &b, const ComplexTensor &z, double beta,
                                 const LiftingSpec &spec) {
  const LiftingSpec s = resolve_spec(spec, b);
  const ComplexTensor back = weighted_centered_adjoint(z, s);
  back.check_same(b.data);
  const RealTensor w = weight_gram_diagonal(s);
  const std::size_t plane = s.height * s.width;
  ComplexTensor x(b.data.shape());
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      const double m = b.mask.at(i) ? 1.0 : 0.0;
      const double den = m + beta * w[i];
      const std::size_t j = c * plane + i;
      x[j] = den > 0 ? (m * b.data[j] + beta * back[j]) / den : cplx(0);
    }
  return x;
}

ReconResult split_solve(const acq::MultiChannelKSpace &b, const SplitConfig &config,
                        const std::optional<lift::NullSpaceBasis> &calibrated) {
  config.validate();
  const auto t0 = Clock::now();
  const LiftingSpec s = resolve_spec(config.spec, b);
  const double ratio = config.lambda / config.beta;
  ReconResult res;
  ComplexTensor x = masked(b.data, b.mask);

  CMatrix q;
  std::optional<lift::FilterBank> bank;
  if (config.q_source == QSource::FixedCalibrated) {
    if (!calibrated) throw std::invalid_argument("split_solve: fixed-calibrated Q source needs a calibrated basis");
    q = calibrated->q;
    bank = lift::build_filterbank(q, s);
  }
  double eps = 0, eps_floor = 0;
  res.setup_seconds = seconds_since(t0);
  for (int it = 0; it < config.iterations; ++it) {
    const ComplexTensor z = weighted_centered(x, s);
    if (config.q_source == QSource::Recompute) {
      const CMatrix gram = lift::lift_gram(z, s);
      if (it == 0) {
        double smax = largest_eigenvalue(gram);
        if (!(smax > 0)) smax = 1.0;
        eps = config.epsilon.initial_factor * smax;
        eps_floor = config.epsilon.floor_factor * smax;
      }
      q = lift::nullspace_weight(gram, eps).q;
      bank = lift::build_filterbank(q, s);
    }
    TraceRow row;
    row.iteration = it;
    row.epsilon = eps;
    const bool reuse = config.q_source == QSource::FixedCalibrated && !res.trace.empty();
    row.cost_before = reuse ? res.trace.back().cost : slr_cost_kspace(x, b, q, config.lambda, s);
    const ComplexTensor zd = lift::residual_projector(*bank, z, ratio);
    ComplexTensor x_new = split_image_update(b, zd, config.beta, s);
    const double change = norm(x_new - x) / std::max(norm(x), 1e-300);
    x = std::move(x_new);
    row.cost = slr_cost_kspace(x, b, q, config.lambda, s);
    row.dc_residual = dc_residual(x, b);
    row.seconds = seconds_since(t0);
    res.trace.push_back(row);
    if (config.q_source == QSource::Recompute) eps = std::max(config.epsilon.decay * eps, eps_floor);
    if (change < config.plateau_tolerance) break;
  }
  res.image = to_image(x);
  res.kspace = std::move(x);
  res.solve_seconds = seconds_since(t0);
  return res;
}

ReconResult calibrated_solve(const acq::MultiChannelKSpace &b, const lift::NullSpaceBasis &q, double lambda,
                             const LiftingSpec &spec, const CgOptions &cg) {
  const auto t0 = Clock::now();
  const LiftingSpec s = resolve_spec(spec, b);
  ReconResult res;
  const ComplexTensor x0 = masked(b.data, b.mask);
  TraceRow row;
  row.cost_before = slr_cost_kspace(x0, b, q.q, lambda, s);
  auto upd = irls_image_update(b, q.q, lambda, s, cg, &x0);
  res.cg_converged = upd.cg.converged;
  row.cost = slr_cost_kspace(upd.kspace, b, q.q, lambda, s);
  row.dc_residual = dc_residual(upd.kspace, b);
  row.epsilon = q.epsilon;
  row.seconds = seconds_since(t0);
  res.trace.push_back(row);
  res.image = std::move(upd.image);
  res.kspace = std::move(upd.kspace);
  res.solve_seconds = seconds_since(t0);
  return res;
}

}  // namespace slr::solve
