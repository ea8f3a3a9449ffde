// Acceptance run: one PASS/FAIL line per criterion.
#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "helpers.hpp"
#include "slr/acquisition.hpp"
#include "slr/analysis.hpp"
#include "slr/cg.hpp"
#include "slr/dataset.hpp"
#include "slr/fft.hpp"
#include "slr/lifting.hpp"
#include "slr/nn/train.hpp"
#include "slr/solvers.hpp"

using namespace slr;
using lift::CMatrix;
using lift::CVector;
using lift::LiftingSpec;
using lift::Stacking;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string &name, const std::function<void(Outcome &)> &body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception &e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  failures += !o.pass;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " (" << std::fixed
            << std::setprecision(1) << since(t0) << " s)" << std::defaultfloat << o.detail.str() << std::endl;
}

LiftingSpec make_spec(Stacking s, std::size_t fr, std::size_t fc, std::size_t h, std::size_t w, std::size_t m) {
  LiftingSpec spec;
  spec.stacking = s;
  spec.filter_rows = fr;
  spec.filter_cols = fc;
  spec.height = h;
  spec.width = w;
  spec.channels = m;
  return spec;
}

double rel_diff(cplx a, cplx b) { return testing::rel_diff(a, b); }

CVector random_vector(Rng &rng, std::size_t n) {
  CVector v(static_cast<Eigen::Index>(n));
  for (auto &x : v) x = rng.complex_normal();
  return v;
}

CMatrix random_matrix(Rng &rng, std::size_t r, std::size_t c) {
  CMatrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.complex_normal();
  return m;
}

// Valid 2-D convolution written out as loops, laid out like the lifted rows.
CVector brute_lift_times(const ComplexTensor &z, const CVector &q, const LiftingSpec &spec) {
  const std::size_t fr = spec.filter_rows, fc = spec.filter_cols, taps = spec.taps();
  CVector out = CVector::Zero(static_cast<Eigen::Index>(spec.lifted_rows()));
  for (std::size_t b = 0; b < spec.bands(); ++b)
    for (std::size_t ny = fr - 1; ny < spec.height; ++ny)
      for (std::size_t nx = fc - 1; nx < spec.width; ++nx) {
        cplx acc = 0;
        for (std::size_t my = 0; my < fr; ++my)
          for (std::size_t mx = 0; mx < fc; ++mx) {
            const std::size_t tap = my * fc + mx;
            const std::size_t col = spec.stacking == Stacking::VerticalGradient ? tap : b * taps + tap;
            acc += z(b, ny - my, nx - mx) * q[static_cast<Eigen::Index>(col)];
          }
        const std::size_t n = (ny - (fr - 1)) * spec.valid_cols() + (nx - (fc - 1));
        const std::size_t row = spec.stacking == Stacking::VerticalGradient ? b * spec.valid_count() + n : n;
        out[static_cast<Eigen::Index>(row)] += acc;
      }
  return out;
}

acq::MultiChannelKSpace fully_sampled(const ComplexTensor &kspace, std::size_t calib) {
  acq::MultiChannelKSpace b{kspace, acq::SamplingMask(kspace.extent(1), kspace.extent(2), true)};
  b.mask.calib = acq::CalibrationRegion{calib, calib};
  return b;
}

acq::MultiChannelKSpace masked_data(Rng &rng, std::size_t coils, std::size_t n, double accel) {
  const auto mask = acq::make_mask(rng, n, n, acq::MaskKind::VariableDensity2d, accel, 4);
  acq::MultiChannelKSpace b{random_complex(rng, {coils, n, n}), mask};
  acq::apply_mask(b.data, mask);
  return b;
}

// ---- criterion 1

void operator_algebra(Outcome &o) {
  const auto t0 = Clock::now();
  Rng rng(101);
  const int n = 50;
  double worst_fft = 0, worst_a = 0, worst_g = 0, worst_lift = 0, worst_bank = 0;
  for (int t = 0; t < n; ++t) {
    const std::size_t h = 4 + rng.below(60), w = 4 + rng.below(60);
    const auto x = random_complex(rng, {h, w});
    const double lhs = norm2(x), rhs = norm2(fft2(x)) / static_cast<double>(h * w);
    worst_fft = std::max(worst_fft, std::abs(lhs - rhs) / lhs);

    const auto mask = acq::make_mask(rng, h, w, acq::MaskKind::VariableDensity2d, 1 + 3 * rng.uniform(), 0);
    const auto xc = random_complex(rng, {3, h, w});
    acq::MultiChannelKSpace y{random_complex(rng, {3, h, w}), mask};
    acq::apply_mask(y.data, mask);
    // the adjoint uses the normalized inverse FFT, hence the HW factor
    worst_a = std::max(worst_a, rel_diff(inner(acq::apply_forward(xc, mask).data, y.data),
                                         inner(xc, acq::apply_adjoint(y)) * static_cast<double>(h * w)));

    const auto g = random_complex(rng, {6, h, w});
    worst_g = std::max(worst_g, rel_diff(inner(lift::grad_weight_channels(xc), g),
                                         inner(xc, lift::grad_weight_channels_adjoint(g))));
  }
  for (auto stacking : {Stacking::VerticalGradient, Stacking::HorizontalMultichannel})
    for (int t = 0; t < n; ++t) {
      const std::size_t h = 8 + rng.below(17), w = 8 + rng.below(17);
      const auto spec = make_spec(stacking, 1 + rng.below(6), 1 + rng.below(6), h, w, 1 + rng.below(3));
      const auto z = random_complex(rng, {spec.bands(), h, w});
      const auto q = random_vector(rng, spec.lifted_cols());
      const CVector fast = lift::hankel_lift(z, spec).matrix * q;
      const CVector slow = brute_lift_times(z, q, spec);
      worst_lift = std::max(worst_lift, (fast - slow).norm() / slow.norm());

      const CMatrix qm = random_matrix(rng, spec.lifted_cols(), 1 + rng.below(5));
      const double lifted = (lift::hankel_lift(z, spec).matrix * qm).squaredNorm();
      const double bank = norm2(lift::apply_filterbank(lift::build_filterbank(qm, spec), z));
      worst_bank = std::max(worst_bank, std::abs(bank - lifted) / lifted);
    }
  o.detail << " parseval " << worst_fft << ", A dot " << worst_a << ", G dot " << worst_g << ", lift/conv "
           << worst_lift << ", filterbank energy " << worst_bank;
  for (double v : {worst_fft, worst_a, worst_g, worst_lift, worst_bank}) o.require(v < 1e-10, "relative error < 1e-10");
  o.require(since(t0) < 60, "runtime < 1 min");
}

// ---- criterion 2

void nullspace_weight_check(Outcome &o) {
  Rng rng(102);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(63);
    const CMatrix b = random_matrix(rng, n, 1 + rng.below(n));
    const CMatrix g = b * b.adjoint();
    const double eps = 1e-3 + rng.uniform();
    const CMatrix q = lift::nullspace_weight(g, eps).q;
    const auto id = CMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const CMatrix q2 = q * q;
    worst = std::max(worst, (q2 * q2 * (g + eps * id) - id).cwiseAbs().maxCoeff());
  }
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 16;
  const CMatrix q = lift::nullspace_weight(d, 1.0).q;
  CMatrix expect = CMatrix::Zero(2, 2);
  expect(0, 0) = std::pow(17.0, -0.25);
  expect(1, 1) = 1.0;
  const double diag_err = (q - expect).cwiseAbs().maxCoeff();
  o.detail << " Q^4(G+eps I) - I max " << worst << ", diag(16,0) error " << diag_err;
  o.require(worst < 1e-8, "inverse fourth root within 1e-8");
  o.require(diag_err < 1e-12, "analytic case within 1e-12");
}

// ---- criterion 3

void witnesses(Outcome &o) {
  Rng rng(103);
  const auto e = acq::make_edge_phantom(rng, 32, 32, 1);
  Eigen::BDCSVD<CMatrix> edge(
      lift::hankel_lift(fftshift(lift::grad_weight(e.kspace)), make_spec(Stacking::VerticalGradient, 5, 5, 32, 32, 1))
          .matrix);
  const auto se = edge.singularValues();
  const double edge_ratio = se.minCoeff() / se.maxCoeff();

  const auto ph = acq::make_phantom(rng, 32, 32, 6);
  const auto s = acq::make_sensitivities(rng, 32, 32, 4, 5, false);
  const auto kspace = fft2(acq::coil_images(ph.image, s));
  Eigen::BDCSVD<CMatrix> coils(
      lift::hankel_lift(fftshift(kspace), make_spec(Stacking::HorizontalMultichannel, 5, 5, 32, 32, 4)).matrix);
  const auto sc = coils.singularValues();
  int small = 0;
  for (Eigen::Index i = 0; i < sc.size(); ++i) small += sc[i] < 1e-8 * sc[0];

  // tight rank tolerance: exact nullspace only
  const auto spec = make_spec(Stacking::HorizontalMultichannel, 7, 7, 32, 32, 4);
  const auto q = lift::calibrated_nullspace(fully_sampled(kspace, 24), spec, 1e-9);
  const CMatrix t = lift::hankel_lift(fftshift(kspace), spec).matrix;
  const double annihilation = q.filters() ? (t * q.q).norm() / t.norm() : 1.0;
  o.detail << " edge sigma_min/sigma_max " << edge_ratio << ", coil small singular values " << small
           << ", calibrated Q (" << q.filters() << " filters) residual " << annihilation;
  o.require(edge_ratio < 1e-8, "edge witness");
  o.require(small >= 6, "coil witness");
  o.require(annihilation < 1e-6, "calibrated annihilation");
}

// ---- criterion 4

void irls_recovery(Outcome &o) {
  Rng rng(6);
  const auto t0 = Clock::now();
  const auto e = acq::make_edge_phantom(rng, 32, 32, 1);
  const auto mask = acq::make_mask(rng, 32, 32, acq::MaskKind::VariableDensity2d, 2, 8);
  ComplexTensor k({1, 32, 32});
  std::copy(e.kspace.begin(), e.kspace.end(), k.begin());
  acq::MultiChannelKSpace b{k, mask};
  acq::apply_mask(b.data, mask);
  solve::IrlsConfig cfg;
  cfg.lambda = 1e-6;
  cfg.outer_iterations = 50;
  cfg.cg = {40, 1e-12};
  cfg.spec = make_spec(Stacking::VerticalGradient, 5, 5, 0, 0, 1);
  cfg.plateau_tolerance = 0;
  const auto res = solve::irls_solve(b, cfg);
  const double seconds = since(t0);
  ComplexTensor truth({1, 32, 32});
  std::copy(e.phantom.image.begin(), e.phantom.image.end(), truth.begin());
  const double err = testing::rel_err(res.image, truth);
  const double slack = 1e-8 * res.trace.front().cost_before;
  bool monotone = true;
  for (const auto &row : res.trace) monotone = monotone && row.cost <= row.cost_before + slack;
  o.detail << " relative error " << err << " after " << res.trace.size() << " iterations, majorant "
           << (monotone ? "non-increasing" : "increased") << ", " << seconds << " s";
  o.require(err < 1e-2, "relative error < 1e-2");
  o.require(res.trace.size() <= 50, "at most 50 iterations");
  o.require(monotone, "majorant non-increasing");
  o.require(seconds < 120, "runtime < 2 min");
}

// ---- criterion 5

void dc_versus_cg(Outcome &o) {
  Rng rng(105);
  double worst_id = 0, worst_grad = 0;
  for (auto weighting : {nn::Weighting::Identity, nn::Weighting::Gradient})
    for (int t = 0; t < 20; ++t) {
      const std::size_t coils = 1 + rng.below(3), n = 8 + rng.below(17);
      const auto b = masked_data(rng, coils, n, 1.5 + 3 * rng.uniform());
      const bool grad = weighting == nn::Weighting::Gradient;
      const auto theta = random_complex(rng, {grad ? 2 * coils : coils, n, n});
      const auto phi = random_complex(rng, {coils, n, n});
      const double l1 = grad ? 1e-3 * (0.1 + rng.uniform()) : 0.1 + rng.uniform(), l2 = rng.uniform();
      const auto x = nn::dc_solve(b, theta, &phi, l1, l2, weighting);
      const LinearOperator op = [&](const ComplexTensor &v) {
        ComplexTensor y = v;
        acq::apply_mask(y, b.mask);
        const ComplexTensor g = grad ? lift::grad_weight_channels_adjoint(lift::grad_weight_channels(v)) : v;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += l1 * g[i] + l2 * v[i];
        return y;
      };
      ComplexTensor rhs = b.data;
      const ComplexTensor back = grad ? lift::grad_weight_channels_adjoint(theta) : theta;
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += l1 * back[i] + l2 * phi[i];
      ComplexTensor sol(rhs.shape());
      conjugate_gradient(op, rhs, sol, {5000, 1e-15});
      (grad ? worst_grad : worst_id) = std::max(grad ? worst_grad : worst_id, testing::rel_err(x, sol));
    }
  o.detail << " identity " << worst_id << ", gradient " << worst_grad;
  o.require(worst_id < 1e-8 && worst_grad < 1e-8, "agreement within 1e-8");
}

// ---- criterion 6

using Graph = std::function<nn::Var(nn::Tape &, const std::vector<nn::Var> &)>;

double evaluate(const Graph &g, const std::vector<nn::Value> &inputs) {
  nn::Tape t;
  std::vector<nn::Var> vars;
  for (const auto &v : inputs) vars.push_back(std::visit([&](const auto &x) { return t.variable(x); }, v));
  return t.real(g(t, vars))[0];
}

double fd_check(const Graph &g, const std::vector<nn::Value> &inputs, Rng &rng, int directions = 10) {
  const double h = 1e-6;
  nn::Tape t;
  std::vector<nn::Var> vars;
  for (const auto &v : inputs) vars.push_back(std::visit([&](const auto &x) { return t.variable(x); }, v));
  t.backward(g(t, vars));
  double worst = 0;
  for (int d = 0; d < directions; ++d) {
    double analytic = 0;
    std::vector<nn::Value> plus = inputs, minus = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (std::holds_alternative<RealTensor>(inputs[k])) {
        const auto &x = std::get<RealTensor>(inputs[k]);
        const RealTensor dir = random_real(rng, x.shape());
        analytic += inner(t.real_grad(vars[k]), dir);
        plus[k] = RealTensor(x + h * dir);
        minus[k] = RealTensor(x - h * dir);
      } else {
        const auto &x = std::get<ComplexTensor>(inputs[k]);
        const ComplexTensor dir = random_complex(rng, x.shape());
        analytic += inner(t.complex_grad(vars[k]), dir).real();
        plus[k] = ComplexTensor(x + h * dir);
        minus[k] = ComplexTensor(x - h * dir);
      }
    }
    const double numeric = (evaluate(g, plus) - evaluate(g, minus)) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-8));
  }
  return worst;
}

nn::CnnSpec cnn(std::size_t channels, std::size_t layers, std::size_t filters) {
  nn::CnnSpec s;
  s.layers = layers;
  s.filters = filters;
  s.kernel = 3;
  s.channels = channels;
  return s;
}

void gradient_suite(Outcome &o) {
  namespace op = nn::op;
  using nn::Tape;
  using nn::Var;
  using V = std::vector<Var>;
  const auto t0 = Clock::now();
  Rng rng(106);
  const auto tc = random_complex(rng, {2, 6, 5});
  const auto tr = random_real(rng, {4, 6, 5});
  const auto xc = random_complex(rng, {2, 6, 5}), yc = random_complex(rng, {2, 6, 5});
  const auto xr = random_real(rng, {4, 6, 5});
  const auto b = masked_data(rng, 2, 8, 2);
  const auto t8 = random_complex(rng, {2, 8, 8});

  std::vector<std::pair<std::string, double>> ops;
  ops.emplace_back("relu", fd_check([&](Tape &t, const V &v) { return op::mse(t, op::relu(t, v[0]), tr); }, {xr}, rng));
  ops.emplace_back("add/sub/scale", fd_check([&](Tape &t, const V &v) {
                     return op::mse(t, op::scale(t, op::sub(t, op::add(t, v[0], v[1]), op::scale(t, v[1], 3.0)), -0.7), tc);
                   }, {xc, yc}, rng));
  ops.emplace_back("pack/unpack", fd_check([&](Tape &t, const V &v) {
                     return op::add(t, op::mse(t, op::pack(t, v[0]), tr), op::mse(t, op::unpack(t, v[1]), tc));
                   }, {xc, xr}, rng));
  ops.emplace_back("shift", fd_check([&](Tape &t, const V &v) {
                     return op::mse(t, op::shift(t, op::scale(t, op::shift(t, v[0], false), 2.0), true), tc);
                   }, {xc}, rng));
  ops.emplace_back("fft2/ifft2", fd_check([&](Tape &t, const V &v) {
                     return op::add(t, op::mse(t, op::fft2(t, v[0]), tc), op::mse(t, op::ifft2(t, v[0]), tc));
                   }, {xc}, rng));
  ops.emplace_back("grad_weight", fd_check([&](Tape &t, const V &v) {
                     return op::add(t, op::mse(t, op::grad_weight(t, v[0]), ComplexTensor({4, 6, 5})),
                                    op::mse(t, op::grad_weight_adjoint(t, v[1]), tc));
                   }, {xc, random_complex(rng, {4, 6, 5})}, rng));
  ops.emplace_back("dc_solve identity", fd_check([&](Tape &t, const V &v) {
                     return op::mse(t, op::dc_solve(t, b, v[0], &v[1], 0.8, 0.3, nn::Weighting::Identity), t8);
                   }, {random_complex(rng, {2, 8, 8}), random_complex(rng, {2, 8, 8})}, rng));
  ops.emplace_back("dc_solve gradient", fd_check([&](Tape &t, const V &v) {
                     return op::mse(t, op::dc_solve(t, b, v[0], &v[1], 1e-3, 0.3, nn::Weighting::Gradient), t8);
                   }, {random_complex(rng, {4, 8, 8}), random_complex(rng, {2, 8, 8})}, rng));
  ops.emplace_back("conv2d", fd_check([&](Tape &t, const V &v) { return op::mse(t, op::conv2d(t, v[0], v[1], v[2]), tr); },
                                      {xr, random_real(rng, {4, 4, 3, 3}), random_real(rng, {4})}, rng));

  // full K = 2 graphs, every parameter tensor perturbed along a random direction
  const auto bb = masked_data(rng, 2, 16, 2.5);
  const auto target = random_complex(rng, {2, 16, 16}, 0.1);
  for (bool hybrid : {false, true})
    for (auto weighting : {nn::Weighting::Identity, nn::Weighting::Gradient}) {
      auto m = nn::make_model(rng, cnn(2 * nn::kspace_bands(weighting, 2), 3, 4),
                              hybrid ? std::optional(cnn(4, 3, 4)) : std::nullopt, 2,
                              weighting == nn::Weighting::Gradient ? 1e-3 : 1.0, hybrid ? 0.5 : 0.0, weighting);
      m.kspace_scale = 1.0 / 16;
      for (auto *p : nn::parameter_tensors(m))
        for (auto &v : *p) v += 0.1 * rng.normal();
      const nn::Example ex{"x", bb, target};
      std::vector<RealTensor> grads;
      nn::example_loss(ex, m, &grads);
      auto params = nn::parameter_tensors(m);
      double worst = 0;
      for (int d = 0; d < 5; ++d) {
        std::vector<RealTensor> dirs, base;
        double analytic = 0;
        for (std::size_t p = 0; p < params.size(); ++p) {
          dirs.push_back(random_real(rng, params[p]->shape()));
          base.push_back(*params[p]);
          analytic += inner(grads[p], dirs[p]);
        }
        const double h = 1e-6;
        for (std::size_t p = 0; p < params.size(); ++p) *params[p] = RealTensor(base[p] + h * dirs[p]);
        const double up = nn::example_loss(ex, m, nullptr);
        for (std::size_t p = 0; p < params.size(); ++p) *params[p] = RealTensor(base[p] - h * dirs[p]);
        const double down = nn::example_loss(ex, m, nullptr);
        for (std::size_t p = 0; p < params.size(); ++p) *params[p] = base[p];
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-12));
      }
      ops.emplace_back(std::string(hybrid ? "H" : "K") + "-DSLR K=2 " +
                           (weighting == nn::Weighting::Gradient ? "gradient" : "identity"),
                       worst);
    }
  double worst = 0;
  for (const auto &[name, err] : ops) {
    worst = std::max(worst, err);
    if (err >= 1e-3) o.detail << " " << name << "=" << err;
  }
  const double seconds = since(t0);
  o.detail << " " << ops.size() << " checks, worst relative error " << worst;
  o.require(worst < 1e-3, "finite differences within 1e-3");
  o.require(seconds < 120, "runtime < 2 min");
}

// ---- criterion 7

data::DatasetConfig toy_config() {
  data::DatasetConfig c;
  c.train = 200;
  c.val = 20;
  c.height = c.width = 32;
  c.coils = 4;
  c.mask_kind = acq::MaskKind::VariableDensity2d;
  c.acceleration = 4;
  c.calib = 8;
  c.seed = 5;
  return c;
}

struct Toy {
  std::vector<nn::Example> train, held_out;
  std::optional<nn::UnrolledModel> kdslr;
};

double mean_snr(const std::vector<nn::Example> &set, const std::function<ComplexTensor(const nn::Example &)> &f) {
  double s = 0;
  for (const auto &ex : set) s += analysis::snr(ex.ground_truth, f(ex));
  return s / static_cast<double>(set.size());
}

nn::UnrolledModel train_toy(const Toy &toy, bool hybrid) {
  Rng rng(1);
  // the hybrid splits its feature maps between the two networks at a matched parameter count
  const auto ks = cnn(8, 3, hybrid ? 10 : 16);
  const auto is = hybrid ? std::optional(cnn(8, 3, 10)) : std::nullopt;
  const auto m = nn::make_model(rng, ks, is, 3, 1.0, hybrid ? 1.0 : 0.0, nn::Weighting::Identity);
  nn::TrainConfig tc;
  tc.epochs = 20;
  tc.learning_rate = 3e-3;
  tc.seed = 3;
  return nn::train(toy.train, m, tc).model;
}

std::size_t parameter_count(const nn::UnrolledModel &m) {
  std::size_t n = 0;
  for (const auto *p : nn::parameter_tensors(m)) n += p->size();
  return n;
}

void toy_learning(Outcome &o, Toy &toy) {
  const auto t0 = Clock::now();
  const auto c = toy_config();
  for (std::size_t i = 0; i < c.count(); ++i) {
    auto a = data::synth_example(c, i);
    nn::Example ex{data::example_id(i), a.kspace, a.coil_images};
    (i < c.train ? toy.train : toy.held_out).push_back(std::move(ex));
  }
  const double zf = mean_snr(toy.held_out, [](const nn::Example &e) { return acq::apply_adjoint(e.kspace); });
  const auto k = train_toy(toy, false);
  const double k_snr = mean_snr(toy.held_out, [&](const nn::Example &e) { return nn::unrolled_forward(e.kspace, k); });
  const auto h = train_toy(toy, true);
  const double h_snr = mean_snr(toy.held_out, [&](const nn::Example &e) { return nn::unrolled_forward(e.kspace, h); });
  const auto k2 = train_toy(toy, false);
  bool same = true;
  const auto pa = nn::parameter_tensors(k), pb = nn::parameter_tensors(k2);
  for (std::size_t i = 0; i < pa.size(); ++i) same = same && *pa[i] == *pb[i];
  const double seconds = since(t0);
  toy.kdslr = k;
  o.detail << std::setprecision(4) << " zero-filled " << zf << " dB, K-DSLR " << k_snr << " dB (" << parameter_count(k)
           << " params), H-DSLR " << h_snr << " dB (" << parameter_count(h) << " params), rerun "
           << (same ? "identical" : "differs");
  o.require(k_snr >= zf + 3, "K-DSLR >= zero-filled + 3 dB");
  o.require(h_snr >= k_snr - 0.5, "H-DSLR >= K-DSLR - 0.5 dB");
  o.require(h_snr >= zf + 3, "H-DSLR >= zero-filled + 3 dB");
  o.require(same, "deterministic");
  o.require(seconds < 1800, "runtime < 30 min");
}

// ---- criterion 8

void speed_ordering(Outcome &o, const Toy &toy) {
  if (!toy.kdslr) throw std::runtime_error("no trained K-DSLR available");
  double t_net = 0, t_irls = 0, t_cal = 0;
  const std::size_t instances = 2, repeats = 10;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto &b = toy.held_out[i].kspace;
    auto t0 = Clock::now();
    for (std::size_t r = 0; r < repeats; ++r) (void)nn::unrolled_forward(b, *toy.kdslr);
    t_net += since(t0) / repeats;

    const auto spec = solve::resolve_spec(make_spec(Stacking::HorizontalMultichannel, 5, 5, 0, 0, 1), b);
    solve::IrlsConfig cfg;
    cfg.lambda = 1e-6;
    cfg.outer_iterations = 50;
    cfg.cg = {40, 1e-12};
    cfg.spec = spec;
    cfg.plateau_tolerance = 0;
    t0 = Clock::now();
    (void)solve::irls_solve(b, cfg);
    t_irls += since(t0);

    t0 = Clock::now();
    const auto q = lift::calibrated_nullspace(b, spec);
    (void)solve::calibrated_solve(b, q, 1.0, spec, {300, 1e-12});
    t_cal += since(t0);
  }
  o.detail << std::setprecision(4) << " per instance: K-DSLR " << t_net / instances << " s, calibrated "
           << t_cal / instances << " s, irls " << t_irls / instances << " s, irls/K-DSLR " << t_irls / t_net;
  o.require(t_irls >= 20 * t_net, "K-DSLR >= 20x faster than irls");
  o.require(t_cal < t_irls, "calibrated faster than irls");
}

// ---- criterion 9

void probe(Outcome &o) {
  Rng rng(9);
  const auto e = acq::make_edge_phantom(rng, 32, 32, 1);
  const auto spec = make_spec(Stacking::VerticalGradient, 3, 3, 32, 32, 1);
  CMatrix q(9, 1);
  for (std::size_t i = 0; i < 9; ++i) q(static_cast<Eigen::Index>(i), 0) = e.annihilator[i];
  q /= q.norm();
  const auto op = analysis::filterbank_operator(lift::build_filterbank(q, spec));
  double worst = 0;
  for (auto injection : {analysis::Injection::GDomain, analysis::Injection::Image}) {
    Rng r(90);
    const auto p = analysis::annihilation_probe(op, e.phantom.image, spec, {0.01, 4000, injection, true}, r);
    worst = std::max(worst, analysis::relative_l2(p.sos, analysis::linear_probe_reference(op, spec, injection, 0.01)));
  }
  o.detail << " linear oracle relative L2 at R=4000 " << worst << ";";
  o.require(worst < 0.10, "linear oracle within 10%");

  // single-coil gradient-weighted K-DSLR on shape phantoms
  data::DatasetConfig c;
  c.train = 60;
  c.test = 4;
  c.coils = 1;
  c.mask_kind = acq::MaskKind::VariableDensity2d;
  c.acceleration = 4;
  c.calib = 8;
  c.seed = 11;
  std::vector<nn::Example> train, held_out;
  for (std::size_t i = 0; i < c.count(); ++i) {
    auto a = data::synth_example(c, i);
    (i < c.train ? train : held_out).push_back({data::example_id(i), a.kspace, a.coil_images});
  }
  Rng init(1);
  const auto m0 = nn::make_model(init, cnn(4, 3, 16), std::nullopt, 3, 1e-3, 0.0, nn::Weighting::Gradient);
  nn::TrainConfig tc;
  tc.epochs = 8;
  tc.learning_rate = 3e-3;
  tc.seed = 3;
  const auto m = nn::train(train, m0, tc).model;
  const auto net = [&m](const ComplexTensor &z) { return nn::kspace_network(z, m); };
  double edge = 0, flat = 0;
  int wins = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    Rng r(100 + i);
    const auto p = analysis::annihilation_probe(net, held_out[i].ground_truth, spec,
                                                {0.01, 1000, analysis::Injection::GDomain, true}, r);
    const auto pc = analysis::classify_pixels(held_out[i].ground_truth);
    const double e_i = analysis::masked_mean(p.sos, pc.edge), f_i = analysis::masked_mean(p.sos, pc.flat);
    edge += e_i;
    flat += f_i;
    wins += e_i < f_i;
  }
  edge /= static_cast<double>(held_out.size());
  flat /= static_cast<double>(held_out.size());
  o.detail << " trained N_k at R=1000: edge mean " << edge << ", flat mean " << flat << " (edge < flat on " << wins
           << "/" << held_out.size() << " phantoms)";
  o.require(edge < flat, "edge SOS below flat SOS");
}

// ---- criterion 10

int run_binary(const std::vector<std::string> &args, const fs::path &stdout_file) {
  std::string cmd = SLR_RECON_BIN;
  for (const auto &a : args) cmd += " '" + a + "'";
  cmd += " > '" + stdout_file.string() + "' 2>&1";
  return std::system(cmd.c_str());
}

void reproducibility(Outcome &o) {
  const auto dir = testing::scratch_dir("acceptance_rerun");
  const std::string data = "dataset=" + (dir / "data").string();
  const std::string ckpt = "model.checkpoint=" + (dir / "train" / "checkpoint").string();
  const std::vector<std::vector<std::string>> runs = {
      {"synth", "--set", "data.train=4", "--set", "data.test=2", "--set", "seed=7"},
      {"irls", "--set", data, "--set", "irls.outer_iterations=5"},
      {"calib", "--set", data},
      {"split", "--set", data, "--set", "split.iterations=50"},
      {"train", "--set", data, "--set", "train.epochs=2"},
      {"recon", "--set", data, "--set", ckpt},
      {"probe", "--set", data, "--set", ckpt, "--set", "probe.realizations=50"},
      {"metrics", "--set", data, "--set", "metrics.recon_dir=" + (dir / "irls").string()},
  };
  int compared = 0;
  for (auto args : runs) {
    const std::string name = args[0];
    const auto out = dir / (name == "synth" ? "data" : name);
    args.push_back("--set");
    args.push_back("output_dir=" + out.string());
    if (run_binary(args, dir / (name + "_1.txt")) != 0) {
      o.require(false, name + " exited with an error");
      continue;
    }
    const auto first = testing::artifacts(out);
    const auto moved = dir / (name + "_first");
    fs::rename(out, moved);
    if (run_binary(args, dir / (name + "_2.txt")) != 0) {
      o.require(false, name + " rerun exited with an error");
      continue;
    }
    const bool same = first == testing::artifacts(out) &&
                      testing::read_file(dir / (name + "_1.txt")) == testing::read_file(dir / (name + "_2.txt"));
    compared += static_cast<int>(first.size());
    o.require(same, name + " artifacts differ");
  }
  o.detail << " 8 pipelines rerun, " << compared << " artifacts compared byte for byte";
}

}  // namespace

int main() {
  report(1, "operator algebra", operator_algebra);
  report(2, "inverse fourth-root weight", nullspace_weight_check);
  report(3, "annihilation witnesses", witnesses);
  report(4, "irls recovery", irls_recovery);
  report(5, "analytic data consistency", dc_versus_cg);
  report(6, "gradient suite", gradient_suite);
  Toy toy;
  report(7, "toy end-to-end learning", [&](Outcome &o) { toy_learning(o, toy); });
  report(8, "speed ordering", [&](Outcome &o) { speed_ordering(o, toy); });
  report(9, "annihilation probe", probe);
  report(10, "reproducibility", reproducibility);
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << 10 - failures << "/10" << std::endl;
  return failures ? 1 : 0;
}
