#include "slr/nn/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "slr/cten.hpp"
#include "slr/fft.hpp"

namespace slr::nn {

using json = nlohmann::json;

void CnnSpec::validate() const {
  if (layers < 1) throw std::invalid_argument("CNN needs at least one layer");
  if (channels < 1 || (layers > 1 && filters < 1)) throw std::invalid_argument("CNN channel counts must be positive");
  if (kernel % 2 == 0) throw std::invalid_argument("CNN kernel extent must be odd");
}

std::size_t CnnSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layers; ++l) n += out_channels(l) * (in_channels(l) * kernel * kernel + 1);
  return n;
}

CnnParams zero_params(const CnnSpec &spec) {
  spec.validate();
  CnnParams p;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    p.weights.emplace_back(Shape{spec.out_channels(l), spec.in_channels(l), spec.kernel, spec.kernel});
    p.biases.emplace_back(Shape{spec.out_channels(l)});
  }
  return p;
}

CnnParams xavier_init(Rng &rng, const CnnSpec &spec) {
  CnnParams p = zero_params(spec);
  const double k2 = static_cast<double>(spec.kernel * spec.kernel);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const double fan_in = static_cast<double>(spec.in_channels(l)) * k2;
    const double fan_out = static_cast<double>(spec.out_channels(l)) * k2;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto &w : p.weights[l]) w = rng.uniform(-bound, bound);
  }
  return p;
}

CnnVars bind(Tape &t, const CnnParams &p, bool trainable) {
  CnnVars v;
  for (const auto &w : p.weights) v.weights.push_back(trainable ? t.variable(w) : t.constant(w));
  for (const auto &b : p.biases) v.biases.push_back(trainable ? t.variable(b) : t.constant(b));
  return v;
}

Var cnn_forward(Tape &t, Var x, const CnnSpec &spec, const CnnVars &p) {
  if (p.weights.size() != spec.layers) throw std::invalid_argument("CNN parameter count does not match spec");
  if (t.real(x).extent(0) != spec.channels)
    throw std::invalid_argument("CNN expects " + std::to_string(spec.channels) + " input channels, got " +
                                std::to_string(t.real(x).extent(0)));
  Var h = x;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    h = op::conv2d(t, h, p.weights[l], p.biases[l]);
    if (l + 1 < spec.layers) h = op::relu(t, h);
  }
  return h;
}

RealTensor cnn_forward(const RealTensor &x, const CnnSpec &spec, const CnnParams &p) {
  Tape t;
  const Var out = cnn_forward(t, t.constant(x), spec, bind(t, p, false));
  return t.real(out);
}

RealTensor cnn_denoise(const RealTensor &x, const CnnSpec &spec, const CnnParams &p) {
  return x - cnn_forward(x, spec, p);
}

std::size_t kspace_bands(Weighting w, std::size_t coils) { return w == Weighting::Gradient ? 2 * coils : coils; }

void UnrolledModel::validate(std::size_t coils) const {
  std::vector<std::string> bad;
  if (kspace_spec.channels != 2 * kspace_bands(weighting, coils))
    bad.push_back("k-space CNN needs " + std::to_string(2 * kspace_bands(weighting, coils)) + " channels");
  if (image_spec.has_value() != theta_i.has_value()) bad.push_back("image CNN spec and parameters must come together");
  if (image_spec && image_spec->channels != 2 * coils)
    bad.push_back("image CNN needs " + std::to_string(2 * coils) + " channels");
  if (lambda2 > 0 && !theta_i) bad.push_back("lambda2 > 0 needs an image network");
  if (lambda1 < 0 || lambda2 < 0) bad.push_back("regularization weights must be >= 0");
  if (theta_k.weights.size() != kspace_spec.layers) bad.push_back("k-space CNN parameters do not match spec");
  if (!bad.empty()) {
    std::string msg = "invalid unrolled model:";
    for (const auto &b : bad) msg += " " + b + ";";
    throw std::invalid_argument(msg);
  }
}

double UnrolledModel::resolved_kspace_scale(std::size_t height, std::size_t width) const {
  if (kspace_scale > 0) return kspace_scale;
  return 1.0 / std::sqrt(static_cast<double>(height * width));
}

UnrolledModel make_model(Rng &rng, const CnnSpec &kspace_spec, const std::optional<CnnSpec> &image_spec,
                         std::size_t iterations, double lambda1, double lambda2, Weighting weighting) {
  UnrolledModel m;
  m.kspace_spec = kspace_spec;
  m.theta_k = xavier_init(rng, kspace_spec);
  if (image_spec) {
    m.image_spec = image_spec;
    m.theta_i = xavier_init(rng, *image_spec);
  }
  m.iterations = iterations;
  m.lambda1 = lambda1;
  m.lambda2 = lambda2;
  m.weighting = weighting;
  return m;
}

ModelVars bind(Tape &t, const UnrolledModel &m, bool trainable) {
  ModelVars v;
  v.k = bind(t, m.theta_k, trainable);
  if (m.theta_i) v.i = bind(t, *m.theta_i, trainable);
  return v;
}

Var kspace_network(Tape &t, Var z_centered, const UnrolledModel &m, const ModelVars &v) {
  const auto &z = t.complex(z_centered);
  const double s = m.resolved_kspace_scale(z.extent(1), z.extent(2));
  Var x = op::pack(t, op::scale(t, z_centered, s));
  Var n = cnn_forward(t, x, m.kspace_spec, v.k);
  return op::scale(t, op::unpack(t, n), 1.0 / s);
}

ComplexTensor kspace_network(const ComplexTensor &z_centered, const UnrolledModel &m) {
  Tape t;
  const ModelVars v = bind(t, m, false);
  return t.complex(kspace_network(t, t.constant(z_centered), m, v));
}

Var unrolled_graph(Tape &t, const acq::MultiChannelKSpace &b, const UnrolledModel &m, const ModelVars &v) {
  m.validate(b.data.extent(0));
  ComplexTensor x0 = b.data;
  acq::apply_mask(x0, b.mask);
  Var x = t.constant(std::move(x0));
  for (std::size_t n = 0; n < m.iterations; ++n) {
    Var z = m.weighting == Weighting::Gradient ? op::grad_weight(t, x) : x;
    Var zc = op::shift(t, z, false);
    Var theta = op::shift(t, op::sub(t, zc, kspace_network(t, zc, m, v)), true);
    if (m.hybrid()) {
      Var img = op::ifft2(t, x);
      Var ni = op::unpack(t, cnn_forward(t, op::pack(t, img), *m.image_spec, *v.i));
      Var phi = op::fft2(t, op::sub(t, img, ni));
      x = op::dc_solve(t, b, theta, &phi, m.lambda1, m.lambda2, m.weighting);
    } else {
      x = op::dc_solve(t, b, theta, nullptr, m.lambda1, m.lambda2, m.weighting);
    }
  }
  return op::ifft2(t, x);
}

ComplexTensor unrolled_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m) {
  Tape t;
  const ModelVars v = bind(t, m, false);
  return t.complex(unrolled_graph(t, b, m, v));
}

ComplexTensor kdslr_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m) {
  if (m.lambda2 != 0) throw std::invalid_argument("kdslr_forward: K-DSLR mode requires lambda2 == 0");
  UnrolledModel k = m;
  k.image_spec.reset();
  k.theta_i.reset();
  return unrolled_forward(b, k);
}

ComplexTensor hdslr_forward(const acq::MultiChannelKSpace &b, const UnrolledModel &m) {
  if (!m.hybrid()) throw std::invalid_argument("hdslr_forward: model has no image network");
  return unrolled_forward(b, m);
}

namespace {

json spec_json(const CnnSpec &s) {
  return json{{"layers", s.layers}, {"filters", s.filters}, {"kernel", s.kernel}, {"channels", s.channels}};
}

CnnSpec spec_from_json(const json &j) {
  CnnSpec s;
  s.layers = j.at("layers").get<std::size_t>();
  s.filters = j.at("filters").get<std::size_t>();
  s.kernel = j.at("kernel").get<std::size_t>();
  s.channels = j.at("channels").get<std::size_t>();
  s.validate();
  return s;
}

void save_params(const std::filesystem::path &dir, const std::string &prefix, const CnnParams &p) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    save_real_tensor(dir / (prefix + "_w" + std::to_string(l) + ".cten"), p.weights[l]);
    save_real_tensor(dir / (prefix + "_b" + std::to_string(l) + ".cten"), p.biases[l]);
  }
}

CnnParams load_params(const std::filesystem::path &dir, const std::string &prefix, const CnnSpec &spec) {
  CnnParams p = zero_params(spec);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    RealTensor w = load_real_tensor(dir / (prefix + "_w" + std::to_string(l) + ".cten"));
    RealTensor b = load_real_tensor(dir / (prefix + "_b" + std::to_string(l) + ".cten"));
    if (w.shape() != p.weights[l].shape() || b.shape() != p.biases[l].shape())
      throw FormatError("checkpoint tensor shapes do not match the stored CNN spec (" + prefix + " layer " +
                        std::to_string(l) + ")");
    p.weights[l] = std::move(w);
    p.biases[l] = std::move(b);
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path &dir, const UnrolledModel &m, const CheckpointInfo &info) {
  std::filesystem::create_directories(dir);
  save_params(dir, "k", m.theta_k);
  if (m.theta_i) save_params(dir, "i", *m.theta_i);
  json meta{{"format", "slr-checkpoint"},
            {"version", 1},
            {"cnn_spec", spec_json(m.kspace_spec)},
            {"image_cnn_spec", m.image_spec ? spec_json(*m.image_spec) : json(nullptr)},
            {"K", m.iterations},
            {"lambda1", m.lambda1},
            {"lambda2", m.lambda2},
            {"weighting", to_string(m.weighting)},
            {"kspace_scale", m.kspace_scale},
            {"epoch", info.epoch},
            {"loss", info.loss}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

UnrolledModel load_checkpoint(const std::filesystem::path &dir, CheckpointInfo *info) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot open checkpoint metadata " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception &e) {
    throw FormatError("malformed checkpoint metadata: " + std::string(e.what()));
  }
  UnrolledModel m;
  try {
    m.kspace_spec = spec_from_json(meta.at("cnn_spec"));
    if (!meta.at("image_cnn_spec").is_null()) m.image_spec = spec_from_json(meta.at("image_cnn_spec"));
    m.iterations = meta.at("K").get<std::size_t>();
    m.lambda1 = meta.at("lambda1").get<double>();
    m.lambda2 = meta.at("lambda2").get<double>();
    m.weighting = parse_weighting(meta.at("weighting").get<std::string>());
    m.kspace_scale = meta.at("kspace_scale").get<double>();
    if (info) {
      info->epoch = meta.at("epoch").get<std::size_t>();
      info->loss = meta.at("loss").get<double>();
    }
  } catch (const json::exception &e) {
    throw FormatError("checkpoint metadata: " + std::string(e.what()));
  }
  m.theta_k = load_params(dir, "k", m.kspace_spec);
  if (m.image_spec) m.theta_i = load_params(dir, "i", *m.image_spec);
  return m;
}

std::vector<RealTensor *> parameter_tensors(UnrolledModel &m) {
  std::vector<RealTensor *> out;
  auto add = [&](CnnParams &p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      out.push_back(&p.weights[l]);
      out.push_back(&p.biases[l]);
    }
  };
  add(m.theta_k);
  if (m.theta_i) add(*m.theta_i);
  return out;
}

std::vector<const RealTensor *> parameter_tensors(const UnrolledModel &m) {
  auto v = parameter_tensors(const_cast<UnrolledModel &>(m));
  return {v.begin(), v.end()};
}

}  // namespace slr::nn
