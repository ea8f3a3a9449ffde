#include "slr/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "slr/analysis.hpp"
#include "slr/cten.hpp"
#include "slr/dataset.hpp"
#include "slr/fft.hpp"
#include "slr/nn/train.hpp"
#include "slr/parallel.hpp"
#include "slr/solvers.hpp"

namespace slr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string> kPipelines = {"synth", "irls", "calib", "split", "train", "recon", "probe", "metrics"};

json default_config() {
  data::DatasetConfig d;
  d.test = 4;
  d.mask_kind = acq::MaskKind::VariableDensity2d;
  json data = data::to_json(d);
  data.erase("seed");
  return json{
      {"pipeline", ""},
      {"seed", 0},
      {"output_dir", "slr_out"},
      {"threads", 0},
      {"dataset", ""},
      {"eval_split", "test"},
      {"max_examples", 0},
      {"write_images", true},
      {"data", data},
      {"lifting", {{"stacking", "auto"}, {"window", {5, 5}}}},
      {"irls",
       {{"lambda", 1e-6},
        {"outer_iterations", 50},
        {"cg_iterations", 40},
        {"cg_tolerance", 1e-12},
        {"epsilon_initial", 1e-2},
        {"epsilon_decay", 0.5},
        {"epsilon_floor", 1e-9},
        {"plateau_tolerance", 0.0}}},
      {"calib", {{"lambda", 1.0}, {"rank_tolerance", 1e-6}, {"cg_iterations", 300}, {"cg_tolerance", 1e-12}}},
      {"split",
       {{"lambda", 1.0},
        {"beta", 100.0},
        {"iterations", 1000},
        {"q_source", "calibrated"},
        {"plateau_tolerance", 1e-10}}},
      {"model",
       {{"K", 3},
        {"lambda1", 1.0},
        {"lambda2", 1.0},
        {"weighting", "identity"},
        {"hybrid", false},
        {"layers", 3},
        {"filters", 16},
        {"kernel", 3},
        {"image_filters", 0},
        {"kspace_scale", 0.0},
        {"checkpoint", ""}}},
      {"train",
       {{"epochs", 20},
        {"learning_rate", 3e-3},
        {"batch_size", 1},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"adam_epsilon", 1e-8}}},
      {"probe",
       {{"operator", "network"},
        {"sigma", 0.01},
        {"realizations", 1000},
        {"injection", "g-domain"},
        {"subtract", true},
        {"reference", false}}},
      {"metrics", {{"recon_dir", ""}, {"method", "recon"}}},
  };
}

namespace {

bool compatible(const json &def, const json &v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array() || v.size() != def.size()) return false;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!compatible(def[i], v[i])) return false;
    return true;
  }
  return false;
}

std::string kind_name(const json &def) {
  if (def.is_number_float()) return "a number";
  if (def.is_number_integer()) return "an integer";
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array of " + std::to_string(def.size());
  return "an object";
}

void merge_checked(json &base, const json &in, const std::string &prefix, std::set<std::string> &set_keys,
                   std::vector<std::string> &bad) {
  if (!in.is_object()) {
    bad.push_back((prefix.empty() ? "config" : prefix) + ": expected an object");
    return;
  }
  for (const auto &[key, value] : in.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      bad.push_back("unknown key '" + path + "'");
      continue;
    }
    json &target = base[key];
    if (target.is_object()) {
      merge_checked(target, value, path, set_keys, bad);
    } else if (!compatible(target, value)) {
      bad.push_back("'" + path + "' must be " + kind_name(target) + ", got " + value.dump());
    } else {
      target = target.is_number_float() ? json(value.get<double>()) : value;
      set_keys.insert(path);
    }
  }
}

json parse_override_value(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &) {
    return json(text);
  }
}

// Typed view over the resolved tree that collects every violation.
class Reader {
 public:
  explicit Reader(const json &root) : root_(root) {}

  const json &at(const std::string &path) const {
    const json *j = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      j = &j->at(path.substr(start, dot - start));
      if (dot == std::string::npos) return *j;
      start = dot + 1;
    }
  }

  double number(const std::string &path, double lo, double hi, bool strict_lo = false) {
    const double v = at(path).get<double>();
    if (!std::isfinite(v) || v < lo || v > hi || (strict_lo && v == lo)) {
      std::ostringstream os;
      os << "'" << path << "' = " << v << " must lie in " << (strict_lo ? "(" : "[") << lo << ", " << hi << "]";
      errors.push_back(os.str());
    }
    return v;
  }

  std::int64_t integer(const std::string &path, std::int64_t lo, std::int64_t hi) {
    const auto v = at(path).get<std::int64_t>();
    if (v < lo || v > hi)
      errors.push_back("'" + path + "' = " + std::to_string(v) + " must lie in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    return v;
  }

  std::size_t count(const std::string &path, std::size_t lo = 0) {
    return static_cast<std::size_t>(integer(path, static_cast<std::int64_t>(lo), std::int64_t{1} << 40));
  }

  std::string choice(const std::string &path, const std::vector<std::string> &allowed) {
    const auto v = at(path).get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto &a : allowed) list += (list.empty() ? "" : ", ") + a;
      errors.push_back("'" + path + "' = '" + v + "' must be one of: " + list);
    }
    return v;
  }

  std::string text(const std::string &path) const { return at(path).get<std::string>(); }
  bool flag(const std::string &path) const { return at(path).get<bool>(); }

  template <class F>
  void check(F &&fn) {
    try {
      fn();
    } catch (const std::invalid_argument &e) {
      errors.emplace_back(e.what());
    }
  }

  std::vector<std::string> errors;

 private:
  const json &root_;
};

struct Settings {
  std::string pipeline;
  ResolvedConfig config;
  std::uint64_t seed = 0;
  fs::path out;
  std::size_t threads = 0;
  fs::path dataset;
  std::string eval_split;
  std::size_t max_examples = 0;
  bool write_images = true;
  data::DatasetConfig data;

  std::string stacking;
  std::size_t window_rows = 5, window_cols = 5;
  solve::IrlsConfig irls;
  double calib_lambda = 1, rank_tolerance = 1e-6;
  CgOptions calib_cg;
  solve::SplitConfig split;

  std::size_t K = 3;
  bool K_explicit = false;
  double lambda1 = 1, lambda2 = 1;
  nn::Weighting weighting = nn::Weighting::Identity;
  bool hybrid = false;
  std::size_t layers = 3, filters = 16, kernel = 3, image_filters = 0;  // 0 = same as filters
  double kspace_scale = 0;
  fs::path checkpoint;
  nn::TrainConfig train;

  std::string probe_operator;
  analysis::ProbeConfig probe;
  bool probe_reference = false;

  fs::path recon_dir;
  std::string method;

  bool has(const std::string &key) const { return config.explicit_keys.count(key) > 0; }
};

// `prior` holds violations already found while merging; they are reported
// together with the semantic ones.
Settings load_settings(const std::string &pipeline, const ResolvedConfig &resolved, std::vector<std::string> prior) {
  Settings s;
  s.pipeline = pipeline;
  s.config = resolved;
  Reader r(resolved.tree);
  r.errors = std::move(prior);
  s.seed = static_cast<std::uint64_t>(r.integer("seed", 0, std::numeric_limits<std::int64_t>::max()));
  s.out = r.text("output_dir");
  if (s.out.empty()) r.errors.push_back("'output_dir' must not be empty");
  s.threads = r.count("threads");
  s.dataset = r.text("dataset");
  s.eval_split = r.choice("eval_split", {"train", "val", "test"});
  s.max_examples = r.count("max_examples");
  s.write_images = r.flag("write_images");

  json data = resolved.tree.at("data");
  data["seed"] = s.seed;
  r.check([&] {
    const std::size_t before = r.errors.size();
    r.choice("data.mask_kind", {"uniform-lines", "variable-density-lines", "variable-density-2d"});
    r.choice("data.phantom", {"shapes", "edge"});
    for (const char *k : {"train", "val", "test", "height", "width", "coils", "calib", "n_shapes", "bandwidth"})
      r.count(std::string("data.") + k);
    if (r.errors.size() == before) {
      s.data = data::dataset_config_from_json(data);
      s.data.validate();
    }
  });

  s.stacking = r.choice("lifting.stacking", {"auto", "vertical", "horizontal"});
  const auto &win = r.at("lifting.window");
  const auto wr = win[0].get<std::int64_t>(), wc = win[1].get<std::int64_t>();
  if (wr < 1 || wc < 1) r.errors.push_back("'lifting.window' extents must be >= 1");
  s.window_rows = static_cast<std::size_t>(std::max<std::int64_t>(wr, 1));
  s.window_cols = static_cast<std::size_t>(std::max<std::int64_t>(wc, 1));

  const double inf = std::numeric_limits<double>::infinity();
  s.irls.lambda = r.number("irls.lambda", 0, inf, true);
  s.irls.outer_iterations = static_cast<int>(r.integer("irls.outer_iterations", 1, 100000));
  s.irls.cg.max_iterations = static_cast<int>(r.integer("irls.cg_iterations", 1, 1000000));
  s.irls.cg.tolerance = r.number("irls.cg_tolerance", 0, 1);
  s.irls.epsilon.initial_factor = r.number("irls.epsilon_initial", 0, inf, true);
  s.irls.epsilon.decay = r.number("irls.epsilon_decay", 0, 1, true);
  s.irls.epsilon.floor_factor = r.number("irls.epsilon_floor", 0, inf);
  s.irls.plateau_tolerance = r.number("irls.plateau_tolerance", 0, inf);

  s.calib_lambda = r.number("calib.lambda", 0, inf, true);
  s.rank_tolerance = r.number("calib.rank_tolerance", 0, 1, true);
  s.calib_cg.max_iterations = static_cast<int>(r.integer("calib.cg_iterations", 1, 1000000));
  s.calib_cg.tolerance = r.number("calib.cg_tolerance", 0, 1);

  s.split.lambda = r.number("split.lambda", 0, inf, true);
  s.split.beta = r.number("split.beta", 0, inf, true);
  s.split.iterations = static_cast<int>(r.integer("split.iterations", 1, 10000000));
  s.split.q_source =
      r.choice("split.q_source", {"calibrated", "recompute"}) == "recompute" ? solve::QSource::Recompute
                                                                              : solve::QSource::FixedCalibrated;
  s.split.plateau_tolerance = r.number("split.plateau_tolerance", 0, inf);
  s.split.rank_tolerance = s.rank_tolerance;
  if (s.split.lambda >= s.split.beta) r.errors.push_back("'split.lambda' must be smaller than 'split.beta'");

  s.K = static_cast<std::size_t>(r.integer("model.K", 0, 1000));
  s.K_explicit = s.has("model.K");
  s.lambda1 = r.number("model.lambda1", 0, inf, true);
  s.lambda2 = r.number("model.lambda2", 0, inf);
  s.weighting = nn::parse_weighting(r.choice("model.weighting", {"identity", "gradient"}));
  s.hybrid = r.flag("model.hybrid");
  if (s.hybrid && s.lambda2 <= 0) r.errors.push_back("'model.lambda2' must be > 0 when 'model.hybrid' is set");
  s.layers = r.count("model.layers", 1);
  s.filters = r.count("model.filters", 1);
  s.kernel = r.count("model.kernel", 1);
  if (s.kernel % 2 == 0) r.errors.push_back("'model.kernel' must be odd");
  s.image_filters = r.count("model.image_filters");
  s.kspace_scale = r.number("model.kspace_scale", 0, inf);
  s.checkpoint = r.text("model.checkpoint");

  s.train.epochs = r.count("train.epochs", 1);
  s.train.learning_rate = r.number("train.learning_rate", 0, inf);
  s.train.batch_size = r.count("train.batch_size", 1);
  s.train.beta1 = r.number("train.beta1", 0, 1);
  s.train.beta2 = r.number("train.beta2", 0, 1);
  s.train.adam_epsilon = r.number("train.adam_epsilon", 0, inf, true);
  s.train.seed = s.seed;
  s.train.threads = s.threads;

  s.probe_operator = r.choice("probe.operator", {"network", "filterbank"});
  s.probe.sigma = r.number("probe.sigma", 0, inf, true);
  s.probe.realizations = r.count("probe.realizations", 1);
  s.probe.injection = analysis::parse_injection(r.choice("probe.injection", {"image", "g-domain"}));
  s.probe.subtract = r.flag("probe.subtract");
  s.probe_reference = r.flag("probe.reference");

  s.recon_dir = r.text("metrics.recon_dir");
  s.method = r.text("metrics.method");
  if (s.method.empty() || s.method.find_first_of(",\n") != std::string::npos)
    r.errors.push_back("'metrics.method' must be a non-empty label without commas");

  const bool needs_checkpoint = (pipeline == "recon" && !(s.K_explicit && s.K == 0)) ||
                                (pipeline == "probe" && s.probe_operator == "network");
  if (needs_checkpoint && s.checkpoint.empty())
    r.errors.push_back("'model.checkpoint' is required for " + pipeline +
                       (pipeline == "recon" ? " (set model.K=0 for the zero-filled baseline)" : ""));
  if (pipeline == "metrics" && s.recon_dir.empty()) r.errors.push_back("'metrics.recon_dir' is required");
  if (pipeline == "train" && s.K == 0) r.errors.push_back("'model.K' must be >= 1 for training");

  if (!r.errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto &e : r.errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return s;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<nn::Example> load_inputs(const Settings &s, const std::string &split) {
  std::vector<nn::Example> out;
  if (!s.dataset.empty()) {
    out = data::load_examples(data::load_manifest(s.dataset / "manifest.json"), split);
  } else {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.data.count(); ++i)
      if (data::split_of(s.data, i) == split) idx.push_back(i);
    out.resize(idx.size());
    parallel_for(idx.size(), s.threads ? s.threads : worker_threads(), [&](std::size_t k) {
      acq::Acquisition a = data::synth_example(s.data, idx[k]);
      out[k] = nn::Example{data::example_id(idx[k]), std::move(a.kspace), std::move(a.coil_images)};
    });
  }
  if (s.max_examples && out.size() > s.max_examples) out.resize(s.max_examples);
  return out;
}

lift::LiftingSpec lifting_spec(const Settings &s, std::size_t coils) {
  lift::LiftingSpec spec;
  if (s.stacking == "vertical" || (s.stacking == "auto" && coils == 1))
    spec.stacking = lift::Stacking::VerticalGradient;
  else
    spec.stacking = lift::Stacking::HorizontalMultichannel;
  spec.filter_rows = s.window_rows;
  spec.filter_cols = s.window_cols;
  return spec;
}

struct MethodOutput {
  ComplexTensor image;
  std::vector<solve::TraceRow> trace;
  double setup_seconds = 0;
  double solve_seconds = 0;
};

using Method = std::function<MethodOutput(const nn::Example &)>;

void write_summary(const Settings &s, std::ostream &out, const std::string &label,
                   const analysis::MetricReport &rep, const analysis::MetricReport *baseline) {
  out << label << ": n=" << rep.rows.size() << " snr_db=" << fixed(rep.mean_snr())
      << " psnr_db=" << fixed(rep.mean_psnr()) << " ssim=" << fixed(rep.mean_ssim());
  if (baseline) out << " zero_filled_snr_db=" << fixed(baseline->mean_snr());
  out << " out=" << s.out.string() << "\n";
}

int reconstruct(const Settings &s, const std::string &method, const Method &fn, std::ostream &out) {
  const auto examples = load_inputs(s, s.eval_split);
  if (examples.empty()) throw std::runtime_error("no examples in split '" + s.eval_split + "'");
  analysis::MetricReport rep{method, {}}, zf{"zero-filled", {}};
  std::ostringstream timing;
  timing << "id,setup_seconds,solve_seconds\n";
  for (const auto &ex : examples) {
    MethodOutput r = fn(ex);
    if (!all_finite(r.image)) throw std::runtime_error(method + " produced non-finite output for " + ex.id);
    save_tensor(s.out / "recon" / (ex.id + "_recon.cten"), r.image);
    if (s.write_images) {
      analysis::emit_image(r.image, s.out / "images" / (ex.id + "_mag.pgm"));
      analysis::emit_image(r.image, s.out / "images" / (ex.id + "_err.pgm"), analysis::ImageKind::ErrorMap,
                           &ex.ground_truth);
    }
    if (!r.trace.empty()) write_text(s.out / "traces" / (ex.id + "_trace.csv"), solve::trace_csv(r.trace, true));
    rep.add(ex.id, ex.ground_truth, r.image);
    zf.add(ex.id, ex.ground_truth, acq::apply_adjoint(ex.kspace));
    timing << ex.id << ',' << r.setup_seconds << ',' << r.solve_seconds << "\n";
  }
  analysis::emit_csv(rep, s.out / "metrics.csv");
  analysis::emit_csv(zf, s.out / "baseline_metrics.csv");
  write_text(s.out / "summary.csv", analysis::summary_csv({zf, rep}));
  write_text(s.out / "timing.csv", timing.str());
  write_summary(s, out, method, rep, &zf);
  return 0;
}

int run_synth(const Settings &s, std::ostream &out) {
  if (!s.dataset.empty()) throw ConfigError("synth writes a new dataset; leave 'dataset' empty");
  const auto m = data::synth_dataset(s.data, s.out, s.threads ? s.threads : worker_threads());
  out << "synth: n=" << m.examples.size() << " train=" << s.data.train << " val=" << s.data.val
      << " test=" << s.data.test << " out=" << s.out.string() << "\n";
  return 0;
}

int run_irls(const Settings &s, std::ostream &out) {
  return reconstruct(s, "irls", [&](const nn::Example &ex) {
    solve::IrlsConfig cfg = s.irls;
    cfg.spec = lifting_spec(s, ex.kspace.data.extent(0));
    const auto res = solve::irls_solve(ex.kspace, cfg);
    return MethodOutput{res.image, res.trace, res.setup_seconds, res.solve_seconds};
  }, out);
}

lift::NullSpaceBasis calibrate(const Settings &s, const acq::MultiChannelKSpace &b, const lift::LiftingSpec &spec) {
  if (!b.mask.calib) throw std::runtime_error("the sampling mask has no calibration region");
  return lift::calibrated_nullspace(b, solve::resolve_spec(spec, b), s.rank_tolerance);
}

int run_calib(const Settings &s, std::ostream &out) {
  return reconstruct(s, "calibrated", [&](const nn::Example &ex) {
    const auto spec = lifting_spec(s, ex.kspace.data.extent(0));
    const auto t0 = Clock::now();
    const auto q = calibrate(s, ex.kspace, spec);
    const double setup = seconds_since(t0);
    auto res = solve::calibrated_solve(ex.kspace, q, s.calib_lambda, spec, s.calib_cg);
    return MethodOutput{res.image, res.trace, setup + res.setup_seconds, res.solve_seconds};
  }, out);
}

int run_split(const Settings &s, std::ostream &out) {
  return reconstruct(s, "split", [&](const nn::Example &ex) {
    solve::SplitConfig cfg = s.split;
    cfg.spec = lifting_spec(s, ex.kspace.data.extent(0));
    std::optional<lift::NullSpaceBasis> q;
    const auto t0 = Clock::now();
    if (cfg.q_source == solve::QSource::FixedCalibrated) q = calibrate(s, ex.kspace, cfg.spec);
    const double setup = seconds_since(t0);
    auto res = solve::split_solve(ex.kspace, cfg, q);
    return MethodOutput{res.image, res.trace, setup + res.setup_seconds, res.solve_seconds};
  }, out);
}

nn::UnrolledModel fresh_model(const Settings &s, std::size_t coils) {
  nn::CnnSpec ks{s.layers, s.filters, s.kernel, 2 * nn::kspace_bands(s.weighting, coils)};
  std::optional<nn::CnnSpec> is;
  if (s.hybrid) is = nn::CnnSpec{s.layers, s.image_filters ? s.image_filters : s.filters, s.kernel, 2 * coils};
  Rng rng(s.seed);
  auto m = nn::make_model(rng, ks, is, s.K, s.lambda1, s.hybrid ? s.lambda2 : 0.0, s.weighting);
  m.kspace_scale = s.kspace_scale;
  try {
    m.validate(coils);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
  return m;
}

double mean_snr(const std::vector<nn::Example> &exs, const std::function<ComplexTensor(const nn::Example &)> &f) {
  if (exs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0;
  for (const auto &e : exs) total += analysis::snr(e.ground_truth, f(e));
  return total / static_cast<double>(exs.size());
}

int run_train(Settings s, std::ostream &out) {
  const auto train = load_inputs(s, "train");
  const auto val = load_inputs(s, "val");
  if (train.empty()) throw std::runtime_error("no training examples");
  const std::size_t coils = train.front().kspace.data.extent(0);
  auto model = fresh_model(s, coils);
  s.train.checkpoint_dir = s.out / "checkpoint";
  const double zf = mean_snr(val, [](const nn::Example &e) { return acq::apply_adjoint(e.kspace); });
  std::ostringstream log;
  log << "epoch,loss,val_snr_db,seconds\n";
  log << std::setprecision(10);
  double last_val = zf, last_loss = 0;
  const auto t0 = Clock::now();
  nn::train(train, model, s.train, [&](std::size_t epoch, double loss, const nn::UnrolledModel &m) {
    last_loss = loss;
    last_val = mean_snr(val, [&m](const nn::Example &e) { return nn::unrolled_forward(e.kspace, m); });
    log << epoch << ',' << loss << ',' << last_val << ',' << seconds_since(t0) << "\n";
  });
  write_text(s.out / "train_log.csv", log.str());
  out << "train: model=" << (model.hybrid() ? "h-dslr" : "k-dslr") << " epochs=" << s.train.epochs
      << " loss=" << std::setprecision(6) << last_loss << " val_snr_db=" << fixed(last_val)
      << " zero_filled_val_snr_db=" << fixed(zf) << " out=" << s.out.string() << "\n";
  return 0;
}

nn::UnrolledModel checkpoint_model(const Settings &s) {
  auto m = nn::load_checkpoint(s.checkpoint);
  if (s.K_explicit) m.iterations = s.K;
  return m;
}

int run_recon(const Settings &s, std::ostream &out) {
  if (s.K_explicit && s.K == 0)
    return reconstruct(s, "zero-filled", [](const nn::Example &ex) {
      return MethodOutput{acq::apply_adjoint(ex.kspace), {}, 0, 0};
    }, out);
  const auto model = checkpoint_model(s);
  return reconstruct(s, model.hybrid() ? "h-dslr" : "k-dslr", [&](const nn::Example &ex) {
    model.validate(ex.kspace.data.extent(0));
    const auto t0 = Clock::now();
    auto image = nn::unrolled_forward(ex.kspace, model);
    return MethodOutput{std::move(image), {}, 0, seconds_since(t0)};
  }, out);
}

int run_probe(const Settings &s, std::ostream &out) {
  const auto examples = load_inputs(s, s.eval_split);
  if (examples.empty()) throw std::runtime_error("no examples in split '" + s.eval_split + "'");
  std::optional<nn::UnrolledModel> model;
  if (s.probe_operator == "network") model = checkpoint_model(s);
  std::ostringstream csv;
  csv << std::setprecision(10) << "id,edge_mean,flat_mean,edge_pixels,flat_pixels"
      << (s.probe_reference ? ",reference_rel_l2" : "") << "\n";
  double edge_total = 0, flat_total = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto &ex = examples[i];
    const std::size_t coils = ex.ground_truth.extent(0), h = ex.ground_truth.extent(1),
                      w = ex.ground_truth.extent(2);
    lift::LiftingSpec spec;
    analysis::ProbeOperator op;
    if (model) {
      model->validate(coils);
      spec.stacking = model->weighting == nn::Weighting::Gradient ? lift::Stacking::VerticalGradient
                                                                  : lift::Stacking::HorizontalMultichannel;
      spec.height = h;
      spec.width = w;
      spec.channels = coils;
      op = [&m = *model](const ComplexTensor &z) { return nn::kspace_network(z, m); };
    } else {
      acq::MultiChannelKSpace full{fft2(ex.ground_truth), acq::SamplingMask(h, w, true)};
      full.mask.calib = acq::CalibrationRegion{h, w};
      spec = solve::resolve_spec(lifting_spec(s, coils), full);
      op = analysis::filterbank_operator(
          lift::build_filterbank(lift::calibrated_nullspace(full, spec, s.rank_tolerance).q, spec));
    }
    Rng rng = Rng::derived(s.seed, i);
    auto res = analysis::annihilation_probe(op, ex.ground_truth, spec, s.probe, rng);
    const auto classes = analysis::classify_pixels(ex.ground_truth);
    const double edge = analysis::masked_mean(res.sos, classes.edge), flat = analysis::masked_mean(res.sos, classes.flat);
    edge_total += edge;
    flat_total += flat;
    save_real_tensor(s.out / "probe" / (ex.id + "_sos.cten"), res.sos);
    analysis::emit_image(res.sos, s.out / "probe" / (ex.id + "_sos.pgm"));
    csv << ex.id << ',' << edge << ',' << flat << ',' << classes.edge_count() << ',' << classes.flat_count();
    if (s.probe_reference) {
      const auto ref = analysis::linear_probe_reference(op, spec, s.probe.injection, s.probe.sigma);
      save_real_tensor(s.out / "probe" / (ex.id + "_sos_ref.cten"), ref);
      csv << ',' << analysis::relative_l2(res.sos, ref);
    }
    csv << "\n";
  }
  write_text(s.out / "probe.csv", csv.str());
  const double n = static_cast<double>(examples.size());
  out << "probe: n=" << examples.size() << " operator=" << s.probe_operator
      << " edge_mean=" << std::setprecision(6) << edge_total / n << " flat_mean=" << flat_total / n
      << " out=" << s.out.string() << "\n";
  return 0;
}

int run_metrics(const Settings &s, std::ostream &out) {
  const auto examples = load_inputs(s, s.eval_split);
  if (examples.empty()) throw std::runtime_error("no examples in split '" + s.eval_split + "'");
  analysis::MetricReport rep{s.method, {}}, zf{"zero-filled", {}};
  for (const auto &ex : examples) {
    rep.add(ex.id, ex.ground_truth, load_tensor(s.recon_dir / "recon" / (ex.id + "_recon.cten")));
    zf.add(ex.id, ex.ground_truth, acq::apply_adjoint(ex.kspace));
  }
  analysis::emit_csv(rep, s.out / "metrics.csv");
  write_text(s.out / "summary.csv", analysis::summary_csv({zf, rep}));
  write_summary(s, out, "metrics", rep, &zf);
  return 0;
}

}  // namespace

namespace {

ResolvedConfig merge_all(const json &file, const std::vector<std::string> &overrides, std::vector<std::string> &bad) {
  ResolvedConfig rc{default_config(), {}};
  if (!file.is_null()) merge_checked(rc.tree, file, "", rc.explicit_keys, bad);
  for (const auto &o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      bad.push_back("override '" + o + "' is not of the form key=value");
      continue;
    }
    const std::string key = o.substr(0, eq);
    json patch = parse_override_value(o.substr(eq + 1));
    std::size_t end = key.size();
    while (true) {
      const auto dot = key.rfind('.', end - 1);
      const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
      patch = json{{key.substr(begin, end - begin), patch}};
      if (dot == std::string::npos) break;
      end = dot;
    }
    merge_checked(rc.tree, patch, "", rc.explicit_keys, bad);
  }
  return rc;
}

}  // namespace

ResolvedConfig resolve_config(const json &file, const std::vector<std::string> &overrides) {
  std::vector<std::string> bad;
  ResolvedConfig rc = merge_all(file, overrides, bad);
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto &b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }
  return rc;
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Structured low-rank and unrolled MRI reconstruction on synthetic data", "slr_recon"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  const std::map<std::string, std::string> help = {
      {"synth", "write a synthetic dataset and manifest"},
      {"irls", "IRLS structured low-rank recovery"},
      {"calib", "calibration-based low-rank recovery"},
      {"split", "variable-splitting recovery with the residual projector"},
      {"train", "train an unrolled network"},
      {"recon", "reconstruct with a trained network (model.K=0: zero-filled)"},
      {"probe", "annihilation probe of a network or filterbank"},
      {"metrics", "score reconstructions against ground truth"}};
  for (const auto &name : kPipelines) {
    auto *sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", sets, "override, e.g. --set irls.lambda=1e-4")->take_all();
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  const std::string pipeline = app.get_subcommands().front()->get_name();

  Settings settings;
  try {
    json file;
    if (!config_path.empty()) {
      const auto bytes = read_file(config_path);
      try {
        file = json::parse(bytes.begin(), bytes.end());
      } catch (const json::parse_error &e) {
        throw ConfigError("cannot parse " + config_path + ": " + e.what());
      }
    }
    std::vector<std::string> bad;
    auto resolved = merge_all(file, sets, bad);
    const auto declared = resolved.tree.at("pipeline").get<std::string>();
    if (!declared.empty() && declared != pipeline)
      bad.push_back("config declares pipeline '" + declared + "' but '" + pipeline + "' was requested");
    resolved.tree["pipeline"] = pipeline;
    settings = load_settings(pipeline, resolved, std::move(bad));
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    fs::create_directories(settings.out);
    write_text(settings.out / "resolved_config.json", settings.config.tree.dump(2) + "\n");
    if (pipeline == "synth") return run_synth(settings, out);
    if (pipeline == "irls") return run_irls(settings, out);
    if (pipeline == "calib") return run_calib(settings, out);
    if (pipeline == "split") return run_split(settings, out);
    if (pipeline == "train") return run_train(settings, out);
    if (pipeline == "recon") return run_recon(settings, out);
    if (pipeline == "probe") return run_probe(settings, out);
    return run_metrics(settings, out);
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << pipeline << " failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace slr::cli
