#include "slr/dataset.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "slr/cten.hpp"
#include "slr/fft.hpp"
#include "slr/parallel.hpp"

namespace slr::data {

using json = nlohmann::json;

PhantomKind parse_phantom_kind(const std::string &name) {
  if (name == "shapes") return PhantomKind::Shapes;
  if (name == "edge") return PhantomKind::Edge;
  throw std::invalid_argument("unknown phantom kind '" + name + "' (expected shapes or edge)");
}

std::string to_string(PhantomKind k) { return k == PhantomKind::Edge ? "edge" : "shapes"; }

void DatasetConfig::validate() const {
  std::vector<std::string> bad;
  if (height < 16 || width < 16) bad.push_back("grid must be at least 16x16");
  if (coils < 1) bad.push_back("coils must be >= 1");
  if (!(acceleration >= 1)) bad.push_back("acceleration must be >= 1");
  if (calib > height || (mask_kind == acq::MaskKind::VariableDensity2d && calib > width))
    bad.push_back("calibration extent exceeds grid");
  if (!(noise_sigma >= 0)) bad.push_back("noise sigma must be >= 0");
  if (coils > 1 && (bandwidth < 1 || bandwidth > std::min(height, width)))
    bad.push_back("sensitivity bandwidth must lie in [1, min(grid)]");
  if (phantom == PhantomKind::Edge && n_shapes > 30) bad.push_back("edge phantoms support at most 30 shapes");
  if (phantom == PhantomKind::Shapes && !(fill >= 0.3 && fill <= 1.0)) bad.push_back("phantom fill must lie in [0.3, 1]");
  if (!(density_width >= 0)) bad.push_back("density width must be >= 0");
  if (!bad.empty()) {
    std::string msg = "invalid dataset config:";
    for (const auto &b : bad) msg += " " + b + ";";
    throw std::invalid_argument(msg);
  }
}

acq::Acquisition synth_example(const DatasetConfig &config, std::uint64_t index) {
  Rng rng = Rng::derived(config.seed, index);
  const std::size_t h = config.height, w = config.width;
  ComplexTensor image;
  if (config.phantom == PhantomKind::Edge)
    image = acq::make_edge_phantom(rng, h, w, config.n_shapes).phantom.image;
  else
    image = acq::make_phantom(rng, h, w, config.n_shapes, config.fill).image;
  acq::Acquisition a;
  if (config.coils == 1) {
    a.coil_images = image.reshaped({1, h, w});
  } else {
    const auto sens = acq::make_sensitivities(rng, h, w, config.coils, config.bandwidth, config.normalize_maps);
    a.coil_images = acq::coil_images(image, sens);
  }
  const auto mask = acq::make_mask(rng, h, w, config.mask_kind, config.acceleration, config.calib,
                                   config.density_width);
  a.kspace = acq::add_noise(acq::apply_forward(a.coil_images, mask), rng, config.noise_sigma);
  a.noise_sigma = config.noise_sigma;
  return a;
}

std::string sha256_hex(const std::vector<std::uint8_t> &bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

json to_json(const DatasetConfig &c) {
  return json{{"train", c.train},
              {"val", c.val},
              {"test", c.test},
              {"height", c.height},
              {"width", c.width},
              {"coils", c.coils},
              {"mask_kind", acq::to_string(c.mask_kind)},
              {"acceleration", c.acceleration},
              {"calib", c.calib},
              {"density_width", c.density_width},
              {"noise_sigma", c.noise_sigma},
              {"n_shapes", c.n_shapes},
              {"fill", c.fill},
              {"bandwidth", c.bandwidth},
              {"normalize_maps", c.normalize_maps},
              {"phantom", to_string(c.phantom)},
              {"seed", c.seed}};
}

DatasetConfig dataset_config_from_json(const json &j) {
  DatasetConfig c;
  c.train = j.at("train").get<std::size_t>();
  c.val = j.at("val").get<std::size_t>();
  c.test = j.at("test").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.coils = j.at("coils").get<std::size_t>();
  c.mask_kind = acq::parse_mask_kind(j.at("mask_kind").get<std::string>());
  c.acceleration = j.at("acceleration").get<double>();
  c.calib = j.at("calib").get<std::size_t>();
  c.density_width = j.at("density_width").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.n_shapes = j.at("n_shapes").get<std::size_t>();
  c.fill = j.at("fill").get<double>();
  c.bandwidth = j.at("bandwidth").get<std::size_t>();
  c.normalize_maps = j.at("normalize_maps").get<bool>();
  c.phantom = parse_phantom_kind(j.at("phantom").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string split_of(const DatasetConfig &c, std::size_t i) {
  if (i < c.train) return "train";
  if (i < c.train + c.val) return "val";
  return "test";
}

std::string example_id(std::size_t i) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << i;
  return os.str();
}

namespace {

std::optional<acq::CalibrationRegion> calib_region(const DatasetConfig &c) {
  if (c.calib == 0) return std::nullopt;
  const bool lines = c.mask_kind != acq::MaskKind::VariableDensity2d;
  return acq::CalibrationRegion{c.calib, lines ? c.width : c.calib};
}

}  // namespace

std::string manifest_json(const Manifest &m) {
  json ex = json::array();
  for (const auto &e : m.examples)
    ex.push_back(json{{"id", e.id},
                      {"split", e.split},
                      {"gt_path", e.gt_path},
                      {"ksp_path", e.ksp_path},
                      {"mask_path", e.mask_path},
                      {"sha256s", e.sha256s}});
  json j{{"version", m.version},
         {"seed", m.config.seed},
         {"shape", {m.config.height, m.config.width}},
         {"channels", m.config.coils},
         {"mask_kind", acq::to_string(m.config.mask_kind)},
         {"acceleration", m.config.acceleration},
         {"noise_sigma", m.config.noise_sigma},
         {"calib", m.calib ? json{m.calib->rows, m.calib->cols} : json(nullptr)},
         {"config", to_json(m.config)},
         {"examples", ex}};
  return j.dump(2) + "\n";
}

Manifest synth_dataset(const DatasetConfig &config, const std::filesystem::path &dir, std::size_t threads) {
  config.validate();
  Manifest m;
  m.config = config;
  m.calib = calib_region(config);
  m.root = dir;
  m.examples.resize(config.count());
  parallel_for(config.count(), threads, [&](std::size_t i) {
    const acq::Acquisition a = synth_example(config, i);
    ManifestEntry e;
    e.id = example_id(i);
    e.split = split_of(config, i);
    e.gt_path = e.split + "/" + e.id + "_gt.cten";
    e.ksp_path = e.split + "/" + e.id + "_ksp.cten";
    e.mask_path = e.split + "/" + e.id + "_mask.cten";
    const auto gt = encode_tensor(a.coil_images);
    const auto ksp = encode_tensor(a.kspace.data);
    const auto mask = encode_tensor(a.kspace.mask.as_tensor());
    write_file(dir / e.gt_path, gt);
    write_file(dir / e.ksp_path, ksp);
    write_file(dir / e.mask_path, mask);
    e.sha256s = {{"gt", sha256_hex(gt)}, {"ksp", sha256_hex(ksp)}, {"mask", sha256_hex(mask)}};
    m.examples[i] = std::move(e);
  });
  write_text(dir / "manifest.json", manifest_json(m));
  return m;
}

Manifest load_manifest(const std::filesystem::path &path) {
  const auto bytes = read_file(path);
  Manifest m;
  m.root = path.parent_path();
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw FormatError("unsupported manifest version " + std::to_string(m.version));
    m.config = dataset_config_from_json(j.at("config"));
    if (!j.at("calib").is_null())
      m.calib = acq::CalibrationRegion{j.at("calib").at(0).get<std::size_t>(), j.at("calib").at(1).get<std::size_t>()};
    for (const auto &e : j.at("examples")) {
      ManifestEntry me;
      me.id = e.at("id").get<std::string>();
      me.split = e.at("split").get<std::string>();
      me.gt_path = e.at("gt_path").get<std::string>();
      me.ksp_path = e.at("ksp_path").get<std::string>();
      me.mask_path = e.at("mask_path").get<std::string>();
      me.sha256s = e.at("sha256s").get<std::map<std::string, std::string>>();
      m.examples.push_back(std::move(me));
    }
  } catch (const json::exception &e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::vector<std::string> verify_checksums(const Manifest &m) {
  std::vector<std::string> bad;
  for (const auto &e : m.examples) {
    const std::pair<const char *, const std::string *> files[] = {
        {"gt", &e.gt_path}, {"ksp", &e.ksp_path}, {"mask", &e.mask_path}};
    for (const auto &[key, rel] : files) {
      const auto it = e.sha256s.find(key);
      if (it == e.sha256s.end() || sha256_hex(read_file(m.root / *rel)) != it->second)
        bad.push_back(e.id + ":" + key);
    }
  }
  return bad;
}

std::vector<nn::Example> load_examples(const Manifest &m, const std::string &split, bool verify) {
  std::vector<nn::Example> out;
  for (const auto &e : m.examples) {
    if (!split.empty() && e.split != split) continue;
    const auto gt = read_file(m.root / e.gt_path), ksp = read_file(m.root / e.ksp_path),
               mask = read_file(m.root / e.mask_path);
    if (verify && (sha256_hex(gt) != e.sha256s.at("gt") || sha256_hex(ksp) != e.sha256s.at("ksp") ||
                   sha256_hex(mask) != e.sha256s.at("mask")))
      throw FormatError("checksum mismatch for example " + e.id);
    nn::Example ex;
    ex.id = e.id;
    ex.ground_truth = decode_tensor(gt);
    ex.kspace.data = decode_tensor(ksp);
    ex.kspace.mask = acq::SamplingMask::from_tensor(decode_tensor(mask));
    ex.kspace.mask.calib = m.calib;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace slr::data
