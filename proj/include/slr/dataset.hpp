#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slr/acquisition.hpp"
#include "slr/nn/train.hpp"

namespace slr::data {

enum class PhantomKind { Shapes, Edge };

PhantomKind parse_phantom_kind(const std::string &name);
std::string to_string(PhantomKind k);

struct DatasetConfig {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t coils = 4;
  acq::MaskKind mask_kind = acq::MaskKind::VariableDensityLines;
  double acceleration = 4.0;
  std::size_t calib = 8;
  double density_width = 0;
  double noise_sigma = 0;
  std::size_t n_shapes = 6;
  double fill = 0.5;
  std::size_t bandwidth = 5;
  bool normalize_maps = true;
  PhantomKind phantom = PhantomKind::Shapes;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument listing every violated constraint.
  void validate() const;
  std::size_t count() const { return train + val + test; }
};

nlohmann::json to_json(const DatasetConfig &c);
/// Inverse of to_json; every key is required.
DatasetConfig dataset_config_from_json(const nlohmann::json &j);

/// Split name ("train", "val", "test") and zero-padded id of example i.
std::string split_of(const DatasetConfig &c, std::size_t i);
std::string example_id(std::size_t i);

/// One synthetic acquisition; example `index` draws from Rng::derived(seed, index).
acq::Acquisition synth_example(const DatasetConfig &config, std::uint64_t index);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::string gt_path;  // relative to the manifest directory
  std::string ksp_path;
  std::string mask_path;
  std::map<std::string, std::string> sha256s;  // keys gt, ksp, mask
};

struct Manifest {
  int version = 1;
  DatasetConfig config;
  std::optional<acq::CalibrationRegion> calib;
  std::vector<ManifestEntry> examples;
  std::filesystem::path root;  // directory holding manifest.json
};

std::string sha256_hex(const std::vector<std::uint8_t> &bytes);

/// Writes <dir>/<split>/<id>_{gt,ksp,mask}.cten and <dir>/manifest.json.
/// Examples are independent, so the output does not depend on `threads`.
Manifest synth_dataset(const DatasetConfig &config, const std::filesystem::path &dir, std::size_t threads = 1);

Manifest load_manifest(const std::filesystem::path &path);
std::string manifest_json(const Manifest &m);

/// Entries whose stored checksum no longer matches the file on disk.
std::vector<std::string> verify_checksums(const Manifest &m);

/// Loads one split ("" = all). Throws FormatError on checksum mismatch when verify is set.
std::vector<nn::Example> load_examples(const Manifest &m, const std::string &split, bool verify = true);

}  // namespace slr::data
