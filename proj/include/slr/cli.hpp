#pragma once

#include <iosfwd>
#include <json.hpp>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace slr::cli {

/// Invalid configuration. The message lists every violation found.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

extern const std::vector<std::string> kPipelines;

/// Every accepted key with its default value.
nlohmann::json default_config();

struct ResolvedConfig {
  nlohmann::json tree;
  std::set<std::string> explicit_keys;  // dotted paths set by the file or overrides
};

/// Merges a config document and then `key=value` overrides over the defaults.
/// Values are parsed as JSON when possible and taken as strings otherwise.
ResolvedConfig resolve_config(const nlohmann::json &file, const std::vector<std::string> &overrides);

/// `slr_recon <pipeline> [--config path] [--set key=value ...]`.
/// Returns 0 on success, 1 on a config error, 2 on a runtime failure.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace slr::cli
