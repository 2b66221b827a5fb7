#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace vlab::cli {

/// A config that does not match the schema. `path` is the dotted field path.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// The schema with every default filled in.
const nlohmann::json& default_config();

/// Parses YAML (or JSON) text into JSON. Plain scalars become bool, null, integer or
/// double where they parse as such; quoted scalars stay strings.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

/// Merges `user` over the defaults, rejecting unknown keys and type mismatches,
/// then checks ranges and enumerations.
nlohmann::json resolve_config(const nlohmann::json& user);

/// Dotted-path access, e.g. "process.hurst".
nlohmann::json& at_path(nlohmann::json& j, const std::string& path);

/// 64-bit FNV-1a over the canonical dump of the config without its "output" and
/// "threads" fields, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

double number_or_inf(const nlohmann::json& j);

}  // namespace vlab::cli
