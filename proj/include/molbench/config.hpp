#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace molbench {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Reader for the TOML subset used by task and endpoint files: [sections],
/// dotted section names, key = value with strings, integers, floats, booleans
/// and (possibly multi-line) arrays of those. Values are held as a JSON tree.
class Config {
 public:
  Config() = default;
  explicit Config(nlohmann::json tree) : tree_(std::move(tree)) {}

  static Config parse(std::string_view text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  const nlohmann::json& tree() const { return tree_; }
  bool has(std::string_view dotted_key) const { return find(dotted_key) != nullptr; }

  std::string get_string(std::string_view key, const std::string& fallback) const;
  std::string require_string(std::string_view key) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::string> get_strings(std::string_view key) const;

  const std::string& origin() const { return origin_; }

 private:
  const nlohmann::json* find(std::string_view dotted_key) const;
  nlohmann::json tree_ = nlohmann::json::object();
  std::string origin_;
};

}  // namespace molbench
