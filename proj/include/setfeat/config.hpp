#pragma once

// Flat `key=value` configuration. `#` starts a comment, blank lines are
// ignored, a repeated key keeps its last value, unknown keys are errors.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace setfeat {

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

class Config {
 public:
  /// All keys at their defaults.
  Config();

  static Config parse(std::string_view text, std::string_view origin = "<config>");
  static Config load(const std::string& path);

  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;

  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::size_t> get_sizes(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;

  /// One `key=value` line per key, with help comments.
  std::string dump() const;

 private:
  std::size_t index_of(std::string_view key) const;
  std::vector<std::string> values_;
};

}  // namespace setfeat
