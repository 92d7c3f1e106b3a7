#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dasc {

/// Ordered `key = value` text records with `#` comments, used for profiles,
/// model configs and checkpoint metadata.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source);
  static KeyValues load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string require(std::string_view key) const;

  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::size_t> get_size_list(std::string_view key,
                                         std::vector<std::size_t> fallback) const;

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
  std::string to_string() const;

 private:
  std::string source_;
  std::vector<std::pair<std::string, std::string>> items_;
};

std::string join_sizes(const std::vector<std::size_t>& values);
/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace dasc
