#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pileload::util {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::string join_doubles(const std::vector<double>& values, char sep = ',');
std::vector<double> parse_double_list(std::string_view text, char sep = ',');

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncate + write + check.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Ordered `key=value` text file. '#' starts a comment line; blank lines are
/// skipped. Keys keep their insertion order on output.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& origin = "key-value text");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  bool has(const std::string& key) const;
  /// Throws DataError naming the origin when missing.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string str() const;

 private:
  std::string origin_ = "key-value text";
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace pileload::util
