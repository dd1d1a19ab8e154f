#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ksd {

enum class ValueType { kBool, kInt, kReal, kString, kStringList, kPointList };

struct SchemaEntry {
  std::string key;
  ValueType type;
  std::optional<std::string> default_text;  // nullopt: optional without default
  bool required = false;
  std::optional<double> min;                // numeric lower bound
  std::vector<std::string> choices;         // allowed strings
  std::string doc;
};

// The one schema every config is checked against before anything runs.
const std::vector<SchemaEntry>& config_schema();
std::string schema_markdown();

using PointList = std::vector<std::pair<int, double>>;
using ConfigValue =
    std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>, PointList>;

// Typed key/value configuration. Text form:
//   # comment
//   key = value
// JSON objects are accepted too; nested objects flatten to dotted keys.
class Config {
 public:
  static Config parse_text(std::string_view text);
  static Config parse_json(std::string_view text);
  // JSON when the first non-space character is '{', text otherwise.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool boolean(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  const std::string& string(const std::string& key) const;
  const std::vector<std::string>& strings(const std::string& key) const;
  const PointList& points(const std::string& key) const;

  // Replaces one value (parsed and checked against the schema).
  void set(const std::string& key, const std::string& text);

  // Sorted key=value lines with defaults applied; reals printed round-trip.
  std::string canonical() const;
  // SHA-256 of canonical(), lowercase hex.
  std::string hash() const;

 private:
  static Config from_raw(const std::vector<std::pair<std::string, std::string>>& raw);
  std::map<std::string, ConfigValue> values_;
};

// Parses a real that may be written with pi: "1.5", "pi", "pi/2", "2*pi".
double parse_real(std::string_view text);
std::string format_real(double x);
std::string sha256_hex(std::string_view data);

}  // namespace ksd
