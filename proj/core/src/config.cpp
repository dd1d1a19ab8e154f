#include "ksd/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "ksd/errors.hpp"

namespace ksd {

namespace {

using V = ValueType;

SchemaEntry entry(std::string key, V type, std::optional<std::string> def, std::string doc,
                  std::optional<double> min = std::nullopt, std::vector<std::string> choices = {},
                  bool required = false) {
  return {std::move(key), type, std::move(def), required, min, std::move(choices), std::move(doc)};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  for (const auto& x : out)
    if (x.empty()) throw ConfigError("empty list element in '" + std::string(s) + "'");
  return out;
}

const SchemaEntry& find_entry(const std::string& key) {
  for (const auto& e : config_schema())
    if (e.key == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return static_cast<std::int64_t>(v);
}

ConfigValue parse_value(const SchemaEntry& e, const std::string& text) {
  switch (e.type) {
    case V::kBool: {
      std::string t = text;
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
      if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
      if (t == "false" || t == "0" || t == "no" || t == "off") return false;
      throw ConfigError(e.key + ": expected a boolean, got '" + text + "'");
    }
    case V::kInt: {
      const auto v = parse_int(e.key, text);
      if (e.min && double(v) < *e.min) throw ConfigError(e.key + " must be >= " + format_real(*e.min));
      return v;
    }
    case V::kReal: {
      double v = 0.0;
      try {
        v = parse_real(text);
      } catch (const ConfigError&) {
        throw ConfigError(e.key + ": expected a real number, got '" + text + "'");
      }
      if (e.min && v < *e.min) throw ConfigError(e.key + " must be >= " + format_real(*e.min));
      return v;
    }
    case V::kString: {
      if (!e.choices.empty() && std::find(e.choices.begin(), e.choices.end(), text) == e.choices.end()) {
        std::string allowed;
        for (const auto& c : e.choices) allowed += (allowed.empty() ? "" : "|") + c;
        throw ConfigError(e.key + " must be one of " + allowed + ", got '" + text + "'");
      }
      return text;
    }
    case V::kStringList:
      return split_list(text);
    case V::kPointList: {
      PointList pts;
      for (const auto& item : split_list(text)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError(e.key + ": expected step:value, got '" + item + "'");
        const auto step = parse_int(e.key, trim(item.substr(0, colon)));
        if (step < 0) throw ConfigError(e.key + ": steps must be nonnegative");
        pts.emplace_back(static_cast<int>(step), parse_real(trim(item.substr(colon + 1))));
      }
      return pts;
    }
  }
  throw ConfigError("unhandled value type");
}

std::string value_text(const ConfigValue& v) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const std::vector<std::string>& l) const {
      std::string out;
      for (const auto& s : l) out += (out.empty() ? "" : ",") + s;
      return out;
    }
    std::string operator()(const PointList& p) const {
      std::string out;
      for (const auto& [s, x] : p) out += (out.empty() ? "" : ",") + std::to_string(s) + ":" + format_real(x);
      return out;
    }
  };
  return std::visit(Visitor{}, v);
}

void flatten(const nlohmann::json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) {
      flatten(v, key, out);
    } else if (v.is_array()) {
      std::string text;
      for (const auto& item : v) {
        std::string piece;
        if (item.is_array() && item.size() == 2) piece = item[0].dump() + ":" + item[1].dump();
        else if (item.is_string()) piece = item.get<std::string>();
        else piece = item.dump();
        text += (text.empty() ? "" : ",") + piece;
      }
      out.emplace_back(key, text);
    } else if (v.is_string()) {
      out.emplace_back(key, v.get<std::string>());
    } else {
      out.emplace_back(key, v.dump());
    }
  }
}

}  // namespace

const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> schema = {
      entry("system", V::kString, std::nullopt, "dynamical system", std::nullopt,
            {"disk_rotation", "kicked_top", "driven_oscillator"}),
      entry("alpha_top", V::kReal, "pi/2", "kicked top: precession angle about x"),
      entry("kappa", V::kReal, "5", "kicked top: torsion strength"),
      entry("renormalize", V::kBool, "true", "kicked top: renormalize the spin after each step"),
      entry("domain_radius", V::kReal, "16", "oscillator: radius R of the phase-space disk", 0.0),
      entry("beta", V::kReal, "0", "inverse temperature of the initial state (0: uniform)", 0.0),
      entry("lambda0", V::kReal, "1", "control value of a constant protocol"),
      entry("protocol.points", V::kPointList, std::nullopt,
            "step:value pairs, piecewise linear, held outside (default: constant lambda0)"),
      entry("protocol.horizon", V::kInt, std::nullopt, "protocol length T (default: depth)", 1.0),
      entry("partitions", V::kStringList, std::nullopt, "partitions for the bound and entropy report"),
      entry("depth", V::kInt, "32", "averaging horizon of the bound (steps)", 1.0),
      entry("samples", V::kInt, "100000", "ensemble size", 1.0),
      entry("volume_samples", V::kInt, "100000", "uniform samples for reversed intersection volumes", 1.0),
      entry("seed", V::kInt, "0", "master seed", 0.0),
      entry("h_source", V::kString, "symbolic", "where h comes from", std::nullopt,
            {"symbolic", "pesin", "value"}),
      entry("h_value", V::kReal, std::nullopt, "h when h_source = value", 0.0),
      entry("h_error", V::kReal, "0", "standard error of h_value", 0.0),
      entry("kse.partitions", V::kStringList, std::nullopt, "partition family for symbolic KSE (default: partitions)"),
      entry("kse.method", V::kString, "ensemble", "path statistics source", std::nullopt, {"ensemble", "orbit"}),
      entry("kse.windows", V::kInt, "4000000", "orbit method: sliding windows per partition", 1.0),
      entry("kse.samples", V::kInt, std::nullopt, "ensemble method: trajectories (default: samples)", 1.0),
      entry("kse.max_length", V::kInt, "16", "longest block length", 1.0),
      entry("kse.min_mean_count", V::kReal, "20", "reliability: samples per distinct block (0: sqrt rule)", 0.0),
      entry("kse.tail", V::kInt, "3", "increments averaged at the end of the reliable range", 1.0),
      entry("kse.miller_madow", V::kBool, "true", "Miller-Madow bias correction"),
      entry("kse.burn_in", V::kInt, "1000", "orbit method: discarded initial steps", 0.0),
      entry("lyapunov.iterations", V::kInt, "1000000", "tangent iterations", 1.0),
      entry("lyapunov.period", V::kInt, "1", "reorthonormalization period", 1.0),
      entry("lyapunov.transient", V::kInt, "1000", "discarded initial steps", 0.0),
      entry("lyapunov.trace_every", V::kInt, "1000", "running-estimate interval", 1.0),
      entry("work.samples", V::kInt, std::nullopt, "trajectories for the work record (default: samples)", 1.0),
      entry("relent.partitions", V::kStringList, std::nullopt, "nested partitions for the relative-entropy check"),
      entry("relent.comparison_time", V::kInt, std::nullopt, "comparison time (default: protocol end)", 0.0),
      entry("relent.backward_samples", V::kInt, "0", "backward-process samples (0: exact quadrature)", 0.0),
      entry("expect.slack_abs", V::kReal, std::nullopt, "require |slack| <= value on every partition", 0.0),
      entry("expect.info", V::kReal, std::nullopt, "require the information term to equal this value"),
      entry("expect.info_tol", V::kReal, "0.02", "tolerance for expect.info", 0.0),
      entry("expect.h_min", V::kReal, std::nullopt, "require h >= value"),
      entry("expect.h_max", V::kReal, std::nullopt, "require h <= value"),
      entry("expect.kse_min", V::kReal, std::nullopt, "require the symbolic KSE >= value"),
      entry("expect.kse_max", V::kReal, std::nullopt, "require the symbolic KSE <= value"),
      entry("expect.bound", V::kBool, "true", "require slack >= -3 sigma on every partition"),
      entry("expect.appendix", V::kBool, "true", "require the per-step coarse-graining inequality"),
      entry("expect.second_law", V::kBool, "true", "require <W_d> >= -3 sigma"),
      entry("expect.jarzynski", V::kBool, "true", "require the Jarzynski check when beta > 0"),
      entry("oracle.instances", V::kInt, "1000", "random discrete systems in the sweep", 1.0),
      entry("oracle.max_cells", V::kInt, "8", "largest discrete system", 2.0),
      entry("oracle.max_depth", V::kInt, "5", "deepest exact enumeration", 1.0),
      entry("oracle.lemma_pairs", V::kInt, "100000", "random pairs for the pointwise lemma", 0.0),
  };
  return schema;
}

std::string schema_markdown() {
  static const char* type_names[] = {"bool", "int", "real", "string", "list<string>", "list<step:value>"};
  std::ostringstream os;
  os << "| key | type | default | constraint | meaning |\n|---|---|---|---|---|\n";
  for (const auto& e : config_schema()) {
    std::string constraint;
    if (e.required) constraint = "required";
    if (e.min) constraint += (constraint.empty() ? "" : ", ") + std::string(">= ") + format_real(*e.min);
    if (!e.choices.empty()) {
      std::string c;
      for (const auto& x : e.choices) c += (c.empty() ? "" : " \\| ") + x;
      constraint += (constraint.empty() ? "" : ", ") + c;
    }
    os << "| `" << e.key << "` | " << type_names[static_cast<int>(e.type)] << " | "
       << (e.default_text ? "`" + *e.default_text + "`" : "") << " | " << constraint << " | " << e.doc
       << " |\n";
  }
  return os.str();
}

double parse_real(std::string_view text) {
  const std::string t = trim(text);
  auto number = [](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("not a real number: '" + s + "'");
    }
  };
  const auto pi = t.find("pi");
  if (pi == std::string::npos) return number(t);
  const std::string before = trim(t.substr(0, pi));
  const std::string after = trim(t.substr(pi + 2));
  double v = std::numbers::pi;
  if (before == "-") {
    v = -v;
  } else if (!before.empty()) {
    if (before.back() != '*') throw ConfigError("not a real number: '" + t + "'");
    const std::string f = trim(before.substr(0, before.size() - 1));
    v *= f == "-" ? -1.0 : number(f);
  }
  if (!after.empty()) {
    if (after.front() != '/') throw ConfigError("not a real number: '" + t + "'");
    v /= number(trim(after.substr(1)));
  }
  return v;
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

Config Config::from_raw(const std::vector<std::pair<std::string, std::string>>& raw) {
  Config c;
  for (const auto& [key, text] : raw) {
    const SchemaEntry& e = find_entry(key);
    if (c.values_.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    c.values_[key] = parse_value(e, text);
  }
  for (const auto& e : config_schema()) {
    if (c.values_.count(e.key)) continue;
    if (e.required) throw ConfigError("missing required config key '" + e.key + "'");
    if (e.default_text) c.values_[e.key] = parse_value(e, *e.default_text);
  }
  return c;
}

Config Config::parse_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> raw;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    raw.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return from_raw(raw);
}

Config Config::parse_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON config must be an object");
  std::vector<std::pair<std::string, std::string>> raw;
  flatten(j, "", raw);
  return from_raw(raw);
}

Config Config::parse(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') return parse_json(text);
  return parse_text(text);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace {
template <class T>
const T& get_as(const std::map<std::string, ConfigValue>& values, const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("config key '" + key + "' is not set");
  if (const T* v = std::get_if<T>(&it->second)) return *v;
  throw ConfigError("config key '" + key + "' has a different type");
}
}  // namespace

bool Config::boolean(const std::string& key) const { return get_as<bool>(values_, key); }
std::int64_t Config::integer(const std::string& key) const { return get_as<std::int64_t>(values_, key); }
double Config::real(const std::string& key) const { return get_as<double>(values_, key); }
const std::string& Config::string(const std::string& key) const { return get_as<std::string>(values_, key); }
const std::vector<std::string>& Config::strings(const std::string& key) const {
  return get_as<std::vector<std::string>>(values_, key);
}
const PointList& Config::points(const std::string& key) const { return get_as<PointList>(values_, key); }

void Config::set(const std::string& key, const std::string& text) {
  values_[key] = parse_value(find_entry(key), text);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + "=" + value_text(value) + "\n";
  return out;
}

std::string Config::hash() const { return sha256_hex(canonical()); }

}  // namespace ksd
