#pragma once

// Plain-text `key = value` configuration files. Lines starting with '#' or
// ';' are comments, as is anything after a whitespace-preceded '#' or ';'.
// `[section]` headers are accepted and ignored.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bnpmeta/csv.hpp"

namespace bnpmeta {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = csv::trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[' && text.back() == ']') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = csv::trim(std::string_view(text).substr(0, eq));
    std::string value = csv::trim(std::string_view(text).substr(eq + 1));
    for (std::size_t k = 1; k < value.size(); ++k)
      if ((value[k] == '#' || value[k] == ';') && std::isspace(static_cast<unsigned char>(value[k - 1]))) {
        value = csv::trim(std::string_view(value).substr(0, k));
        break;
      }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return parse_key_values(in);
}

inline double key_value_double(const KeyValues& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto v = csv::parse_double(it->second);
  if (!v) throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
  return *v;
}

inline long key_value_integer(const KeyValues& kv, const std::string& key, long fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto v = csv::parse_integer(it->second);
  if (!v) throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
  return *v;
}

}  // namespace bnpmeta
