#pragma once

// Key-value configuration files (a TOML subset):
//
//   # comment
//   key = 3.5
//   name = "text"          # quotes optional
//   list = [1, 2, 3]
//
// Keys are unique; section headers and nested tables are not supported.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jointmct/csv.hpp"
#include "jointmct/error.hpp"

namespace jointmct::config {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source = "config") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_comment(line);
      auto t = csv::trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') throw DataError(source + ":" + std::to_string(lineno) + ": sections are not supported");
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw DataError(source + ":" + std::to_string(lineno) + ": expected key = value");
      auto key = csv::trim(t.substr(0, eq));
      auto value = csv::trim(t.substr(eq + 1));
      if (key.empty()) throw DataError(source + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key)) throw DataError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      kv.values_[key] = value;
      kv.lines_[key] = lineno;
    }
    kv.source_ = source;
    return kv;
  }

  static KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  std::optional<std::string> string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return unquote(it->second);
  }

  std::optional<double> number(const std::string& key) const {
    auto s = string(key);
    if (!s) return std::nullopt;
    auto v = csv::parse_double(*s);
    if (!v) throw DataError(where(key) + "'" + key + "' must be a number");
    return v;
  }

  std::optional<std::vector<double>> numbers(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string body = it->second;
    if (!body.empty() && body.front() == '[') {
      if (body.back() != ']') throw DataError(where(key) + "unterminated list for '" + key + "'");
      body = body.substr(1, body.size() - 2);
    }
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (csv::trim(item).empty()) continue;
      auto v = csv::parse_double(item);
      if (!v) throw DataError(where(key) + "'" + key + "' has a non-numeric entry '" + csv::trim(item) + "'");
      out.push_back(*v);
    }
    return out;
  }

 private:
  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
      return s.substr(1, s.size() - 2);
    return s;
  }

  std::string where(const std::string& key) const {
    auto it = lines_.find(key);
    return source_ + ":" + (it == lines_.end() ? std::string("?") : std::to_string(it->second)) + ": ";
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string source_;
};

}  // namespace jointmct::config
