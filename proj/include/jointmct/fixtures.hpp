#pragma once

// Bundled datasets described by fixtures/MANIFEST.json. Entries whose CSV is
// not present (data that cannot be redistributed or reconstructed) raise
// FixtureUnavailable with the manifest's reason, so callers can skip.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointmct/dataset.hpp"
#include "jointmct/error.hpp"

#ifndef JOINTMCT_FIXTURE_DIR
#define JOINTMCT_FIXTURE_DIR "fixtures"
#endif

namespace jointmct {

class FixtureUnavailable : public DataError {
 public:
  using DataError::DataError;
};

struct FixtureInfo {
  std::string name;
  std::string kind;  // "long" or "binomial"
  std::string file;
  std::string status;  // "bundled", "fetch", "unavailable"
  std::string provenance;
  std::string reason;
  std::string response, primary, secondary;
  std::vector<std::string> primary_order, secondary_order;
};

using FixtureData = std::variant<LongDataset, BinomialDataset>;

inline std::string default_fixture_dir() {
  if (const char* env = std::getenv("JOINTMCT_FIXTURE_DIR"); env && *env) return env;
  return JOINTMCT_FIXTURE_DIR;
}

inline nlohmann::json read_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "MANIFEST.json";
  std::ifstream in(path);
  if (!in) throw DataError("fixture manifest not found at '" + path.string() + "'");
  return nlohmann::json::parse(in);
}

inline FixtureInfo fixture_info(const std::string& name, const std::string& dir = default_fixture_dir()) {
  const auto manifest = read_manifest(dir);
  for (const auto& e : manifest.at("fixtures")) {
    if (e.at("name") != name) continue;
    FixtureInfo f;
    f.name = name;
    f.kind = e.at("kind");
    f.file = e.at("file");
    f.status = e.value("status", "bundled");
    f.provenance = e.value("provenance", "");
    f.reason = e.value("reason", "");
    f.response = e.value("response", "");
    f.primary = e.value("primary", "");
    f.secondary = e.value("secondary", "");
    f.primary_order = e.value("primary_order", std::vector<std::string>{});
    f.secondary_order = e.value("secondary_order", std::vector<std::string>{});
    return f;
  }
  throw DataError("unknown fixture '" + name + "'");
}

inline std::vector<std::string> fixture_names(const std::string& dir = default_fixture_dir()) {
  const auto manifest = read_manifest(dir);
  std::vector<std::string> out;
  for (const auto& e : manifest.at("fixtures")) out.push_back(e.at("name"));
  return out;
}

inline bool fixture_available(const std::string& name, const std::string& dir = default_fixture_dir()) {
  const auto f = fixture_info(name, dir);
  return std::filesystem::exists(std::filesystem::path(dir) / f.file);
}

inline FixtureData load_fixture(const std::string& name, const std::string& dir = default_fixture_dir()) {
  const auto f = fixture_info(name, dir);
  const auto path = (std::filesystem::path(dir) / f.file).string();
  if (!std::filesystem::exists(path))
    throw FixtureUnavailable("fixture '" + name + "' is not bundled (" + f.status + "): " + f.reason);
  auto order = [](const std::vector<std::string>& v) {
    return v.empty() ? std::nullopt : std::optional<std::vector<std::string>>(v);
  };
  if (f.kind == "binomial") {
    BinomialLoadOptions opt;
    if (!f.primary.empty()) opt.primary_col = f.primary;
    if (!f.secondary.empty()) opt.secondary_col = f.secondary;
    opt.primary_order = order(f.primary_order);
    opt.secondary_order = order(f.secondary_order);
    return load_binomial_csv(path, opt);
  }
  LoadOptions opt;
  opt.response_col = f.response;
  opt.primary_col = f.primary;
  if (!f.secondary.empty()) opt.secondary_col = f.secondary;
  opt.primary_order = order(f.primary_order);
  opt.secondary_order = order(f.secondary_order);
  return load_long_csv(path, opt);
}

inline LongDataset load_long_fixture(const std::string& name, const std::string& dir = default_fixture_dir()) {
  auto d = load_fixture(name, dir);
  if (auto* p = std::get_if<LongDataset>(&d)) return std::move(*p);
  throw DataError("fixture '" + name + "' holds binomial counts, not long-format data");
}

inline BinomialDataset load_binomial_fixture(const std::string& name, const std::string& dir = default_fixture_dir()) {
  auto d = load_fixture(name, dir);
  if (auto* p = std::get_if<BinomialDataset>(&d)) return std::move(*p);
  throw DataError("fixture '" + name + "' holds long-format data, not binomial counts");
}

}  // namespace jointmct
