#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gwhp {

/// Record of one CLI invocation, written next to its artifacts.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings_seconds;
  std::string started_utc;

  /// FNV-1a of the canonical (key-sorted) config dump, as hex.
  [[nodiscard]] std::string config_hash() const;
};

void to_json(nlohmann::json& j, const RunManifest& m);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

/// Current UTC time as an ISO-8601 string.
std::string utc_timestamp();

std::string version_string();

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace gwhp
