#include "gwhp/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include "gwhp/error.hpp"
#include "gwhp/surrogate.hpp"

namespace gwhp {

std::string RunManifest::config_hash() const {
  const std::string dump = config.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(std::span(
                    reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()))));
  return buf;
}

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"command", m.command},
                     {"arguments", m.arguments},
                     {"config", m.config},
                     {"config_hash", m.config_hash()},
                     {"seeds", m.seeds},
                     {"inputs", m.inputs},
                     {"outputs", m.outputs},
                     {"timings_seconds", m.timings_seconds},
                     {"started_utc", m.started_utc},
                     {"version", version_string()}};
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << nlohmann::json(manifest).dump(2) << '\n';
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string version_string() { return std::string(GWHP_VERSION) + "+" + GWHP_GIT_REV; }

}  // namespace gwhp
