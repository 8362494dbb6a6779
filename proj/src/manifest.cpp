#include "cpmi/manifest.hpp"

#include <chrono>
#include <ctime>

#include "cpmi/hash.hpp"

namespace cpmi {

std::string RunManifest::hash() const { return sha256_hex(identity.dump()); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json root;
  root["manifest_hash"] = hash();
  root["identity"] = identity;
  root["run"] = run;
  return root.dump(2) + "\n";
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

}  // namespace cpmi
