#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace cpmi {

// Reproducibility record for one run.
//
// `identity` holds everything that determines the output bytes (provider
// descriptor, separator, ll_mode, scorer, registry and dataset hashes,
// config snapshot) and is the only part hashed. `run` holds per-invocation
// facts (command line, timestamps, cache counters, job count) that must not
// change the outputs.
struct RunManifest {
  nlohmann::ordered_json identity = nlohmann::ordered_json::object();
  nlohmann::ordered_json run = nlohmann::ordered_json::object();

  std::string hash() const;
  // {"manifest_hash", "identity", "run"}, pretty-printed.
  std::string to_json() const;
};

// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace cpmi
