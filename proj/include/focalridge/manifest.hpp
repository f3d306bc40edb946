#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

namespace focalridge {

// Everything needed to rerun a CLI invocation and check that its inputs have
// not changed since: the subcommand, its fully-resolved options, and a
// SHA-256 digest of every input file.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::string> input_digests;  // path -> hex SHA-256
  std::uint64_t seed = 0;
  std::string library_version;
  std::string rng;
  std::string timestamp_utc;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  void write_file(const std::string& path) const;
  static RunManifest read_file(const std::string& path);
};

// Streaming SHA-256 of a file's bytes, as lowercase hex. Throws
// IngestionError if the file cannot be read.
std::string sha256_file_hex(const std::string& path);

// Current time as an ISO-8601 UTC timestamp ("2026-01-30T12:34:56Z").
std::string current_utc_timestamp();

}  // namespace focalridge
