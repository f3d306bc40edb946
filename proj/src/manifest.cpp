#include "focalridge/manifest.hpp"

#include <array>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "focalridge/errors.hpp"

namespace focalridge {

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{
      {"command", command},          {"config", config},
      {"input_digests", input_digests}, {"seed", seed},
      {"library_version", library_version}, {"rng", rng},
      {"timestamp_utc", timestamp_utc},
  };
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest manifest;
  manifest.command = j.at("command").get<std::string>();
  manifest.config = j.at("config");
  manifest.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
  manifest.seed = j.at("seed").get<std::uint64_t>();
  manifest.library_version = j.at("library_version").get<std::string>();
  manifest.rng = j.at("rng").get<std::string>();
  manifest.timestamp_utc = j.at("timestamp_utc").get<std::string>();
  return manifest;
}

void RunManifest::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IngestionError("cannot open '" + path + "' for writing");
  }
  out << to_json().dump(2) << '\n';
  if (!out) {
    throw IngestionError("failed while writing '" + path + "'");
  }
}

RunManifest RunManifest::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot open manifest '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("manifest '" + path + "' is missing required fields: " + e.what());
  }
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestionError("cannot open '" + path + "' for digesting");
  }
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 context initialization failed");
  }
  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const std::streamsize got = in.gcount();
    if (got > 0 &&
        EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(got)) != 1) {
      throw Error("SHA-256 update failed");
    }
  }
  if (in.bad()) {
    throw IngestionError("read error while digesting '" + path + "'");
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int length = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw Error("SHA-256 finalization failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  static const char* kDigits = "0123456789abcdef";
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 0xF]);
  }
  return hex;
}

std::string current_utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char text[32];
  std::strftime(text, sizeof text, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return text;
}

}  // namespace focalridge
