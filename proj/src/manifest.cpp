#include "fluxsolve/manifest.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cstdio>

#include "fluxsolve/common.hpp"
#include "fluxsolve/json_io.hpp"

namespace fluxsolve {

namespace {

std::string sha1_hex(const std::string& data) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::string out;
  char buf[3];
  for (unsigned char b : digest) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  return out;
}

}  // namespace

std::string git_blob_sha1(const std::string& bytes) {
  std::string obj = "blob " + std::to_string(bytes.size());
  obj.push_back('\0');
  obj += bytes;
  return sha1_hex(obj);
}

std::string hash_inputs(const std::vector<std::filesystem::path>& files) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& f : files) {
    if (!std::filesystem::is_regular_file(f)) throw ConfigError("input file not found: " + f.string());
    entries.emplace_back(f.filename().string(), git_blob_sha1(json_io::read_text(f)));
  }
  std::sort(entries.begin(), entries.end());
  std::string listing;
  for (const auto& [name, id] : entries) listing += id + " " + name + "\n";
  return git_blob_sha1(listing);
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command}, {"config", config},   {"seeds", seeds},
          {"input_hash", input_hash}, {"outputs", outputs}, {"wall_s", wall_s}};
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  json_io::write_file(dir / "manifest.json", m.to_json());
}

}  // namespace fluxsolve
