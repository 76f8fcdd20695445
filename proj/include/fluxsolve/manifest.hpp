#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fluxsolve {

// SHA-1 of "blob <size>\0<bytes>", hex encoded (the git object id of the content).
std::string git_blob_sha1(const std::string& bytes);

// Hash over the blob ids of the given files (each listed as "<id> <file name>\n",
// sorted by file name); missing files raise ConfigError.
std::string hash_inputs(const std::vector<std::filesystem::path>& files);

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  std::string input_hash;
  std::vector<std::string> outputs;
  double wall_s = 0.0;

  nlohmann::json to_json() const;
};

// Writes `dir`/manifest.json, replacing any previous manifest.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace fluxsolve
