#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxsolve/mesh.hpp"

namespace fluxsolve {

struct DatasetConfig {
  std::size_t n_train = 100;
  std::size_t n_val = 10;
  std::size_t n_test = 10;
  std::uint64_t seed = 0;
  double dx = 0.1;
  double dt = 0.1;
  double t_max = 1.0;
  double diffusion = 1e-4;
  double c_min = 0.0, c_max = 0.2;
  double amp_min = 0.5, amp_max = 1.0;
  double x0_min = 0.0, x0_max = 1.0;
  // Draw the sign of c at random as well; off by default.
  bool signed_velocity = false;
};

struct Sample {
  std::uint64_t seed = 0;
  double c = 0.0;
  double D = 0.0;
  double u_amp = 0.0;
  double x0 = 0.0;
  // Exact solution at cell centroids for t = 0, dt, ..., t_max.
  std::vector<std::vector<double>> states;
};

struct Dataset {
  std::string split;
  Mesh mesh;
  double dt = 0.0;
  std::vector<Sample> samples;
};

struct DatasetSplits {
  Dataset train, val, test;
};

// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::uint64_t bits);

// Seed of sample `index` in split `split` (0 train, 1 val, 2 test).
std::uint64_t sample_seed(std::uint64_t base, std::uint64_t split, std::uint64_t index);

Sample make_sample(const Mesh& mesh, const DatasetConfig& cfg, std::uint64_t seed);

// Periodic unit interval with cfg.dx spacing; throws ConfigError when a split
// count is zero or the grid parameters are invalid.
DatasetSplits generate_dataset(const DatasetConfig& cfg);

nlohmann::json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);

// train.json, val.json and test.json inside `dir`.
void write_dataset(const std::filesystem::path& dir, const DatasetSplits& splits);
Dataset read_split(const std::filesystem::path& dir, const std::string& split);
DatasetSplits read_dataset(const std::filesystem::path& dir);

}  // namespace fluxsolve
