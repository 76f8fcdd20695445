#include "fluxsolve/dataset.hpp"

#include <cmath>
#include <random>

#include "fluxsolve/exact.hpp"
#include "fluxsolve/fvm.hpp"
#include "fluxsolve/json_io.hpp"

namespace fluxsolve {

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint64_t sample_seed(std::uint64_t base, std::uint64_t split, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

Sample make_sample(const Mesh& mesh, const DatasetConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng()); };
  Sample s;
  s.seed = seed;
  s.c = draw(cfg.c_min, cfg.c_max);
  s.u_amp = draw(cfg.amp_min, cfg.amp_max);
  s.x0 = draw(cfg.x0_min, cfg.x0_max);
  if (cfg.signed_velocity && uniform01(rng()) < 0.5) s.c = -s.c;
  s.D = cfg.diffusion;
  const std::size_t steps = step_count(cfg.t_max, cfg.dt);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    std::vector<double> u(mesh.n_cells());
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] = exact_solution(t, mesh.cell_centroids[i][0], s.c, s.D, s.u_amp, s.x0);
    s.states.push_back(std::move(u));
  }
  return s;
}

DatasetSplits generate_dataset(const DatasetConfig& cfg) {
  if (cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0)
    throw ConfigError("every split needs at least one sample");
  if (!(cfg.dx > 0.0) || !(cfg.dt > 0.0)) throw ConfigError("dx and dt must be positive");
  if (cfg.diffusion < 0.0) throw ConfigError("diffusion coefficient must be >= 0");
  if (cfg.c_min > cfg.c_max || cfg.amp_min > cfg.amp_max || cfg.x0_min > cfg.x0_max)
    throw ConfigError("parameter range with lower bound above upper bound");
  const double cells = 1.0 / cfg.dx;
  const auto n = static_cast<std::size_t>(std::llround(cells));
  if (std::abs(cells - static_cast<double>(n)) > 1e-9 * cells)
    throw ConfigError("dx must divide the unit interval");
  step_count(cfg.t_max, cfg.dt);
  const Mesh mesh = build_interval_mesh(n, 1.0, IntervalBoundary::make_periodic());

  DatasetSplits out;
  Dataset* splits[3] = {&out.train, &out.val, &out.test};
  const char* names[3] = {"train", "val", "test"};
  const std::size_t counts[3] = {cfg.n_train, cfg.n_val, cfg.n_test};
  for (std::size_t s = 0; s < 3; ++s) {
    Dataset& d = *splits[s];
    d.split = names[s];
    d.mesh = mesh;
    d.dt = cfg.dt;
    d.samples.resize(counts[s]);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < counts[s]; ++i)
      d.samples[i] = make_sample(mesh, cfg, sample_seed(cfg.seed, s, i));
  }
  return out;
}

nlohmann::json dataset_to_json(const Dataset& d) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : d.samples)
    samples.push_back({{"seed", s.seed}, {"c", s.c}, {"D", s.D}, {"u_amp", s.u_amp}, {"x0", s.x0},
                       {"states", s.states}});
  return {{"split", d.split}, {"mesh", mesh_to_json(d.mesh)}, {"dt", d.dt}, {"samples", samples}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset d;
  try {
    d.split = j.at("split").get<std::string>();
    d.mesh = mesh_from_json(j.at("mesh"));
    d.dt = j.at("dt").get<double>();
    for (const auto& s : j.at("samples")) {
      Sample x;
      x.seed = s.at("seed").get<std::uint64_t>();
      x.c = s.at("c").get<double>();
      x.D = s.at("D").get<double>();
      x.u_amp = s.at("u_amp").get<double>();
      x.x0 = s.at("x0").get<double>();
      x.states = s.at("states").get<std::vector<std::vector<double>>>();
      d.samples.push_back(std::move(x));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("dataset: ") + e.what());
  }
  if (!(d.dt > 0.0)) throw CorruptionError("dataset: non-positive time step");
  for (const auto& s : d.samples) {
    if (s.states.empty()) throw CorruptionError("dataset: sample without states");
    for (const auto& st : s.states)
      if (st.size() != d.mesh.n_cells()) throw CorruptionError("dataset: state length does not match mesh");
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplits& splits) {
  for (const Dataset* d : {&splits.train, &splits.val, &splits.test})
    json_io::write_file(dir / (d->split + ".json"), dataset_to_json(*d));
}

Dataset read_split(const std::filesystem::path& dir, const std::string& split) {
  const auto path = dir / (split + ".json");
  if (!std::filesystem::exists(path)) throw ConfigError("dataset file not found: " + path.string());
  return dataset_from_json(json_io::read_file(path));
}

DatasetSplits read_dataset(const std::filesystem::path& dir) {
  return {read_split(dir, "train"), read_split(dir, "val"), read_split(dir, "test")};
}

}  // namespace fluxsolve
