#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fluxsolve/dataset.hpp"
#include "fluxsolve/exact.hpp"
#include "fluxsolve/metrics.hpp"
#include "fluxsolve/train.hpp"

using namespace fluxsolve;

namespace {

DatasetConfig small_config(std::uint64_t seed = 3) {
  DatasetConfig cfg;
  cfg.seed = seed;
  cfg.n_train = 6;
  cfg.n_val = 2;
  cfg.n_test = 2;
  return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fluxsolve_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Dataset, UniformDrawAndSeeds) {
  EXPECT_EQ(uniform01(0), 0.0);
  EXPECT_LT(uniform01(~0ULL), 1.0);
  EXPECT_DOUBLE_EQ(uniform01(1ULL << 63), 0.5);
  EXPECT_NE(sample_seed(0, 0, 0), sample_seed(0, 0, 1));
  EXPECT_NE(sample_seed(0, 0, 0), sample_seed(0, 1, 0));
  EXPECT_NE(sample_seed(0, 0, 0), sample_seed(1, 0, 0));
  EXPECT_EQ(sample_seed(5, 2, 7), sample_seed(5, 2, 7));
}

TEST(Dataset, DeterministicWithinRanges) {
  const auto a = generate_dataset(small_config());
  const auto b = generate_dataset(small_config());
  EXPECT_EQ(dataset_to_json(a.train), dataset_to_json(b.train));
  EXPECT_NE(dataset_to_json(a.train), dataset_to_json(generate_dataset(small_config(4)).train));
  ASSERT_EQ(a.train.samples.size(), 6u);
  EXPECT_EQ(a.val.samples.size(), 2u);
  EXPECT_EQ(a.test.samples.size(), 2u);
  EXPECT_EQ(a.train.mesh.n_cells(), 10u);
  for (const auto& s : a.train.samples) {
    EXPECT_GE(s.c, 0.0);
    EXPECT_LE(s.c, 0.2);
    EXPECT_GE(s.u_amp, 0.5);
    EXPECT_LE(s.u_amp, 1.0);
    EXPECT_GE(s.x0, 0.0);
    EXPECT_LE(s.x0, 1.0);
    EXPECT_EQ(s.D, 1e-4);
    ASSERT_EQ(s.states.size(), 11u);
    for (std::size_t t = 0; t < 11; ++t)
      for (std::size_t i = 0; i < 10; ++i)
        EXPECT_NEAR(s.states[t][i],
                    exact_solution(0.1 * t, a.train.mesh.cell_centroids[i][0], s.c, s.D, s.u_amp, s.x0), 1e-14);
  }
}

TEST(Dataset, ConfigErrors) {
  auto cfg = small_config();
  cfg.n_train = 0;
  EXPECT_THROW(generate_dataset(cfg), ConfigError);
  cfg = small_config();
  cfg.dx = 0.3;
  EXPECT_THROW(generate_dataset(cfg), ConfigError);
  cfg = small_config();
  cfg.c_min = 1.0;
  EXPECT_THROW(generate_dataset(cfg), ConfigError);
}

TEST(Dataset, FileRoundTrip) {
  const auto dir = temp_dir("dataset");
  const auto d = generate_dataset(small_config());
  write_dataset(dir, d);
  const auto back = read_dataset(dir);
  EXPECT_EQ(dataset_to_json(back.test), dataset_to_json(d.test));
  EXPECT_EQ(back.train.samples[0].states, d.train.samples[0].states);
  EXPECT_THROW(read_split(dir, "missing"), ConfigError);
  auto j = dataset_to_json(d.val);
  j.erase("samples");
  EXPECT_THROW(dataset_from_json(j), CorruptionError);
  std::filesystem::remove_all(dir);
}

TEST(Metrics, MseExamples) {
  const States truth{{5.0, 5.0}, {1.0, 2.0}, {3.0, 4.0}};
  States pred = truth;
  pred[0] = {100.0, -100.0};  // t = 0 is not scored
  EXPECT_EQ(mse(pred, truth), 0.0);
  for (std::size_t t = 1; t < 3; ++t)
    for (double& v : pred[t]) v += 0.25;
  EXPECT_DOUBLE_EQ(mse(pred, truth), 0.0625);
  EXPECT_THROW(mse({{1.0}}, {{1.0}}), std::invalid_argument);
}

TEST(Metrics, ConservationExamples) {
  const Mesh mesh = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  States s(11, std::vector<double>(10, 0.3));
  EXPECT_EQ(conservation_error(mesh, s, 0.1), 0.0);
  const double eps = 1e-3;
  for (std::size_t t = 5; t < 11; ++t)
    for (double& v : s[t]) v += eps;
  EXPECT_NEAR(conservation_error(mesh, s, 0.1), 0.6 * eps, 1e-15);
  for (std::size_t t = 5; t < 11; ++t)
    for (double& v : s[t]) v -= 2.0 * eps;
  EXPECT_NEAR(conservation_error(mesh, s, 0.1), 0.6 * eps, 1e-15);
  EXPECT_NEAR(conservation_error(mesh, s, 0.1, true), -0.6 * eps, 1e-15);
}

TEST(Metrics, MeanSem) {
  const auto [m, s] = mean_sem({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(mean_sem({7.0}).second, 0.0);
}

TEST(Metrics, FvmBaselineAndCsv) {
  const auto d = generate_dataset(small_config());
  const auto r = evaluate_fvm(Scheme::Blended, d.test);
  EXPECT_EQ(r.method, "fvm_blended");
  EXPECT_EQ(r.per_sample.size(), 2u);
  EXPECT_GT(r.mse, 0.0);
  EXPECT_LE(r.cons_err, 1e-10);
  const auto csv = metrics_csv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,dataset,mse,mse_sem,cons_err,cons_err_sem,wall_s");
  EXPECT_EQ(eval_to_json(r)["method"], "fvm_blended");
}

TEST(Train, IdentityGateSanity) {
  const auto d = generate_dataset(small_config());
  EXPECT_LE(identity_gate_residual(FluxGNNModel::init({}, 1), d.train), 1e-12);
}

TEST(Train, ShortRunImproves) {
  const auto d = generate_dataset(small_config());
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 9;
  const auto init = FluxGNNModel::init({}, 9);
  const auto r = train(init, d, cfg);
  ASSERT_EQ(r.log.size(), 4u);
  EXPECT_EQ(r.log[0].epoch, 0u);
  EXPECT_LT(r.log.back().train_loss, r.log[0].train_loss);
  EXPECT_LE(r.best_val_mse, r.log[0].val_mse);
  EXPECT_LE(r.best.decoder_identity_error(), 1e-10);
  const auto csv = training_log_csv(r.log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_mse,lr,wall_s");

  const auto again = train(init, d, cfg);
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    EXPECT_EQ(again.log[e].train_loss, r.log[e].train_loss);
    EXPECT_EQ(again.log[e].val_mse, r.log[e].val_mse);
  }
}

TEST(Train, ConfigErrors) {
  const auto d = generate_dataset(small_config());
  const auto init = FluxGNNModel::init({}, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(init, d, cfg), ConfigError);
  cfg.epochs = 1;
  cfg.lr = 0.0;
  EXPECT_THROW(train(init, d, cfg), ConfigError);
  auto empty = d;
  empty.val.samples.clear();
  cfg.lr = 1e-3;
  EXPECT_THROW(train(init, empty, cfg), ConfigError);
}
