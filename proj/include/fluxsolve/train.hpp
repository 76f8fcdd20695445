#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fluxsolve/dataset.hpp"
#include "fluxsolve/model.hpp"

namespace fluxsolve {

struct TrainConfig {
  std::size_t epochs = 40;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  // Write checkpoint_epoch_N.json every this many epochs (0 disables).
  std::size_t checkpoint_every = 0;
  // Training stops after the first epoch that ends past this budget.
  double time_budget_s = 1800.0;
  // If the training loss is not strictly decreasing over this many epochs,
  // restart once from the initial weights at half the learning rate.
  std::size_t monotone_epochs = 5;
  bool allow_lr_retry = true;
  std::optional<std::filesystem::path> out_dir;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  FluxGNNModel best;
  FluxGNNModel last;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  double lr = 0.0;
  bool lr_retried = false;
  bool budget_exhausted = false;
};

// Max abs difference between a unit-gate copy of `model` and the blended FVM
// scheme over `steps` steps on the first sample of `data`.
double identity_gate_residual(const FluxGNNModel& model, const Dataset& data, std::size_t steps = 10);

// Loss of one sample's full rollout; gradients land in the model parameters.
double train_sample_loss(FluxGNNModel& model, const Dataset& data, const Sample& s, bool backward);

TrainResult train(const FluxGNNModel& init, const DatasetSplits& data, const TrainConfig& cfg);

// Header epoch,train_loss,val_mse,lr,wall_s
std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace fluxsolve
