#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fluxsolve/dataset.hpp"
#include "fluxsolve/fvm.hpp"
#include "fluxsolve/model.hpp"
#include "fluxsolve/tensor.hpp"

namespace fluxsolve {

using States = std::vector<std::vector<double>>;

// Mean squared error over steps 1..T and all cells; states[0] is excluded.
double mse(const States& pred, const States& truth);
// Same on a tape: `pred` holds the T predicted columns, `truth` all T + 1 states.
ad::Tensor mse_loss(const std::vector<ad::Tensor>& pred, const States& truth);

// sum_{t >= 1} dt |sum_i V_i (u_i(t) - u_i(0))|; with `signed_sum` the
// absolute value is dropped.
double conservation_error(const Mesh& mesh, const States& states, double dt, bool signed_sum = false);

struct SampleMetrics {
  std::uint64_t seed = 0;
  double mse = 0.0;
  double cons_err = 0.0;
};

struct EvalResult {
  std::string method;
  std::string dataset;
  double mse = 0.0, mse_sem = 0.0;
  double cons_err = 0.0, cons_err_sem = 0.0;
  double wall_s = 0.0;
  std::vector<SampleMetrics> per_sample;
};

// Mean and standard error of the mean (0 for fewer than two values).
std::pair<double, double> mean_sem(const std::vector<double>& v);

EvalResult evaluate_fvm(Scheme scheme, const Dataset& data);
EvalResult evaluate_model(FluxGNNModel& model, const Dataset& data, const std::string& method = "fluxgnn");

// Header method,dataset,mse,mse_sem,cons_err,cons_err_sem,wall_s
std::string metrics_csv(const std::vector<EvalResult>& rows);
nlohmann::json eval_to_json(const EvalResult& r);

}  // namespace fluxsolve
