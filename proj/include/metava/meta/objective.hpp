#pragma once

// What the training loops need from a model: a differentiable loss on a
// batch, an evaluation loss, optional batch-norm calibration and scores.
// The scalar toys used in tests implement the same interface.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metava/autodiff/param_set.hpp"
#include "metava/data/dataset.hpp"
#include "metava/nn/model.hpp"

namespace metava::meta {

struct Objective {
  // Training-mode loss. Equal `stream` values give equal dropout masks.
  std::function<ad::Tensor(const ad::ParamSet&, const nn::Batch&, std::uint64_t stream)> loss;
  // Deterministic evaluation-mode loss.
  std::function<ad::Tensor(const ad::ParamSet&, const nn::Batch&)> eval_loss;
  // Returns params whose running statistics are re-estimated on `reference`
  // (identity when empty).
  std::function<ad::ParamSet(const ad::ParamSet&, const nn::Batch&)> calibrate;
  // Positive-class scores for evaluation.
  std::function<std::vector<double>(const ad::ParamSet&, const ad::Tensor&)> scores;

  ad::ParamSet calibrated(const ad::ParamSet& params, const nn::Batch& reference) const {
    return calibrate ? calibrate(params, reference) : params;
  }
};

Objective network_objective(const nn::Network& net, bool dropout = true);

// Mean evaluation loss over the given segments, evaluated in chunks.
double mean_eval_loss(const Objective& objective, const ad::ParamSet& params,
                      const data::TaskDataset& task, std::span<const std::size_t> indices,
                      std::size_t chunk = 256);

// Positive-class scores for the given segments, in order.
std::vector<double> score_segments(const Objective& objective, const ad::ParamSet& params,
                                   const data::TaskDataset& task,
                                   std::span<const std::size_t> indices, std::size_t chunk = 256);

// Raised when a loss becomes NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& where, std::size_t iteration, const std::string& task)
      : std::runtime_error("non-finite loss in " + where + " at iteration " +
                           std::to_string(iteration) + (task.empty() ? "" : ", task " + task)),
        iteration(iteration),
        task(task) {}
  std::size_t iteration;
  std::string task;
};

}  // namespace metava::meta
