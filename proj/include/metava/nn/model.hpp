#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metava/autodiff/param_set.hpp"
#include "metava/autodiff/tensor.hpp"
#include "metava/util/rng.hpp"

namespace metava::nn {

enum class Mode { train, eval };

// Per-call forward state. In train mode batch-norm normalizes with batch
// statistics and, when `stats` is set, folds them into the running
// statistics stored there; dropout is applied only when `dropout_rng` is set.
// Eval mode is deterministic.
struct ForwardContext {
  Mode mode = Mode::eval;
  Rng* dropout_rng = nullptr;
  ad::ParamSet* stats = nullptr;
  // Running-statistic momentum; negative means the model default.
  double stats_momentum = -1.0;
};

using ForwardFn =
    std::function<ad::Tensor(const ad::ParamSet&, const ad::Tensor& input, ForwardContext&)>;

struct Network {
  ad::ParamSet params;
  ForwardFn forward;
  std::size_t input_length = 0;
  std::size_t classes = 2;
};

// Labeled mini-batch: inputs (batch, 1, length) and one class per row.
struct Batch {
  ad::Tensor inputs;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

ad::Tensor swish(const ad::Tensor& x);

// Uniform Xavier draw: variance 2 / (fan_in + fan_out).
ad::Tensor xavier_uniform(const ad::Shape& shape, std::size_t fan_in, std::size_t fan_out,
                          Rng& rng, ad::Precision precision = ad::Precision::f32);

// Mean cross-entropy of the network on a batch.
ad::Tensor batch_loss(const Network& net, const ad::ParamSet& params, const Batch& batch,
                      ForwardContext& ctx);
// Copy of params whose batch-norm running statistics equal the statistics of
// `inputs` (momentum 1, no dropout). Models without batch-norm are unchanged.
ad::ParamSet calibrate_batch_norm(const Network& net, const ad::ParamSet& params,
                                  const ad::Tensor& inputs);
// Softmax probability of class 1 per row, in eval mode.
std::vector<double> positive_scores(const Network& net, const ad::ParamSet& params,
                                    const ad::Tensor& inputs);

}  // namespace metava::nn
