#include "metava/meta/objective.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include "metava/autodiff/ops.hpp"

namespace metava::meta {

Objective network_objective(const nn::Network& net, bool dropout) {
  auto shared = std::make_shared<const nn::Network>(net);
  Objective o;
  o.loss = [shared, dropout](const ad::ParamSet& ps, const nn::Batch& b, std::uint64_t stream) {
    Rng rng(stream);
    nn::ForwardContext ctx{nn::Mode::train, dropout ? &rng : nullptr, nullptr};
    return nn::batch_loss(*shared, ps, b, ctx);
  };
  o.eval_loss = [shared](const ad::ParamSet& ps, const nn::Batch& b) {
    nn::ForwardContext ctx;
    return nn::batch_loss(*shared, ps, b, ctx);
  };
  o.calibrate = [shared](const ad::ParamSet& ps, const nn::Batch& b) {
    return nn::calibrate_batch_norm(*shared, ps, b.inputs);
  };
  o.scores = [shared](const ad::ParamSet& ps, const ad::Tensor& x) {
    return nn::positive_scores(*shared, ps, x);
  };
  return o;
}

double mean_eval_loss(const Objective& objective, const ad::ParamSet& params,
                      const data::TaskDataset& task, std::span<const std::size_t> indices,
                      std::size_t chunk) {
  if (indices.empty()) throw std::invalid_argument("mean_eval_loss: no segments");
  ad::NoGradGuard guard;
  double total = 0.0;
  for (std::size_t i = 0; i < indices.size(); i += chunk) {
    const auto part = indices.subspan(i, std::min(chunk, indices.size() - i));
    total += objective.eval_loss(params, data::make_batch(task, part)).item() *
             static_cast<double>(part.size());
  }
  return total / static_cast<double>(indices.size());
}

std::vector<double> score_segments(const Objective& objective, const ad::ParamSet& params,
                                   const data::TaskDataset& task,
                                   std::span<const std::size_t> indices, std::size_t chunk) {
  if (!objective.scores) throw std::logic_error("objective provides no scores");
  ad::NoGradGuard guard;
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); i += chunk) {
    const auto part = indices.subspan(i, std::min(chunk, indices.size() - i));
    const auto s = objective.scores(params, data::make_batch(task, part).inputs);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace metava::meta
