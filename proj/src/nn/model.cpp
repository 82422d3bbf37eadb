#include "metava/nn/model.hpp"

#include <cmath>

#include "metava/autodiff/ops.hpp"

namespace metava::nn {

ad::Tensor swish(const ad::Tensor& x) { return ad::mul(x, ad::sigmoid(x)); }

ad::Tensor xavier_uniform(const ad::Shape& shape, std::size_t fan_in, std::size_t fan_out,
                          Rng& rng, ad::Precision precision) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return ad::Tensor::from_values(shape, std::move(v), precision);
}

ad::Tensor batch_loss(const Network& net, const ad::ParamSet& params, const Batch& batch,
                      ForwardContext& ctx) {
  return ad::cross_entropy(net.forward(params, batch.inputs, ctx), batch.labels);
}

ad::ParamSet calibrate_batch_norm(const Network& net, const ad::ParamSet& params,
                                  const ad::Tensor& inputs) {
  ad::NoGradGuard guard;
  ad::ParamSet out = params;
  ForwardContext ctx{Mode::train, nullptr, &out, 1.0};
  net.forward(params, inputs, ctx);
  return out;
}

std::vector<double> positive_scores(const Network& net, const ad::ParamSet& params,
                                    const ad::Tensor& inputs) {
  ad::NoGradGuard guard;
  ForwardContext ctx;
  const ad::Tensor logits = net.forward(params, inputs, ctx);
  const std::size_t rows = logits.shape()[0];
  const std::size_t classes = logits.shape()[1];
  const ad::Tensor logp = ad::log_softmax(logits);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = std::exp(logp[r * classes + 1]);
  return out;
}

}  // namespace metava::nn
