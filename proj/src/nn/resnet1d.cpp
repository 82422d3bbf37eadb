#include "metava/nn/resnet1d.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <string>

#include "metava/autodiff/ops.hpp"

namespace metava::nn {

using ad::Tensor;

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (stages == 0 || blocks_per_stage == 0) fail("stages and blocks_per_stage must be positive");
  if (stage_channels.size() != stages)
    fail("stage_channels has " + std::to_string(stage_channels.size()) + " entries, expected " +
         std::to_string(stages));
  if (kernel == 0 || groups == 0 || classes < 2) fail("kernel, groups must be positive, classes >= 2");
  if (stem_channels == 0 || stem_channels % groups != 0)
    fail("stem_channels " + std::to_string(stem_channels) + " not divisible by groups " +
         std::to_string(groups));
  std::size_t prev = stem_channels;
  for (std::size_t c : stage_channels) {
    if (c == 0 || c % groups != 0)
      fail("stage channel count " + std::to_string(c) + " not divisible by groups " +
           std::to_string(groups));
    if (c < prev) fail("stage channel counts must not decrease");
    prev = c;
  }
  for (std::size_t s : downsample_stages)
    if (s < 1 || s > stages) fail("downsample stage " + std::to_string(s) + " out of range");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  const std::size_t factor = std::size_t{1} << downsample_stages.size();
  if (input_length == 0 || input_length % factor != 0)
    fail("input length " + std::to_string(input_length) + " not divisible by downsampling factor " +
         std::to_string(factor));
}

LayerCount count_layers(const ModelConfig& config) {
  return {1 + config.stages * config.blocks_per_stage * 3, 1};
}

namespace {

bool downsamples(const ModelConfig& c, std::size_t stage) {
  return std::find(c.downsample_stages.begin(), c.downsample_stages.end(), stage) !=
         c.downsample_stages.end();
}

std::string block_name(std::size_t stage, std::size_t block) {
  return "stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

}  // namespace

std::vector<std::size_t> stage_lengths(const ModelConfig& config) {
  std::vector<std::size_t> out{config.input_length};
  std::size_t len = config.input_length;
  for (std::size_t s = 1; s <= config.stages; ++s) {
    if (downsamples(config, s)) len = (len + 1) / 2;
    out.push_back(len);
  }
  return out;
}

ad::ParamSet xavier_init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto p = config.precision;
  ad::ParamSet ps;
  auto conv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                  std::size_t groups) {
    const std::size_t in_g = in / groups;
    ps.add(name + ".weight", xavier_uniform({out, in_g, k}, in_g * k, out * k, rng, p));
    ps.add(name + ".bias", Tensor::zeros({out}, p));
  };
  auto bn = [&](const std::string& name, std::size_t ch) {
    ps.add(name + ".gamma", Tensor::ones({ch}, p));
    ps.add(name + ".beta", Tensor::zeros({ch}, p));
    ps.add(name + ".running_mean", Tensor::zeros({ch}, p), false);
    ps.add(name + ".running_var", Tensor::ones({ch}, p), false);
  };

  conv("stem.conv", 1, config.stem_channels, config.kernel, 1);
  bn("stem.bn", config.stem_channels);
  std::size_t in = config.stem_channels;
  for (std::size_t s = 1; s <= config.stages; ++s) {
    const std::size_t out = config.stage_channels[s - 1];
    for (std::size_t b = 1; b <= config.blocks_per_stage; ++b) {
      const std::string name = block_name(s, b);
      bn(name + ".bn1", in);
      conv(name + ".conv1", in, out, 1, 1);
      bn(name + ".bn2", out);
      conv(name + ".conv2", out, out, config.kernel, config.groups);
      bn(name + ".bn3", out);
      conv(name + ".conv3", out, out, 1, 1);
      in = out;
    }
  }
  ps.add("dense.weight", xavier_uniform({in, config.classes}, in, config.classes, rng, p));
  ps.add("dense.bias", Tensor::zeros({config.classes}, p));
  return ps;
}

namespace {

Tensor channel_view(const Tensor& v) { return ad::reshape(v, {1, v.numel(), 1}); }

Tensor conv_layer(const ad::ParamSet& ps, const std::string& name, const Tensor& x,
                  std::size_t stride, std::size_t groups) {
  const Tensor& w = ps[name + ".weight"];
  const auto spec = ad::same_padding(x.shape()[2], w.shape()[2], stride, groups);
  return ad::add(ad::conv1d(x, w, spec), channel_view(ps[name + ".bias"]));
}

class ResNet1d {
 public:
  explicit ResNet1d(ModelConfig c) : c_(std::move(c)) {}

  Tensor forward(const ad::ParamSet& ps, const Tensor& x, ForwardContext& ctx) const {
    if (x.dim() != 3 || x.shape()[1] != 1 || x.shape()[2] != c_.input_length)
      throw ad::ShapeError("resnet1d", {x.shape()},
                           "expected (batch, 1, " + std::to_string(c_.input_length) + ")");
    Tensor h = conv_layer(ps, "stem.conv", x, 1, 1);
    h = swish(batch_norm(ps, "stem.bn", h, ctx));
    for (std::size_t s = 1; s <= c_.stages; ++s)
      for (std::size_t b = 1; b <= c_.blocks_per_stage; ++b)
        h = block(ps, block_name(s, b), h, c_.stage_channels[s - 1],
                  b == 1 && downsamples(c_, s) ? 2 : 1, ctx);
    h = ad::mean_last_axis(h);
    return ad::add(ad::matmul(h, ps["dense.weight"]),
                   ad::reshape(ps["dense.bias"], {1, c_.classes}));
  }

 private:
  Tensor block(const ad::ParamSet& ps, const std::string& name, const Tensor& x,
               std::size_t out_ch, std::size_t stride, ForwardContext& ctx) const {
    Tensor h = preact(ps, name + ".bn1", x, ctx);
    h = conv_layer(ps, name + ".conv1", h, 1, 1);
    h = preact(ps, name + ".bn2", h, ctx);
    h = conv_layer(ps, name + ".conv2", h, stride, c_.groups);
    h = preact(ps, name + ".bn3", h, ctx);
    h = conv_layer(ps, name + ".conv3", h, 1, 1);

    Tensor shortcut = x;
    if (stride > 1) shortcut = ad::max_pool1d(shortcut, stride, stride);
    const std::size_t in_ch = x.shape()[1];
    if (out_ch != in_ch) {
      const std::size_t extra = out_ch - in_ch;
      shortcut = ad::pad_channels(shortcut, extra / 2, extra - extra / 2);
    }
    return ad::add(h, shortcut);
  }

  Tensor preact(const ad::ParamSet& ps, const std::string& bn, const Tensor& x,
                ForwardContext& ctx) const {
    return dropout(swish(batch_norm(ps, bn, x, ctx)), ctx);
  }

  Tensor batch_norm(const ad::ParamSet& ps, const std::string& name, const Tensor& x,
                    ForwardContext& ctx) const {
    const std::size_t ch = x.shape()[1];
    const ad::Shape stat_shape{1, ch, 1};
    Tensor mu, var;
    if (ctx.mode == Mode::train) {
      const double count = static_cast<double>(x.shape()[0] * x.shape()[2]);
      mu = ad::mul(ad::sum_to(x, stat_shape), 1.0 / count);
      const Tensor centered = ad::sub(x, mu);
      var = ad::mul(ad::sum_to(ad::mul(centered, centered), stat_shape), 1.0 / count);
      if (ctx.stats) update_running(*ctx.stats, name, mu, var, count, ctx.stats_momentum);
    } else {
      mu = channel_view(ps[name + ".running_mean"]);
      var = channel_view(ps[name + ".running_var"]);
    }
    const Tensor inv_std = ad::pow(ad::add(var, c_.bn_eps), -0.5);
    const Tensor normed = ad::mul(ad::sub(x, mu), inv_std);
    return ad::add(ad::mul(normed, channel_view(ps[name + ".gamma"])),
                   channel_view(ps[name + ".beta"]));
  }

  void update_running(ad::ParamSet& stats, const std::string& name, const Tensor& mu,
                      const Tensor& var, double count, double momentum) const {
    const double m = momentum < 0 ? c_.bn_momentum : momentum;
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    const auto& rm = stats[name + ".running_mean"];
    const auto& rv = stats[name + ".running_var"];
    std::vector<double> nm(rm.numel()), nv(rv.numel());
    for (std::size_t i = 0; i < nm.size(); ++i) {
      nm[i] = (1 - m) * rm[i] + m * mu[i];
      nv[i] = (1 - m) * rv[i] + m * var[i] * unbias;
    }
    stats.set(name + ".running_mean", Tensor::from_values(rm.shape(), std::move(nm), rm.precision()));
    stats.set(name + ".running_var", Tensor::from_values(rv.shape(), std::move(nv), rv.precision()));
  }

  Tensor dropout(const Tensor& x, ForwardContext& ctx) const {
    if (ctx.mode != Mode::train || !ctx.dropout_rng || c_.dropout <= 0.0) return x;
    const double keep = 1.0 - c_.dropout;
    std::vector<double> mask(x.numel());
    for (auto& v : mask) v = ctx.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    return ad::mul(x, Tensor::from_values(x.shape(), std::move(mask), ad::Precision::f64));
  }

  ModelConfig c_;
};

}  // namespace

Network build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Network net;
  net.params = xavier_init(config, seed);
  auto impl = std::make_shared<const ResNet1d>(config);
  net.forward = [impl](const ad::ParamSet& ps, const Tensor& x, ForwardContext& ctx) {
    return impl->forward(ps, x, ctx);
  };
  net.input_length = config.input_length;
  net.classes = config.classes;
  return net;
}

Network tiny_model(std::uint64_t seed, const TinyConfig& c) {
  if (c.input_length == 0 || c.channels == 0 || c.kernel == 0 || c.stride == 0 || c.classes < 2)
    throw std::invalid_argument("tiny model config: all sizes must be positive");
  Rng rng(seed);
  Network net;
  net.params.add("conv.weight", xavier_uniform({c.channels, 1, c.kernel}, c.kernel,
                                               c.channels * c.kernel, rng, c.precision));
  net.params.add("conv.bias", Tensor::zeros({c.channels}, c.precision));
  net.params.add("dense.weight",
                 xavier_uniform({c.channels, c.classes}, c.channels, c.classes, rng, c.precision));
  net.params.add("dense.bias", Tensor::zeros({c.classes}, c.precision));
  net.input_length = c.input_length;
  net.classes = c.classes;
  net.forward = [c](const ad::ParamSet& ps, const Tensor& x, ForwardContext&) {
    if (x.dim() != 3 || x.shape()[1] != 1 || x.shape()[2] != c.input_length)
      throw ad::ShapeError("tiny_model", {x.shape()},
                           "expected (batch, 1, " + std::to_string(c.input_length) + ")");
    Tensor h = swish(conv_layer(ps, "conv", x, c.stride, 1));
    h = ad::mean_last_axis(h);
    return ad::add(ad::matmul(h, ps["dense.weight"]), ad::reshape(ps["dense.bias"], {1, c.classes}));
  };
  return net;
}

}  // namespace metava::nn
