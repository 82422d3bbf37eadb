#pragma once

// One-dimensional grouped-convolution residual classifier.
//
// Stem: conv(1 -> stem_channels, kernel) then BN and Swish. Each stage holds
// `blocks_per_stage` bottleneck blocks; a block is three pre-activated
// convolutions (BN -> Swish -> Dropout -> Conv): kernel 1, grouped `kernel`,
// kernel 1, plus an identity shortcut. The first block of every listed
// downsample stage halves the length in its grouped convolution and
// max-pools the shortcut; channel growth zero-pads the shortcut. The head
// averages over time and applies a dense layer.

#include <cstdint>
#include <vector>

#include "metava/nn/model.hpp"

namespace metava::nn {

struct ModelConfig {
  std::size_t stages = 7;
  std::size_t blocks_per_stage = 2;
  std::size_t stem_channels = 16;
  std::vector<std::size_t> stage_channels{16, 32, 32, 64, 64, 128, 128};
  std::size_t kernel = 16;
  std::size_t groups = 16;
  double dropout = 0.5;
  // 1-based stage numbers.
  std::vector<std::size_t> downsample_stages{2, 4, 6};
  std::size_t input_length = 400;
  std::size_t classes = 2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  ad::Precision precision = ad::Precision::f32;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct LayerCount {
  std::size_t convolutions = 0;
  std::size_t dense = 0;
  std::size_t total() const { return convolutions + dense; }
};

LayerCount count_layers(const ModelConfig& config);

// Temporal length after the stem and after each stage.
std::vector<std::size_t> stage_lengths(const ModelConfig& config);

ad::ParamSet xavier_init(const ModelConfig& config, std::uint64_t seed);

Network build_model(const ModelConfig& config, std::uint64_t seed);

// Oracle-scale network: one same-padded convolution, Swish, temporal mean,
// dense layer. No batch-norm or dropout, so train and eval agree.
struct TinyConfig {
  std::size_t input_length = 16;
  std::size_t channels = 4;
  std::size_t kernel = 5;
  std::size_t stride = 1;
  std::size_t classes = 2;
  ad::Precision precision = ad::Precision::f32;
};

Network tiny_model(std::uint64_t seed, const TinyConfig& config = {});

}  // namespace metava::nn
