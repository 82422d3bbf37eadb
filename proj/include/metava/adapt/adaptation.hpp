#pragma once

// Adapting pre-trained weights to a new subject: pre-fine-tuning followed by
// plain fine-tuning, with hyperparameters chosen on a held-out validation
// split.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metava/autodiff/param_set.hpp"
#include "metava/data/dataset.hpp"
#include "metava/eval/metrics.hpp"
#include "metava/meta/objective.hpp"

namespace metava::adapt {

// literal:    theta0 <- theta'' - beta2 * grad L(theta'')
// meta_style: theta0 <- theta0 - beta2 * d L(theta'') / d theta0
enum class PreFineTuneMode { literal, meta_style };

const char* to_string(PreFineTuneMode m);
PreFineTuneMode parse_pre_fine_tune_mode(const std::string& s);

struct AdaptConfig {
  bool pre_fine_tune = true;
  std::size_t pft_iterations = 10;
  double beta1 = 1e-2;
  double beta2 = 1e-2;
  PreFineTuneMode mode = PreFineTuneMode::literal;
  double learning_rate = 1e-2;
  std::size_t max_steps = 200;
  std::size_t plateau_window = 10;
  double plateau_tol = 1e-4;

  void validate() const;
};

nlohmann::json to_json(const AdaptConfig& c);

struct AdaptGrid {
  bool pre_fine_tune = true;
  std::vector<std::size_t> pft_iterations{10, 30, 50};
  std::vector<double> beta1{1e-2, 5e-3, 1e-3, 5e-4};
  std::vector<double> beta2{1e-2, 5e-3, 1e-3, 5e-4};
  std::vector<double> learning_rate{1e-2, 1e-3, 1e-4};
  PreFineTuneMode mode = PreFineTuneMode::literal;
  std::size_t max_steps = 200;
  double plateau_tol = 1e-4;

  // Row order: iterations, beta1, beta2, learning rate (innermost). Without
  // pre-fine-tuning only the learning rates vary.
  std::vector<AdaptConfig> expand() const;
};

struct StepResult {
  ad::ParamSet params;
  std::vector<double> losses;  // training loss before each update
  std::size_t steps = 0;
  bool aborted = false;  // a non-finite loss stopped the run
};

StepResult pre_fine_tune(const ad::ParamSet& theta0, const nn::Batch& train,
                         const meta::Objective& objective, const AdaptConfig& config,
                         std::uint64_t stream = 0);

// Called with (step, params) before each fine-tuning update and once after
// the last one.
using StepObserver = std::function<void(std::size_t, const ad::ParamSet&)>;

// Full-batch gradient descent until the relative loss change over the
// trailing window drops below the tolerance, or max_steps updates.
StepResult fine_tune(const ad::ParamSet& theta, const nn::Batch& train,
                     const meta::Objective& objective, const AdaptConfig& config,
                     std::uint64_t stream = 0, const StepObserver& observer = {});

// Pre-fine-tune (when enabled) then fine-tune, from a copy of theta0.
StepResult adapt_once(const ad::ParamSet& theta0, const nn::Batch& train,
                      const meta::Objective& objective, const AdaptConfig& config,
                      std::uint64_t stream = 0, const StepObserver& observer = {});

struct AdaptOutcome {
  ad::ParamSet adapted;
  AdaptConfig chosen;
  std::size_t chosen_index = 0;
  std::vector<double> validation_losses;  // one per grid row
  eval::MetricsReport test;
  data::AdaptSplit split;
  double final_train_loss = 0.0;
  // Training and test loss at every fine-tuning step of the chosen run.
  std::vector<double> train_curve, test_curve;
};

struct SelectOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool curves = false;
};

AdaptOutcome adapt_and_select(const ad::ParamSet& theta0, const data::TaskDataset& task,
                              const meta::Objective& objective, const std::vector<AdaptConfig>& grid,
                              const SelectOptions& options);

}  // namespace metava::adapt
