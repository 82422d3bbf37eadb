#pragma once

// MAML pre-training with curriculum task selection, meta-validation with
// early stopping, the hyperparameter grid protocol and the direct
// pre-training baseline.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metava/autodiff/param_set.hpp"
#include "metava/curriculum/difficulty.hpp"
#include "metava/data/dataset.hpp"
#include "metava/io/checkpoint.hpp"
#include "metava/meta/objective.hpp"

namespace metava::meta {

enum class OuterLoss { sum_over_steps, final_step };
enum class MetaGradient { exact, first_order, hvp_fd };
// How each meta-iteration picks its tasks.
enum class TaskSelection { curriculum, uniform };

const char* to_string(OuterLoss v);
const char* to_string(MetaGradient v);
const char* to_string(TaskSelection v);
OuterLoss parse_outer_loss(const std::string& s);
MetaGradient parse_meta_gradient(const std::string& s);
TaskSelection parse_task_selection(const std::string& s);

struct MetaConfig {
  double update_lr = 1e-2;  // alpha
  double meta_lr = 1e-2;    // gamma
  std::size_t updates = 1;
  std::size_t k = 10;
  std::size_t batch_size = 9;
  std::size_t max_iter = 50;  // curriculum horizon
  OuterLoss outer_loss = OuterLoss::sum_over_steps;
  MetaGradient gradient = MetaGradient::exact;
  TaskSelection selection = TaskSelection::curriculum;
  bool without_replacement = false;
  std::size_t patience = 5;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
  double hvp_eps = 1e-4;

  void validate() const;
};

nlohmann::json to_json(const MetaConfig& c);
MetaConfig meta_config_from_json(const nlohmann::json& j);

struct TaskEpisode {
  std::string task;
  nn::Batch support;
  nn::Batch query;
  std::uint64_t stream = 0;  // dropout stream for this task's losses
};

struct OuterResult {
  double loss = 0.0;
  ad::ParamSet grad;                // trainable entries only are meaningful
  std::vector<double> task_losses;  // per task, in input order
};

// Sum over tasks of the per-step (or final-step) query losses after
// inner_adapt, with its gradient with respect to theta0.
OuterResult meta_outer_loss_and_grad(const ad::ParamSet& theta0, std::span<const TaskEpisode> tasks,
                                     const Objective& objective, const MetaConfig& config,
                                     std::size_t iteration = 0);

// Episode for `task` at (iteration, position); identical across methods
// that share a seed.
TaskEpisode make_episode(const data::TaskDataset& task, std::size_t k, std::uint64_t seed,
                         std::size_t iteration, std::size_t position,
                         ad::Precision precision = ad::Precision::f32);

// Mean held-out loss after adapting a copy of theta0 to each validation task
// on a seeded K-shot support set.
double meta_validate(const ad::ParamSet& theta0, const std::vector<data::TaskDataset>& val,
                     const Objective& objective, const MetaConfig& config);

// The per-task losses behind meta_validate, in task order.
std::vector<double> adapted_task_losses(const ad::ParamSet& theta0,
                                        const std::vector<data::TaskDataset>& tasks,
                                        const Objective& objective, const MetaConfig& config);

struct IterationLog {
  std::size_t iteration = 0;  // 0 holds the initial validation only
  double meta_loss = std::numeric_limits<double>::quiet_NaN();
  double val_loss = 0.0;
  std::vector<std::string> tasks;
  double wall_seconds = 0.0;
};

struct TrainHooks {
  // Replaces meta_validate (stopping-rule tests).
  std::function<double(std::size_t iteration, const ad::ParamSet&)> validation;
  std::function<void(const IterationLog&)> on_iteration;
};

struct TrainResult {
  io::Checkpoint best;
  ad::ParamSet last;
  std::vector<IterationLog> log;
  std::optional<curriculum::DifficultyTable> difficulty;  // final table
  std::size_t iterations = 0;
  bool early_stopped = false;
  double initial_validation = 0.0;
};

// A non-finite loss during training; carries the last good state.
class TrainingAborted : public NonFiniteError {
 public:
  TrainingAborted(const NonFiniteError& cause, io::Checkpoint last_good)
      : NonFiniteError(cause), last_good(std::move(last_good)) {}
  io::Checkpoint last_good;
};

TrainResult meta_train(const std::vector<data::TaskDataset>& train,
                       const std::vector<data::TaskDataset>& val, const ad::ParamSet& theta_init,
                       const Objective& objective, const MetaConfig& config,
                       const TrainHooks& hooks = {});

struct DirectConfig {
  double lr = 1e-2;
  std::size_t minibatch = 64;
};

// Plain pre-training on pooled class-balanced draws of batch_size * 2K
// segments per class; uses the MetaConfig for K, batch size, early stopping
// and the adaptation used for validation.
TrainResult direct_pretrain(const std::vector<data::TaskDataset>& train,
                            const std::vector<data::TaskDataset>& val,
                            const ad::ParamSet& theta_init, const Objective& objective,
                            const MetaConfig& config, const DirectConfig& direct,
                            const TrainHooks& hooks = {});

struct MetaGrid {
  std::vector<double> update_lr{1e-2, 5e-3, 1e-3};
  std::vector<double> meta_lr{1e-2, 5e-3, 1e-3};
  std::vector<std::size_t> updates{1, 3, 5};
  std::size_t size() const { return update_lr.size() * meta_lr.size() * updates.size(); }
};

struct DirectGrid {
  std::vector<double> lr{1e-2, 5e-3, 1e-3};
  std::vector<std::size_t> minibatch{32, 64, 128};
  std::size_t size() const { return lr.size() * minibatch.size(); }
};

struct GridRow {
  nlohmann::json params;
  double best_validation = 0.0;
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best_index = 0;  // lowest validation, earliest row on ties
  MetaConfig best_config;
  DirectConfig best_direct;
  TrainResult best;
};

// Row order: update_lr outermost, then meta_lr, then updates.
GridResult grid_search(const MetaGrid& grid, const MetaConfig& base,
                       const std::vector<data::TaskDataset>& train,
                       const std::vector<data::TaskDataset>& val, const ad::ParamSet& theta_init,
                       const Objective& objective);

// Row order: lr outermost, then minibatch.
GridResult direct_grid_search(const DirectGrid& grid, const MetaConfig& base,
                              const std::vector<data::TaskDataset>& train,
                              const std::vector<data::TaskDataset>& val,
                              const ad::ParamSet& theta_init, const Objective& objective);

// Index of the lowest value; the earliest wins ties. NaN never wins.
std::size_t argmin_first(std::span<const double> values);

void write_iteration_log(std::ostream& out, std::span<const IterationLog> log,
                         bool include_wall_time = true);
void write_grid_table(std::ostream& out, std::span<const GridRow> rows);

}  // namespace metava::meta
