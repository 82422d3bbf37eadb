#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "metava/autodiff/param_set.hpp"
#include "metava/data/dataset.hpp"
#include "metava/meta/objective.hpp"
#include "metava/util/rng.hpp"

namespace metava::curriculum {

// V_b = (e^{loss_b} - 1) / sum_i (e^{loss_i} - 1). Throws when every loss is
// zero or any loss is negative or non-finite.
std::vector<double> softmax_prime(std::span<const double> losses);

struct DifficultyTable {
  std::vector<double> values;        // V, unit sum
  std::vector<std::size_t> counts;   // t, selections so far
  std::size_t batch_size = 9;
  std::size_t max_iter = 50;
  double lowest = 0.0;               // batch_size-th smallest V
  std::size_t completed = 0;         // iterations recorded

  std::size_t size() const { return values.size(); }
  static DifficultyTable from_values(std::vector<double> values, std::size_t batch_size = 9,
                                     std::size_t max_iter = 50);
};

struct DifficultyOptions {
  std::size_t k = 10;
  std::size_t steps = 1;
  double lr = 1e-2;
  std::size_t batch_size = 9;
  std::size_t max_iter = 50;
  std::uint64_t seed = 0;
};

// Per task: train a copy of theta0 on K segments per class for `steps`
// full-batch steps, average the evaluation loss over the remaining segments,
// and pass the averages through softmax_prime. Each task draws its training
// segments from an identically seeded generator.
DifficultyTable init_difficulty(const std::vector<data::TaskDataset>& tasks,
                                const ad::ParamSet& theta0, const meta::Objective& objective,
                                const DifficultyOptions& options,
                                std::vector<double>* average_losses = nullptr);

// thres = max(e^{iter - MaxIter}, lowest); tasks with V <= thres are
// eligible and get max(0, 1 - t_k / iter) / #eligible, others 0.
std::vector<double> selection_probabilities(const DifficultyTable& table, std::size_t iter);

// batch_size roulette draws against one probability vector. A draw landing
// beyond the total mass picks uniformly among eligible tasks. Without
// replacement, each chosen task leaves the wheel (and the fallback pool).
std::vector<std::size_t> select_batch(const DifficultyTable& table, std::size_t iter, Rng& rng,
                                      bool without_replacement = false);

void record_selection(DifficultyTable& table, std::span<const std::size_t> indices);

// task_id,V,t rows.
void write_difficulty_csv(std::ostream& out, const DifficultyTable& table,
                          std::span<const std::string> task_ids);

}  // namespace metava::curriculum
