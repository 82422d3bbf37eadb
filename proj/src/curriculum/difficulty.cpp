#include "metava/curriculum/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "metava/meta/inner.hpp"

namespace metava::curriculum {

std::vector<double> softmax_prime(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("softmax_prime: no losses");
  std::vector<double> out(losses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!(losses[i] >= 0.0) || !std::isfinite(losses[i]))
      throw std::invalid_argument("softmax_prime: losses must be finite and non-negative");
    out[i] = std::expm1(losses[i]);
    total += out[i];
  }
  if (total == 0.0) throw std::invalid_argument("softmax_prime: all losses are zero");
  for (auto& v : out) v /= total;
  return out;
}

DifficultyTable DifficultyTable::from_values(std::vector<double> values, std::size_t batch_size,
                                             std::size_t max_iter) {
  if (values.empty()) throw std::invalid_argument("difficulty table needs at least one task");
  if (batch_size == 0) throw std::invalid_argument("difficulty table: batch size must be positive");
  DifficultyTable t;
  t.counts.assign(values.size(), 0);
  t.batch_size = batch_size;
  t.max_iter = max_iter;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  t.lowest = sorted[std::min(batch_size, sorted.size()) - 1];
  t.values = std::move(values);
  return t;
}

DifficultyTable init_difficulty(const std::vector<data::TaskDataset>& tasks,
                                const ad::ParamSet& theta0, const meta::Objective& objective,
                                const DifficultyOptions& opt, std::vector<double>* average_losses) {
  if (tasks.empty()) throw std::invalid_argument("init_difficulty: no tasks");
  std::vector<double> losses;
  losses.reserve(tasks.size());
  for (const auto& task : tasks) {
    if (task.count(0) <= opt.k || task.count(1) <= opt.k)
      throw data::EpisodeError(task.subject(), task.count(1), task.count(0), opt.k + 1);
    Rng rng(opt.seed);
    std::vector<std::size_t> train;
    for (int label : {1, 0}) {
      std::vector<std::size_t> pool = task.indices(label);
      for (std::size_t i = 0; i < opt.k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      train.insert(train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(opt.k));
    }
    const nn::Batch batch = data::make_batch(task, train);
    const auto inner = meta::inner_adapt(theta0, batch, objective, opt.lr, opt.steps, false,
                                         opt.seed, task.subject());
    const ad::ParamSet adapted = objective.calibrated(inner.final(), batch);
    const double l = meta::mean_eval_loss(objective, adapted, task, data::complement(task, train));
    if (!std::isfinite(l)) throw meta::NonFiniteError("difficulty initialization", 0, task.subject());
    losses.push_back(l);
  }
  if (average_losses) *average_losses = losses;
  return DifficultyTable::from_values(softmax_prime(losses), opt.batch_size, opt.max_iter);
}

namespace {

std::vector<bool> eligible_set(const DifficultyTable& table, std::size_t iter) {
  const double thres =
      std::max(std::exp(static_cast<double>(iter) - static_cast<double>(table.max_iter)), table.lowest);
  std::vector<bool> e(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) e[k] = table.values[k] <= thres;
  return e;
}

}  // namespace

std::vector<double> selection_probabilities(const DifficultyTable& table, std::size_t iter) {
  if (iter == 0) throw std::invalid_argument("selection_probabilities: iter is 1-based");
  const auto elig = eligible_set(table, iter);
  const auto n = static_cast<double>(std::count(elig.begin(), elig.end(), true));
  if (n == 0) throw std::logic_error("selection_probabilities: no eligible task");
  std::vector<double> p(table.size(), 0.0);
  for (std::size_t k = 0; k < table.size(); ++k)
    if (elig[k])
      p[k] = std::max(0.0, 1.0 - static_cast<double>(table.counts[k]) / static_cast<double>(iter)) / n;
  return p;
}

std::vector<std::size_t> select_batch(const DifficultyTable& table, std::size_t iter, Rng& rng,
                                      bool without_replacement) {
  std::vector<double> p = selection_probabilities(table, iter);
  std::vector<bool> pool = eligible_set(table, iter);
  std::vector<std::size_t> out;
  out.reserve(table.batch_size);
  for (std::size_t d = 0; d < table.batch_size; ++d) {
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < pool.size(); ++k)
      if (pool[k]) candidates.push_back(k);
    if (candidates.empty()) {
      // Every eligible task is taken; widen to all unused tasks.
      for (std::size_t k = 0; k < table.size(); ++k)
        if (std::find(out.begin(), out.end(), k) == out.end()) candidates.push_back(k);
      if (candidates.empty()) throw std::logic_error("select_batch: batch larger than task count");
    }
    const double r = rng.uniform();
    double cum = 0.0;
    std::size_t pick = table.size();
    for (std::size_t k = 0; k < p.size(); ++k) {
      cum += p[k];
      if (p[k] > 0.0 && r < cum) {
        pick = k;
        break;
      }
    }
    if (pick == table.size()) pick = candidates[rng.below(candidates.size())];
    out.push_back(pick);
    if (without_replacement) {
      p[pick] = 0.0;
      pool[pick] = false;
    }
  }
  return out;
}

void record_selection(DifficultyTable& table, std::span<const std::size_t> indices) {
  if (indices.empty()) return;
  for (std::size_t i : indices) table.counts.at(i)++;
  table.completed++;
}

void write_difficulty_csv(std::ostream& out, const DifficultyTable& table,
                          std::span<const std::string> task_ids) {
  out << "task_id,V,t\n";
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < table.size(); ++k)
    out << (k < task_ids.size() ? task_ids[k] : std::to_string(k)) << ',' << table.values[k] << ','
        << table.counts[k] << '\n';
  out.precision(old);
}

}  // namespace metava::curriculum
