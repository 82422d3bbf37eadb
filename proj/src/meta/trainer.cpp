#include "metava/meta/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "metava/autodiff/gradient.hpp"
#include "metava/autodiff/ops.hpp"
#include "metava/meta/inner.hpp"
#include "metava/util/parallel.hpp"

namespace metava::meta {

using nlohmann::json;

const char* to_string(OuterLoss v) { return v == OuterLoss::sum_over_steps ? "sum-over-steps" : "final-step"; }
const char* to_string(MetaGradient v) {
  switch (v) {
    case MetaGradient::exact: return "exact";
    case MetaGradient::first_order: return "first-order";
    case MetaGradient::hvp_fd: return "hvp-fd";
  }
  return "?";
}
const char* to_string(TaskSelection v) { return v == TaskSelection::curriculum ? "curriculum" : "uniform"; }

OuterLoss parse_outer_loss(const std::string& s) {
  if (s == "sum-over-steps") return OuterLoss::sum_over_steps;
  if (s == "final-step") return OuterLoss::final_step;
  throw std::invalid_argument("unknown outer loss mode '" + s + "' (sum-over-steps | final-step)");
}
MetaGradient parse_meta_gradient(const std::string& s) {
  if (s == "exact") return MetaGradient::exact;
  if (s == "first-order") return MetaGradient::first_order;
  if (s == "hvp-fd") return MetaGradient::hvp_fd;
  throw std::invalid_argument("unknown meta-gradient mode '" + s + "' (exact | first-order | hvp-fd)");
}
TaskSelection parse_task_selection(const std::string& s) {
  if (s == "curriculum") return TaskSelection::curriculum;
  if (s == "uniform") return TaskSelection::uniform;
  throw std::invalid_argument("unknown task selection '" + s + "' (curriculum | uniform)");
}

void MetaConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("meta config: " + m); };
  if (!(update_lr > 0) || !(meta_lr > 0)) fail("learning rates must be positive");
  if (updates < 1) fail("updates must be at least 1");
  if (k < 1 || batch_size < 1) fail("k and batch_size must be positive");
  if (max_iterations < 1) fail("max_iterations must be positive");
  if (patience < 1) fail("patience must be positive");
  if (!(hvp_eps > 0)) fail("hvp_eps must be positive");
}

json to_json(const MetaConfig& c) {
  return {{"update_lr", c.update_lr},
          {"meta_lr", c.meta_lr},
          {"updates", c.updates},
          {"k", c.k},
          {"batch_size", c.batch_size},
          {"max_iter", c.max_iter},
          {"outer_loss", to_string(c.outer_loss)},
          {"gradient", to_string(c.gradient)},
          {"selection", to_string(c.selection)},
          {"without_replacement", c.without_replacement},
          {"patience", c.patience},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed},
          {"hvp_eps", c.hvp_eps}};
}

MetaConfig meta_config_from_json(const json& j) {
  MetaConfig c;
  c.update_lr = j.value("update_lr", c.update_lr);
  c.meta_lr = j.value("meta_lr", c.meta_lr);
  c.updates = j.value("updates", c.updates);
  c.k = j.value("k", c.k);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.outer_loss = parse_outer_loss(j.value("outer_loss", std::string(to_string(c.outer_loss))));
  c.gradient = parse_meta_gradient(j.value("gradient", std::string(to_string(c.gradient))));
  c.selection = parse_task_selection(j.value("selection", std::string(to_string(c.selection))));
  c.without_replacement = j.value("without_replacement", c.without_replacement);
  c.patience = j.value("patience", c.patience);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.seed = j.value("seed", c.seed);
  c.hvp_eps = j.value("hvp_eps", c.hvp_eps);
  return c;
}

namespace {

std::uint64_t query_stream(std::uint64_t stream, std::size_t step) {
  return mix_seed(mix_seed(stream, 0x7175657279ULL), step);
}

ad::Tensor checked_loss(const Objective& obj, const ad::ParamSet& at, const nn::Batch& b,
                        std::uint64_t stream, const char* where, std::size_t iteration,
                        const std::string& task) {
  ad::Tensor loss = obj.loss(at, b, stream);
  if (!std::isfinite(loss.item())) throw NonFiniteError(where, iteration, task);
  return loss;
}

ad::ParamSet loss_gradient(const Objective& obj, const ad::ParamSet& theta, const nn::Batch& b,
                           std::uint64_t stream, double* value, std::size_t iteration,
                           const std::string& task) {
  const ad::ParamSet at = theta.as_leaves();
  const ad::Tensor loss = checked_loss(obj, at, b, stream, "meta outer loss", iteration, task);
  if (value) *value = loss.item();
  return ad::gradient(loss, at, false);
}

double norm(const ad::ParamSet& v) {
  double s = 0;
  for (const auto& e : v)
    if (e.trainable)
      for (double x : e.value.values()) s += x * x;
  return std::sqrt(s);
}

bool counts_step(const MetaConfig& c, std::size_t step) {
  return c.outer_loss == OuterLoss::sum_over_steps || step + 1 == c.updates;
}

struct TaskOuter {
  double loss = 0;
  ad::ParamSet grad;
};

TaskOuter exact_task(const ad::ParamSet& theta0, const TaskEpisode& ep, const Objective& obj,
                     const MetaConfig& c, std::size_t iteration) {
  ad::GradModeGuard recording(true);
  const ad::ParamSet leaves = theta0.as_leaves();
  const auto inner = inner_adapt(leaves, ep.support, obj, c.update_lr, c.updates, true, ep.stream, ep.task);
  std::optional<ad::Tensor> total;
  for (std::size_t s = 0; s < c.updates; ++s) {
    if (!counts_step(c, s)) continue;
    ad::Tensor l = checked_loss(obj, inner.trajectory[s], ep.query, query_stream(ep.stream, s),
                                "meta outer loss", iteration, ep.task);
    total = total ? ad::add(*total, l) : l;
  }
  return {total->item(), ad::gradient(*total, leaves, false)};
}

TaskOuter first_order_task(const ad::ParamSet& theta0, const TaskEpisode& ep, const Objective& obj,
                           const MetaConfig& c, std::size_t iteration) {
  const auto inner = inner_adapt(theta0, ep.support, obj, c.update_lr, c.updates, false, ep.stream, ep.task);
  TaskOuter out;
  out.grad = theta0.scaled(0.0);
  for (std::size_t s = 0; s < c.updates; ++s) {
    if (!counts_step(c, s)) continue;
    double v = 0;
    out.grad = out.grad.plus(loss_gradient(obj, inner.trajectory[s], ep.query,
                                           query_stream(ep.stream, s), &v, iteration, ep.task));
    out.loss += v;
  }
  return out;
}

// Reverse pass through the inner steps using finite-difference
// Hessian-vector products of the support loss:
// v += dL_q/dtheta_s, then v -= alpha * H(theta_{s-1}) v.
TaskOuter hvp_task(const ad::ParamSet& theta0, const TaskEpisode& ep, const Objective& obj,
                   const MetaConfig& c, std::size_t iteration) {
  const auto inner = inner_adapt(theta0, ep.support, obj, c.update_lr, c.updates, false, ep.stream, ep.task);
  std::vector<ad::ParamSet> theta{theta0.clone()};
  theta.insert(theta.end(), inner.trajectory.begin(), inner.trajectory.end());
  TaskOuter out;
  ad::ParamSet v = theta0.scaled(0.0);
  auto support_grad = [&](const ad::ParamSet& at, std::size_t step) {
    ad::GradModeGuard recording(true);
    return loss_gradient(obj, at, ep.support, mix_seed(ep.stream, step), nullptr, iteration, ep.task);
  };
  for (std::size_t s = c.updates; s-- > 0;) {
    if (counts_step(c, s)) {
      ad::GradModeGuard recording(true);
      double l = 0;
      v = v.plus(loss_gradient(obj, theta[s + 1], ep.query, query_stream(ep.stream, s), &l,
                               iteration, ep.task));
      out.loss += l;
    }
    const double n = norm(v);
    if (n == 0.0) continue;
    const double eps = c.hvp_eps / n;
    const ad::ParamSet gp = support_grad(theta[s].updated_values(v, -eps), s);
    const ad::ParamSet gm = support_grad(theta[s].updated_values(v, eps), s);
    const ad::ParamSet hv = gp.plus(gm.scaled(-1.0)).scaled(1.0 / (2.0 * eps));
    v = v.updated_values(hv, c.update_lr);
  }
  out.grad = std::move(v);
  return out;
}

}  // namespace

OuterResult meta_outer_loss_and_grad(const ad::ParamSet& theta0, std::span<const TaskEpisode> tasks,
                                     const Objective& objective, const MetaConfig& config,
                                     std::size_t iteration) {
  config.validate();
  if (tasks.empty()) throw std::invalid_argument("meta_outer_loss_and_grad: no tasks");
  std::vector<TaskOuter> per(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    switch (config.gradient) {
      case MetaGradient::exact: per[i] = exact_task(theta0, tasks[i], objective, config, iteration); break;
      case MetaGradient::first_order: per[i] = first_order_task(theta0, tasks[i], objective, config, iteration); break;
      case MetaGradient::hvp_fd: per[i] = hvp_task(theta0, tasks[i], objective, config, iteration); break;
    }
  });
  // Ordered reduction keeps the sum independent of the worker count.
  ad::NoGradGuard guard;
  OuterResult out;
  out.grad = per[0].grad.clone();
  out.loss = per[0].loss;
  out.task_losses.push_back(per[0].loss);
  for (std::size_t i = 1; i < per.size(); ++i) {
    out.grad = out.grad.plus(per[i].grad);
    out.loss += per[i].loss;
    out.task_losses.push_back(per[i].loss);
  }
  return out;
}

TaskEpisode make_episode(const data::TaskDataset& task, std::size_t k, std::uint64_t seed,
                         std::size_t iteration, std::size_t position, ad::Precision precision) {
  const std::uint64_t s = mix_seed(mix_seed(seed, iteration), position);
  Rng rng(s);
  const auto ep = data::sample_episode(task, k, rng);
  return {task.subject(), data::make_batch(task, ep.support, precision),
          data::make_batch(task, ep.query, precision), mix_seed(s, 0x64726f70ULL)};
}

namespace {

ad::Precision precision_of(const ad::ParamSet& ps) {
  return ps.empty() ? ad::Precision::f32 : ps.begin()->value.precision();
}

constexpr std::uint64_t kValidationSalt = 0x76616c6964ULL;

}  // namespace

double meta_validate(const ad::ParamSet& theta0, const std::vector<data::TaskDataset>& val,
                     const Objective& objective, const MetaConfig& config) {
  if (val.empty()) throw std::invalid_argument("meta_validate: no validation tasks");
  const auto losses = adapted_task_losses(theta0, val, objective, config);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

std::vector<double> adapted_task_losses(const ad::ParamSet& theta0,
                                        const std::vector<data::TaskDataset>& val,
                                        const Objective& objective, const MetaConfig& config) {
  const auto prec = precision_of(theta0);
  std::vector<double> losses(val.size());
  parallel_for(val.size(), [&](std::size_t i) {
    // Fixed per-task seed, so successive validations are comparable.
    const std::uint64_t s = mix_seed(config.seed ^ kValidationSalt, i);
    Rng rng(s);
    const auto ep = data::sample_episode(val[i], config.k, rng);
    const nn::Batch support = data::make_batch(val[i], ep.support, prec);
    const auto inner = inner_adapt(theta0, support, objective, config.update_lr, config.updates,
                                   false, s, val[i].subject());
    const ad::ParamSet adapted = objective.calibrated(inner.final(), support);
    losses[i] = mean_eval_loss(objective, adapted, val[i], data::complement(val[i], ep.support));
  });
  return losses;
}

namespace {

std::vector<std::size_t> uniform_tasks(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  pool.resize(count);
  return pool;
}

// Shared loop: early stopping, logging, checkpoints and abort handling.
// `step` advances theta by one iteration and returns (loss, task ids).
struct StepResult {
  double loss;
  std::vector<std::string> tasks;
};

TrainResult run_training(const std::vector<data::TaskDataset>& val, const ad::ParamSet& theta_init,
                         const Objective& objective, const MetaConfig& config,
                         const TrainHooks& hooks, const json& config_json,
                         const std::optional<curriculum::DifficultyTable>& table, Rng& rng,
                         const std::function<StepResult(std::size_t, ad::ParamSet&)>& step) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto validate = [&](std::size_t it, const ad::ParamSet& th) {
    const double v = hooks.validation ? hooks.validation(it, th) : meta_validate(th, val, objective, config);
    if (!std::isfinite(v)) throw NonFiniteError("meta validation", it, {});
    return v;
  };
  auto snapshot = [&](const ad::ParamSet& th, std::size_t it, double best) {
    io::Checkpoint ck;
    ck.params = th.clone();
    ck.config = config_json;
    ck.iteration = it;
    ck.best_validation = best;
    ck.difficulty = table;
    ck.rng_state = rng.state();
    return ck;
  };

  TrainResult out;
  ad::ParamSet theta = theta_init.clone();
  out.initial_validation = validate(0, theta);
  out.log.push_back({0, std::numeric_limits<double>::quiet_NaN(), out.initial_validation, {}, elapsed()});
  if (hooks.on_iteration) hooks.on_iteration(out.log.back());
  out.best = snapshot(theta, 0, std::numeric_limits<double>::infinity());

  std::size_t bad = 0;
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    const io::Checkpoint last_good = snapshot(theta, it - 1, out.best.best_validation);
    StepResult r;
    double v = 0;
    try {
      r = step(it, theta);
      if (!std::isfinite(r.loss)) throw NonFiniteError("meta update", it, {});
      if (!theta.all_finite()) throw NonFiniteError("parameters after update", it, {});
      v = validate(it, theta);
    } catch (const NonFiniteError& e) {
      throw TrainingAborted(e, last_good);
    }
    out.iterations = it;
    out.log.push_back({it, r.loss, v, std::move(r.tasks), elapsed()});
    if (hooks.on_iteration) hooks.on_iteration(out.log.back());
    if (v < out.best.best_validation) {
      out.best = snapshot(theta, it, v);
      bad = 0;
    } else if (++bad >= config.patience) {
      out.early_stopped = true;
      break;
    }
  }
  out.last = std::move(theta);
  return out;
}

}  // namespace

TrainResult meta_train(const std::vector<data::TaskDataset>& train,
                       const std::vector<data::TaskDataset>& val, const ad::ParamSet& theta_init,
                       const Objective& objective, const MetaConfig& config,
                       const TrainHooks& hooks) {
  config.validate();
  if (train.size() < config.batch_size)
    throw std::invalid_argument("meta_train: " + std::to_string(train.size()) +
                                " training tasks, fewer than the task batch size " +
                                std::to_string(config.batch_size));
  const auto prec = precision_of(theta_init);
  std::optional<curriculum::DifficultyTable> table;
  if (config.selection == TaskSelection::curriculum) {
    curriculum::DifficultyOptions opt;
    opt.k = config.k;
    opt.steps = config.updates;
    opt.lr = config.update_lr;
    opt.batch_size = config.batch_size;
    opt.max_iter = config.max_iter;
    opt.seed = config.seed;
    table = curriculum::init_difficulty(train, theta_init, objective, opt);
  }
  Rng rng(config.seed);
  json cj = to_json(config);
  cj["method"] = config.selection == TaskSelection::curriculum ? "maml+cl" : "maml";

  auto step = [&](std::size_t it, ad::ParamSet& theta) {
    const auto idx = table ? curriculum::select_batch(*table, it, rng, config.without_replacement)
                           : uniform_tasks(train.size(), config.batch_size, rng);
    std::vector<TaskEpisode> eps;
    StepResult r;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      eps.push_back(make_episode(train[idx[p]], config.k, config.seed, it, p, prec));
      r.tasks.push_back(train[idx[p]].subject());
    }
    const auto outer = meta_outer_loss_and_grad(theta, eps, objective, config, it);
    r.loss = outer.loss;
    theta = theta.updated_values(outer.grad, config.meta_lr);
    if (table) curriculum::record_selection(*table, idx);
    return r;
  };
  TrainResult out = run_training(val, theta_init, objective, config, hooks, cj, table, rng, step);
  out.difficulty = table;
  return out;
}

namespace {

struct PooledItem {
  std::size_t task;
  std::size_t segment;
};

nn::Batch pooled_batch(const std::vector<data::TaskDataset>& tasks, std::span<const PooledItem> items,
                       ad::Precision precision) {
  const std::size_t len = tasks[items[0].task][items[0].segment].samples.size();
  std::vector<double> values;
  values.reserve(items.size() * len);
  nn::Batch b;
  for (const auto& it : items) {
    const auto& seg = tasks[it.task][it.segment];
    if (seg.samples.size() != len) throw std::invalid_argument("pooled batch: segments of unequal length");
    values.insert(values.end(), seg.samples.begin(), seg.samples.end());
    b.labels.push_back(seg.label);
  }
  b.inputs = ad::Tensor::from_values({items.size(), 1, len}, std::move(values), precision);
  return b;
}

}  // namespace

TrainResult direct_pretrain(const std::vector<data::TaskDataset>& train,
                            const std::vector<data::TaskDataset>& val,
                            const ad::ParamSet& theta_init, const Objective& objective,
                            const MetaConfig& config, const DirectConfig& direct,
                            const TrainHooks& hooks) {
  config.validate();
  if (!(direct.lr > 0) || direct.minibatch == 0)
    throw std::invalid_argument("direct config: lr and minibatch must be positive");
  if (train.size() < config.batch_size)
    throw std::invalid_argument("direct_pretrain: " + std::to_string(train.size()) +
                                " training tasks, fewer than the task batch size " +
                                std::to_string(config.batch_size));
  const auto prec = precision_of(theta_init);
  Rng rng(config.seed);
  json cj = to_json(config);
  cj["method"] = "direct";
  cj["direct"] = {{"lr", direct.lr}, {"minibatch", direct.minibatch}};

  auto step = [&](std::size_t it, ad::ParamSet& theta) {
    // Same task draw and episodes as uniform MAML with this seed; each
    // subject contributes its support and query segments (2K per class).
    const auto idx = uniform_tasks(train.size(), config.batch_size, rng);
    std::vector<PooledItem> pool;
    StepResult r{0.0, {}};
    for (std::size_t p = 0; p < idx.size(); ++p) {
      Rng erng(mix_seed(mix_seed(config.seed, it), p));
      const auto ep = data::sample_episode(train[idx[p]], config.k, erng);
      for (auto i : ep.support) pool.push_back({idx[p], i});
      for (auto i : ep.query) pool.push_back({idx[p], i});
      r.tasks.push_back(train[idx[p]].subject());
    }
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    const std::uint64_t stream = mix_seed(config.seed ^ 0x646972656374ULL, it);
    ad::GradModeGuard recording(true);
    for (std::size_t b = 0; b < pool.size(); b += direct.minibatch) {
      const auto part = std::span<const PooledItem>(pool).subspan(b, std::min(direct.minibatch, pool.size() - b));
      const nn::Batch batch = pooled_batch(train, part, prec);
      const ad::ParamSet at = theta.as_leaves();
      const ad::Tensor loss = checked_loss(objective, at, batch, mix_seed(stream, b), "direct pre-training", it, {});
      r.loss += loss.item() * static_cast<double>(part.size()) / static_cast<double>(pool.size());
      theta = at.updated_values(ad::gradient(loss, at, false), direct.lr);
    }
    return r;
  };
  return run_training(val, theta_init, objective, config, hooks, cj, std::nullopt, rng, step);
}

std::size_t argmin_first(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmin_first: empty input");
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isnan(values[i]) && (best == values.size() || values[i] < values[best])) best = i;
  if (best == values.size()) throw std::invalid_argument("argmin_first: every value is NaN");
  return best;
}

namespace {

GridResult finish_grid(std::vector<GridRow> rows, std::vector<TrainResult> results) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.best_validation);
  GridResult g;
  g.best_index = argmin_first(v);
  g.best = std::move(results[g.best_index]);
  g.rows = std::move(rows);
  return g;
}

GridRow row_of(json params, const TrainResult& r) {
  return {std::move(params), r.best.best_validation, r.best.iteration, r.iterations};
}

}  // namespace

GridResult grid_search(const MetaGrid& grid, const MetaConfig& base,
                       const std::vector<data::TaskDataset>& train,
                       const std::vector<data::TaskDataset>& val, const ad::ParamSet& theta_init,
                       const Objective& objective) {
  if (grid.size() == 0) throw std::invalid_argument("grid_search: empty grid");
  std::vector<MetaConfig> configs;
  for (double a : grid.update_lr)
    for (double g : grid.meta_lr)
      for (std::size_t u : grid.updates) {
        MetaConfig c = base;
        c.update_lr = a;
        c.meta_lr = g;
        c.updates = u;
        configs.push_back(c);
      }
  std::vector<TrainResult> results(configs.size());
  // Every combination starts from its own copy of theta_init.
  parallel_for(configs.size(), [&](std::size_t i) {
    results[i] = meta_train(train, val, theta_init, objective, configs[i]);
  });
  std::vector<GridRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i)
    rows.push_back(row_of({{"update_lr", configs[i].update_lr},
                           {"meta_lr", configs[i].meta_lr},
                           {"updates", configs[i].updates}},
                          results[i]));
  GridResult g = finish_grid(std::move(rows), std::move(results));
  g.best_config = configs[g.best_index];
  return g;
}

GridResult direct_grid_search(const DirectGrid& grid, const MetaConfig& base,
                              const std::vector<data::TaskDataset>& train,
                              const std::vector<data::TaskDataset>& val,
                              const ad::ParamSet& theta_init, const Objective& objective) {
  if (grid.size() == 0) throw std::invalid_argument("direct_grid_search: empty grid");
  std::vector<DirectConfig> configs;
  for (double lr : grid.lr)
    for (std::size_t mb : grid.minibatch) configs.push_back({lr, mb});
  std::vector<TrainResult> results(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    results[i] = direct_pretrain(train, val, theta_init, objective, base, configs[i]);
  });
  std::vector<GridRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i)
    rows.push_back(row_of({{"lr", configs[i].lr}, {"minibatch", configs[i].minibatch}}, results[i]));
  GridResult g = finish_grid(std::move(rows), std::move(results));
  g.best_config = base;
  g.best_direct = configs[g.best_index];
  return g;
}

void write_iteration_log(std::ostream& out, std::span<const IterationLog> log, bool include_wall_time) {
  const auto old = out.precision(17);
  out << "iteration,meta_loss,val_loss,tasks,wall_seconds\n";
  for (const auto& l : log) {
    out << l.iteration << ',';
    if (!std::isnan(l.meta_loss)) out << l.meta_loss;
    out << ',' << l.val_loss << ',';
    for (std::size_t i = 0; i < l.tasks.size(); ++i) out << (i ? ";" : "") << l.tasks[i];
    out << ',';
    if (include_wall_time) out << std::fixed << std::setprecision(3) << l.wall_seconds << std::defaultfloat << std::setprecision(17);
    out << '\n';
  }
  out.precision(old);
}

void write_grid_table(std::ostream& out, std::span<const GridRow> rows) {
  if (rows.empty()) return;
  const auto old = out.precision(17);
  std::vector<std::string> keys;
  for (auto it = rows[0].params.begin(); it != rows[0].params.end(); ++it) keys.push_back(it.key());
  out << "row";
  for (const auto& k : keys) out << ',' << k;
  out << ",best_validation,best_iteration,iterations\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i;
    for (const auto& k : keys) out << ',' << rows[i].params.at(k).dump();
    out << ',' << rows[i].best_validation << ',' << rows[i].best_iteration << ',' << rows[i].iterations << '\n';
  }
  out.precision(old);
}

}  // namespace metava::meta
