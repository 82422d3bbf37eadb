#include "metava/adapt/adaptation.hpp"

#include <cmath>
#include <stdexcept>

#include "metava/autodiff/gradient.hpp"
#include "metava/meta/inner.hpp"
#include "metava/meta/trainer.hpp"
#include "metava/util/parallel.hpp"

namespace metava::adapt {

const char* to_string(PreFineTuneMode m) { return m == PreFineTuneMode::literal ? "literal" : "meta-style"; }

PreFineTuneMode parse_pre_fine_tune_mode(const std::string& s) {
  if (s == "literal") return PreFineTuneMode::literal;
  if (s == "meta-style") return PreFineTuneMode::meta_style;
  throw std::invalid_argument("unknown pre-fine-tune mode '" + s + "' (literal | meta-style)");
}

void AdaptConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("adapt config: " + m); };
  if (pre_fine_tune && (!(beta1 > 0) || !(beta2 > 0))) fail("beta1 and beta2 must be positive");
  if (pre_fine_tune && pft_iterations == 0) fail("pre-fine-tune iterations must be positive");
  if (!(learning_rate >= 0)) fail("learning_rate must not be negative");
  if (plateau_window == 0 || !(plateau_tol >= 0)) fail("plateau window and tolerance");
}

nlohmann::json to_json(const AdaptConfig& c) {
  nlohmann::json j = {{"pre_fine_tune", c.pre_fine_tune},
                      {"learning_rate", c.learning_rate},
                      {"max_steps", c.max_steps},
                      {"plateau_window", c.plateau_window},
                      {"plateau_tol", c.plateau_tol}};
  if (c.pre_fine_tune) {
    j["pft_iterations"] = c.pft_iterations;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["mode"] = to_string(c.mode);
  }
  return j;
}

std::vector<AdaptConfig> AdaptGrid::expand() const {
  std::vector<AdaptConfig> out;
  AdaptConfig base;
  base.pre_fine_tune = pre_fine_tune;
  base.mode = mode;
  base.max_steps = max_steps;
  base.plateau_tol = plateau_tol;
  if (!pre_fine_tune) {
    for (double lr : learning_rate) {
      base.learning_rate = lr;
      out.push_back(base);
    }
    return out;
  }
  for (std::size_t it : pft_iterations)
    for (double b1 : beta1)
      for (double b2 : beta2)
        for (double lr : learning_rate) {
          AdaptConfig c = base;
          c.pft_iterations = it;
          c.beta1 = b1;
          c.beta2 = b2;
          c.learning_rate = lr;
          out.push_back(c);
        }
  return out;
}

namespace {

struct Evaluated {
  double loss;
  ad::ParamSet grad;
};

Evaluated loss_and_grad(const meta::Objective& obj, const ad::ParamSet& theta, const nn::Batch& b,
                        std::uint64_t stream) {
  ad::GradModeGuard recording(true);
  const ad::ParamSet at = theta.as_leaves();
  const ad::Tensor loss = obj.loss(at, b, stream);
  const double v = loss.item();
  if (!std::isfinite(v)) return {v, {}};
  return {v, ad::gradient(loss, at, false)};
}

}  // namespace

StepResult pre_fine_tune(const ad::ParamSet& theta0, const nn::Batch& train,
                         const meta::Objective& objective, const AdaptConfig& config,
                         std::uint64_t stream) {
  config.validate();
  StepResult out;
  out.params = theta0.clone();
  for (std::size_t i = 0; i < config.pft_iterations; ++i) {
    const std::uint64_t s = mix_seed(stream, i);
    ad::ParamSet next;
    if (config.mode == PreFineTuneMode::literal) {
      // theta' is a copy, so theta'' = theta - beta1 * grad and the update
      // continues from theta''.
      const auto first = loss_and_grad(objective, out.params, train, mix_seed(s, 0));
      if (!std::isfinite(first.loss)) {
        out.aborted = true;
        break;
      }
      const ad::ParamSet second_point = out.params.updated_values(first.grad, config.beta1);
      const auto second = loss_and_grad(objective, second_point, train, mix_seed(s, 1));
      if (!std::isfinite(second.loss)) {
        out.aborted = true;
        break;
      }
      out.losses.push_back(first.loss);
      next = second_point.updated_values(second.grad, config.beta2);
    } else {
      ad::GradModeGuard recording(true);
      const ad::ParamSet leaves = out.params.as_leaves();
      double l0 = 0, l1 = 0;
      try {
        const auto inner = meta::inner_adapt(leaves, train, objective, config.beta1, 1, true, s);
        l0 = inner.support_losses[0];
        const ad::Tensor loss = objective.loss(inner.final(), train, mix_seed(s, 1));
        l1 = loss.item();
        if (!std::isfinite(l1)) throw meta::NonFiniteError("pre_fine_tune", i, {});
        next = out.params.updated_values(ad::gradient(loss, leaves, false), config.beta2);
      } catch (const meta::NonFiniteError&) {
        out.aborted = true;
        break;
      }
      out.losses.push_back(l0);
      (void)l1;
    }
    if (!next.all_finite()) {
      out.aborted = true;
      break;
    }
    out.params = std::move(next);
    out.steps = i + 1;
  }
  return out;
}

StepResult fine_tune(const ad::ParamSet& theta, const nn::Batch& train,
                     const meta::Objective& objective, const AdaptConfig& config,
                     std::uint64_t stream, const StepObserver& observer) {
  config.validate();
  StepResult out;
  out.params = theta.clone();
  for (std::size_t i = 0;; ++i) {
    const auto e = loss_and_grad(objective, out.params, train, mix_seed(stream, i));
    if (!std::isfinite(e.loss)) {
      out.aborted = true;
      break;
    }
    out.losses.push_back(e.loss);
    if (observer) observer(i, out.params);
    const std::size_t w = config.plateau_window;
    if (i >= w) {
      const double ref = out.losses[i - w];
      const double change = std::abs(ref - e.loss);
      if (ref == 0.0 ? change == 0.0 : change / std::abs(ref) < config.plateau_tol) break;
    }
    if (i == config.max_steps) break;
    ad::ParamSet next = out.params.updated_values(e.grad, config.learning_rate);
    if (!next.all_finite()) {
      out.aborted = true;
      break;
    }
    out.params = std::move(next);
    out.steps = i + 1;
  }
  return out;
}

StepResult adapt_once(const ad::ParamSet& theta0, const nn::Batch& train,
                      const meta::Objective& objective, const AdaptConfig& config,
                      std::uint64_t stream, const StepObserver& observer) {
  ad::ParamSet start = theta0.clone();
  if (config.pre_fine_tune) {
    auto p = pre_fine_tune(start, train, objective, config, mix_seed(stream, 1));
    if (p.aborted) return p;
    start = std::move(p.params);
  }
  return fine_tune(start, train, objective, config, mix_seed(stream, 2), observer);
}

AdaptOutcome adapt_and_select(const ad::ParamSet& theta0, const data::TaskDataset& task,
                              const meta::Objective& objective, const std::vector<AdaptConfig>& grid,
                              const SelectOptions& options) {
  if (grid.empty()) throw std::invalid_argument("adapt_and_select: empty grid");
  for (const auto& c : grid) c.validate();
  Rng rng(options.seed);
  AdaptOutcome out;
  out.split = data::split_for_adaptation(task, options.k, rng);
  const auto prec = theta0.empty() ? ad::Precision::f32 : theta0.begin()->value.precision();
  const nn::Batch train = data::make_batch(task, out.split.train, prec);
  const std::uint64_t stream = mix_seed(options.seed, 0x61646170ULL);

  std::vector<double> val(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    // Each row starts from its own copy of theta0.
    const auto r = adapt_once(theta0, train, objective, grid[i], stream);
    val[i] = r.aborted ? std::numeric_limits<double>::quiet_NaN()
                       : meta::mean_eval_loss(objective, objective.calibrated(r.params, train), task,
                                              out.split.val);
  });
  out.validation_losses = val;
  out.chosen_index = meta::argmin_first(val);
  out.chosen = grid[out.chosen_index];

  // Re-run the chosen row; with curves, evaluate the test loss at every step.
  StepObserver observer;
  if (options.curves)
    observer = [&](std::size_t, const ad::ParamSet& p) {
      out.test_curve.push_back(
          meta::mean_eval_loss(objective, objective.calibrated(p, train), task, out.split.test));
    };
  auto r = adapt_once(theta0, train, objective, out.chosen, stream, observer);
  out.adapted = objective.calibrated(r.params, train);
  if (options.curves) out.train_curve = r.losses;
  out.final_train_loss = r.losses.empty() ? std::numeric_limits<double>::quiet_NaN() : r.losses.back();
  const auto scores = meta::score_segments(objective, out.adapted, task, out.split.test);
  out.test = eval::gmean_threshold_metrics(scores, data::labels_of(task, out.split.test));
  return out;
}

}  // namespace metava::adapt
