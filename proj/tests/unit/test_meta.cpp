#include <doctest.h>

#include <cmath>
#include <sstream>

#include "metava/autodiff/gradient.hpp"
#include "metava/autodiff/ops.hpp"
#include "metava/data/synthetic.hpp"
#include "metava/meta/inner.hpp"
#include "metava/meta/trainer.hpp"
#include "metava/nn/resnet1d.hpp"
#include "test_support.hpp"

using namespace metava;
using namespace metava::meta;

namespace {

ad::ParamSet scalar(double v) {
  ad::ParamSet ps;
  ps.add("theta", ad::Tensor::from_values({1}, {v}, ad::Precision::f64));
  return ps;
}

nn::Batch tagged(int label) {
  nn::Batch b;
  b.inputs = ad::Tensor::zeros({1, 1, 1}, ad::Precision::f64);
  b.labels = {label};
  return b;
}

// L = theta^2 on every batch.
Objective quadratic() {
  Objective o;
  o.loss = [](const ad::ParamSet& ps, const nn::Batch&, std::uint64_t) {
    return ad::sum(ad::mul(ps["theta"], ps["theta"]));
  };
  o.eval_loss = [o](const ad::ParamSet& ps, const nn::Batch& b) { return o.loss(ps, b, 0); };
  return o;
}

// Support batches (label 0) see a linear loss 3 theta, query batches theta^2.
Objective linear_support() {
  Objective o;
  o.loss = [](const ad::ParamSet& ps, const nn::Batch& b, std::uint64_t) {
    const auto& t = ps["theta"];
    return b.labels[0] == 0 ? ad::sum(ad::mul(t, 3.0)) : ad::sum(ad::mul(t, t));
  };
  return o;
}

TaskEpisode toy_episode(int support_label = 1) { return {"toy", tagged(support_label), tagged(1), 1}; }

MetaConfig toy_config() {
  MetaConfig c;
  c.update_lr = 0.1;
  c.updates = 1;
  c.outer_loss = OuterLoss::final_step;
  return c;
}

nn::Batch random_batch(Rng& rng, std::size_t n, std::size_t len) {
  nn::Batch b;
  b.inputs = testing::random_tensor(rng, {n, 1, len}, -1.5, 1.5);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % 2));
  return b;
}

nn::Network tiny64() {
  nn::TinyConfig tc;
  tc.precision = ad::Precision::f64;
  return nn::tiny_model(3, tc);
}

const std::vector<data::TaskDataset>& cohort() {
  static const auto c = data::generate_synthetic_cohort(12, 5);
  return c;
}

nn::Network tiny400(std::uint64_t seed = 1) {
  nn::TinyConfig tc;
  tc.input_length = 400;
  tc.channels = 8;
  tc.kernel = 9;
  return nn::tiny_model(seed, tc);
}

}  // namespace

TEST_CASE("inner adaptation on the scalar toy") {
  const auto obj = quadratic();
  const auto r = inner_adapt(scalar(1.0), tagged(0), obj, 0.1, 2, false);
  REQUIRE(r.trajectory.size() == 2);
  CHECK(r.trajectory[0]["theta"][0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(r.trajectory[1]["theta"][0] == doctest::Approx(0.64).epsilon(1e-15));
  CHECK(r.support_losses == std::vector<double>{1.0, r.trajectory[0]["theta"][0] * r.trajectory[0]["theta"][0]});
  CHECK_THROWS_AS(inner_adapt(scalar(1.0), tagged(0), obj, 0.1, 0, false), std::invalid_argument);

  const auto still = inner_adapt(scalar(1.0), tagged(0), obj, 0.0, 3, false);
  for (const auto& t : still.trajectory) CHECK(t["theta"][0] == 1.0);

  const auto theta0 = scalar(0.7);
  const auto snap = theta0.clone();
  inner_adapt(theta0, tagged(0), obj, 0.3, 4, false);
  inner_adapt(theta0.as_leaves(), tagged(0), obj, 0.3, 4, true);
  CHECK(theta0.value_equal(snap));
}

TEST_CASE("meta gradient on the scalar toy") {
  const auto obj = quadratic();
  auto c = toy_config();
  const std::vector<TaskEpisode> one{toy_episode()};
  for (auto mode : {MetaGradient::exact, MetaGradient::hvp_fd}) {
    c.gradient = mode;
    const auto r = meta_outer_loss_and_grad(scalar(1.0), one, obj, c);
    CHECK(std::abs(r.loss - 0.64) <= 1e-12);
    CHECK(std::abs(r.grad["theta"][0] - 1.28) <= (mode == MetaGradient::exact ? 1e-12 : 1e-7));
  }
  c.gradient = MetaGradient::exact;
  const std::vector<TaskEpisode> two{toy_episode(), toy_episode()};
  const auto r2 = meta_outer_loss_and_grad(scalar(1.0), two, obj, c);
  CHECK(std::abs(r2.loss - 1.28) <= 1e-12);
  CHECK(std::abs(r2.grad["theta"][0] - 2.56) <= 1e-12);
  CHECK(r2.task_losses.size() == 2);

  c.gradient = MetaGradient::first_order;
  const auto fo = meta_outer_loss_and_grad(scalar(1.0), one, obj, c);
  CHECK(std::abs(fo.grad["theta"][0] - 1.6) <= 1e-12);

  // Sum over steps with two updates: L = (0.8 t)^2 + (0.64 t)^2.
  c.gradient = MetaGradient::exact;
  c.updates = 2;
  c.outer_loss = OuterLoss::sum_over_steps;
  const auto s = meta_outer_loss_and_grad(scalar(1.0), one, obj, c);
  CHECK(std::abs(s.loss - (0.64 + 0.4096)) <= 1e-12);
  CHECK(std::abs(s.grad["theta"][0] - 2 * (0.64 + 0.4096)) <= 1e-12);
  c.gradient = MetaGradient::hvp_fd;
  CHECK(std::abs(meta_outer_loss_and_grad(scalar(1.0), one, obj, c).grad["theta"][0] - 2 * (0.64 + 0.4096)) <= 1e-6);
}

TEST_CASE("first-order equals exact when the support loss is linear") {
  const auto obj = linear_support();
  auto c = toy_config();
  const std::vector<TaskEpisode> one{toy_episode(0)};
  c.gradient = MetaGradient::exact;
  const auto ex = meta_outer_loss_and_grad(scalar(1.0), one, obj, c);
  c.gradient = MetaGradient::first_order;
  const auto fo = meta_outer_loss_and_grad(scalar(1.0), one, obj, c);
  // theta_1 = 1 - 0.3, dL/dtheta0 = 2 theta_1.
  CHECK(std::abs(ex.grad["theta"][0] - 1.4) <= 1e-12);
  CHECK(ex.grad["theta"][0] == doctest::Approx(fo.grad["theta"][0]).epsilon(1e-14));
}

TEST_CASE("exact meta-gradient matches finite differences on tiny_model") {
  const auto net = tiny64();
  REQUIRE(net.params.parameter_count() <= 500);
  const auto obj = network_objective(net);
  Rng rng(11);
  std::vector<TaskEpisode> tasks;
  for (int t = 0; t < 2; ++t)
    tasks.push_back({"t" + std::to_string(t), random_batch(rng, 6, 16), random_batch(rng, 6, 16),
                     static_cast<std::uint64_t>(t)});
  for (std::size_t updates : {1, 2, 3}) {
    for (auto outer : {OuterLoss::sum_over_steps, OuterLoss::final_step}) {
      MetaConfig c;
      c.update_lr = 0.5;
      c.updates = updates;
      c.outer_loss = outer;
      c.gradient = MetaGradient::exact;
      const auto r = meta_outer_loss_and_grad(net.params, tasks, obj, c);
      const auto fd = ad::finite_difference_gradient(
          [&](const ad::ParamSet& ps) {
            ad::GradModeGuard recording(true);
            return meta_outer_loss_and_grad(ps, tasks, obj, c).loss;
          },
          net.params, 1e-5);
      CHECK(ad::max_relative_error(r.grad, fd, 1e-4) <= 1e-4);

      c.gradient = MetaGradient::hvp_fd;
      c.hvp_eps = 1e-5;
      const auto h = meta_outer_loss_and_grad(net.params, tasks, obj, c);
      CHECK(ad::max_relative_error(r.grad, h.grad, 1e-3) <= 1e-3);
      CHECK(h.loss == doctest::Approx(r.loss).epsilon(1e-12));
    }
  }
}

TEST_CASE("meta validation") {
  // Positives sit at +0.5, negatives at -0.5.
  Rng noise(2);
  std::vector<data::Segment> segs;
  for (int i = 0; i < 60; ++i) {
    data::Segment s;
    s.label = i % 2;
    s.offset = static_cast<std::size_t>(i);
    for (int t = 0; t < 400; ++t) s.samples.push_back((s.label ? 0.5 : -0.5) + 0.1 * noise.normal());
    segs.push_back(s);
  }
  const std::vector<data::TaskDataset> tasks{data::TaskDataset("separable", segs)};
  const auto net = tiny400();
  const auto obj = network_objective(net);
  MetaConfig c;
  c.update_lr = 0.5;
  c.updates = 5;
  const std::vector<data::TaskDataset> val{tasks[0]};
  const auto snap = net.params.clone();
  const double a = meta_validate(net.params, val, obj, c);
  CHECK(net.params.value_equal(snap));
  CHECK(meta_validate(net.params, val, obj, c) == a);

  // Untrained loss on the same held-out segments, without adaptation.
  Rng rng(mix_seed(c.seed ^ 0x76616c6964ULL, 0));
  const auto ep = data::sample_episode(tasks[0], c.k, rng);
  const auto support = data::make_batch(tasks[0], ep.support);
  const double untrained = mean_eval_loss(obj, obj.calibrated(net.params, support), tasks[0],
                                          data::complement(tasks[0], ep.support));
  CHECK(a < untrained);
}

TEST_CASE("early stopping rule") {
  const auto& tasks = cohort();
  const auto net = tiny400();
  const auto obj = network_objective(net);
  MetaConfig c;
  c.batch_size = 3;
  c.patience = 1;
  c.max_iterations = 50;
  c.selection = TaskSelection::uniform;
  TrainHooks hooks;
  hooks.validation = [](std::size_t, const ad::ParamSet&) { return 0.5; };
  const std::vector<data::TaskDataset> train(tasks.begin(), tasks.begin() + 6);
  const auto r = meta_train(train, {tasks[6]}, net.params, obj, c, hooks);
  CHECK(r.iterations == 2);
  CHECK(r.early_stopped);
  CHECK(r.best.iteration == 1);
  CHECK(r.log.size() == 3);

  const auto d = direct_pretrain(train, {tasks[6]}, net.params, obj, c, {}, hooks);
  CHECK(d.iterations == 2);
  CHECK(d.best.iteration == 1);

  c.patience = 3;
  const auto r3 = meta_train(train, {tasks[6]}, net.params, obj, c, hooks);
  CHECK(r3.iterations == 4);

  c.batch_size = 7;
  CHECK_THROWS_AS(meta_train(train, {tasks[6]}, net.params, obj, c, hooks), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with the last good state") {
  const auto& tasks = cohort();
  const auto net = tiny400();
  auto obj = network_objective(net);
  MetaConfig c;
  c.batch_size = 2;
  c.selection = TaskSelection::uniform;
  TrainHooks hooks;
  hooks.validation = [](std::size_t it, const ad::ParamSet&) {
    return it >= 3 ? std::nan("") : 1.0 / (1.0 + static_cast<double>(it));
  };
  const std::vector<data::TaskDataset> train(tasks.begin(), tasks.begin() + 3);
  try {
    meta_train(train, {tasks[6]}, net.params, obj, c, hooks);
    FAIL("expected an abort");
  } catch (const TrainingAborted& e) {
    CHECK(e.iteration == 3);
    CHECK(e.last_good.iteration == 2);
    CHECK(e.last_good.params.all_finite());
  }
}

TEST_CASE("meta training reduces validation loss and is deterministic") {
  const auto& tasks = cohort();
  const auto net = tiny400();
  const auto obj = network_objective(net);
  MetaConfig c;
  c.update_lr = 0.3;
  c.meta_lr = 0.05;
  c.updates = 1;
  c.batch_size = 4;
  c.max_iterations = 25;
  c.patience = 5;
  c.seed = 9;
  const std::vector<data::TaskDataset> train(tasks.begin(), tasks.begin() + 9);
  const std::vector<data::TaskDataset> val(tasks.begin() + 9, tasks.end());
  const auto a = meta_train(train, val, net.params, obj, c);
  CHECK(a.best.best_validation < a.initial_validation);
  REQUIRE(a.difficulty);
  CHECK(a.difficulty->completed == a.iterations);
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < a.log.size(); ++i) {
    running = std::min(running, a.log[i].val_loss);
    if (a.log[i].iteration == a.best.iteration) CHECK(a.log[i].val_loss == running);
  }
  CHECK(a.best.best_validation == running);

  const auto b = meta_train(train, val, net.params, obj, c);
  CHECK(io::serialize(a.best) == io::serialize(b.best));
  std::ostringstream la, lb;
  write_iteration_log(la, a.log, false);
  write_iteration_log(lb, b.log, false);
  CHECK(la.str() == lb.str());
}

TEST_CASE("direct pre-training batch composition") {
  const auto& tasks = cohort();
  const auto net = tiny400();
  auto obj = network_objective(net);
  std::size_t pos = 0, neg = 0;
  const auto base = obj.loss;
  obj.loss = [&, base](const ad::ParamSet& ps, const nn::Batch& b, std::uint64_t s) {
    for (int l : b.labels) (l == 1 ? pos : neg)++;
    return base(ps, b, s);
  };
  MetaConfig c;
  c.max_iterations = 1;
  TrainHooks hooks;
  hooks.validation = [](std::size_t, const ad::ParamSet&) { return 1.0; };
  const std::vector<data::TaskDataset> train(tasks.begin(), tasks.begin() + 10);
  const auto r = direct_pretrain(train, {tasks[10]}, net.params, obj, c, {0.01, 64}, hooks);
  CHECK(pos == 180);
  CHECK(neg == 180);
  CHECK(r.log[1].tasks.size() == 9);
  CHECK_FALSE(r.best.params.value_equal(net.params));
}

TEST_CASE("grid search") {
  const auto& tasks = cohort();
  const auto net = tiny400();
  const auto obj = network_objective(net);
  MetaConfig base;
  base.batch_size = 2;
  base.max_iterations = 1;
  base.selection = TaskSelection::uniform;
  const std::vector<data::TaskDataset> train(tasks.begin(), tasks.begin() + 3);
  const std::vector<data::TaskDataset> val{tasks[10]};

  MetaGrid single{{5e-3}, {1e-3}, {1}};
  auto g = grid_search(single, base, train, val, net.params, obj);
  CHECK(g.rows.size() == 1);
  CHECK(g.best_index == 0);
  CHECK(g.best_config.update_lr == 5e-3);

  // Identical rows tie; the first one wins.
  MetaGrid ties{{1e-2, 1e-2}, {1e-2}, {1}};
  g = grid_search(ties, base, train, val, net.params, obj);
  CHECK(g.rows[0].best_validation == g.rows[1].best_validation);
  CHECK(g.best_index == 0);

  g = grid_search(MetaGrid{}, base, train, val, net.params, obj);
  CHECK(g.rows.size() == 27);
  std::vector<double> v;
  for (const auto& r : g.rows) v.push_back(r.best_validation);
  CHECK(g.rows[g.best_index].best_validation == *std::min_element(v.begin(), v.end()));
  CHECK(g.rows[1].params.at("updates") == 3);
  CHECK(g.rows[3].params.at("meta_lr") == 5e-3);
  std::ostringstream table;
  write_grid_table(table, g.rows);
  const std::string text = table.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 28);

  const auto d = direct_grid_search(DirectGrid{}, base, train, val, net.params, obj);
  CHECK(d.rows.size() == 9);

  CHECK(argmin_first(std::vector<double>{3, 1, 1, 2}) == 1);
  CHECK(argmin_first(std::vector<double>{std::nan(""), 2}) == 1);
  CHECK_THROWS(grid_search(MetaGrid{{}, {1e-2}, {1}}, base, train, val, net.params, obj));
}

TEST_CASE("config json round trip") {
  MetaConfig c;
  c.update_lr = 5e-3;
  c.gradient = MetaGradient::hvp_fd;
  c.outer_loss = OuterLoss::final_step;
  c.selection = TaskSelection::uniform;
  c.seed = 77;
  const auto back = meta_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS(parse_meta_gradient("second-order"));
  c.updates = 0;
  CHECK_THROWS(c.validate());
}
