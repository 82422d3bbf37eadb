// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 100).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metava/ablation/ablation.hpp"
#include "metava/adapt/adaptation.hpp"
#include "metava/autodiff/gradient.hpp"
#include "metava/autodiff/ops.hpp"
#include "metava/cli/commands.hpp"
#include "metava/cli/run_config.hpp"
#include "metava/curriculum/difficulty.hpp"
#include "metava/data/dataset.hpp"
#include "metava/eval/metrics.hpp"
#include "metava/io/checkpoint.hpp"
#include "metava/meta/inner.hpp"
#include "metava/meta/trainer.hpp"
#include "metava/nn/resnet1d.hpp"
#include "metava/util/log.hpp"
#include "metava/util/rng.hpp"

using namespace metava;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ad::Tensor random_tensor(Rng& rng, ad::Shape shape, double lo, double hi) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from_values(std::move(shape), std::move(v), ad::Precision::f64);
}

ad::ParamSet scalar(double v) {
  ad::ParamSet ps;
  ps.add("theta", ad::Tensor::from_values({1}, {v}, ad::Precision::f64));
  return ps;
}

nn::Batch placeholder(int label) {
  nn::Batch b;
  b.inputs = ad::Tensor::zeros({1, 1, 1}, ad::Precision::f64);
  b.labels = {label};
  return b;
}

// L(theta) = theta^2 regardless of the batch.
meta::Objective quadratic() {
  meta::Objective o;
  o.loss = [](const ad::ParamSet& ps, const nn::Batch&, std::uint64_t) {
    return ad::sum(ad::mul(ps["theta"], ps["theta"]));
  };
  o.eval_loss = [o](const ad::ParamSet& ps, const nn::Batch& b) { return o.loss(ps, b, 0); };
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

void meta_gradient_exactness(Outcome& o) {
  const auto t0 = Clock::now();
  nn::TinyConfig tc;
  tc.precision = ad::Precision::f64;
  const auto net = nn::tiny_model(3, tc);
  const std::size_t params = net.params.parameter_count();
  o.require(params <= 500, "tiny_model has at most 500 parameters");
  const auto obj = meta::network_objective(net);
  Rng rng(11);
  std::vector<meta::TaskEpisode> tasks;
  for (int t = 0; t < 2; ++t) {
    auto batch = [&] {
      nn::Batch b;
      b.inputs = random_tensor(rng, {6, 1, tc.input_length}, -1.5, 1.5);
      for (int i = 0; i < 6; ++i) b.labels.push_back(i % 2);
      return b;
    };
    auto support = batch();
    auto query = batch();
    tasks.push_back({"t" + std::to_string(t), support, query, static_cast<std::uint64_t>(t)});
  }
  double worst = 0.0;
  for (std::size_t updates : {1, 2, 3}) {
    meta::MetaConfig c;
    c.update_lr = 0.5;
    c.updates = updates;
    c.gradient = meta::MetaGradient::exact;
    const auto r = meta::meta_outer_loss_and_grad(net.params, tasks, obj, c);
    const auto fd = ad::finite_difference_gradient(
        [&](const ad::ParamSet& ps) {
          ad::GradModeGuard recording(true);
          return meta::meta_outer_loss_and_grad(ps, tasks, obj, c).loss;
        },
        net.params, 1e-5);
    const double e = ad::max_relative_error(r.grad, fd);
    o.detail << " updates=" << updates << ":" << std::setprecision(3) << e;
    worst = std::max(worst, e);
  }
  const double secs = seconds_since(t0);
  o.detail << " params=" << params << " seconds=" << std::setprecision(3) << secs;
  o.require(worst <= 1e-4, "max relative error <= 1e-4");
  o.require(secs < 60.0, "runtime < 1 min");
}

void analytic_toy(Outcome& o) {
  const auto obj = quadratic();
  meta::MetaConfig c;
  c.update_lr = 0.1;
  c.updates = 1;
  c.outer_loss = meta::OuterLoss::final_step;
  const std::vector<meta::TaskEpisode> one{{"toy", placeholder(1), placeholder(1), 1}};
  c.gradient = meta::MetaGradient::exact;
  const double exact = meta::meta_outer_loss_and_grad(scalar(1.0), one, obj, c).grad["theta"][0];
  c.gradient = meta::MetaGradient::first_order;
  const double fo = meta::meta_outer_loss_and_grad(scalar(1.0), one, obj, c).grad["theta"][0];
  // theta1 = (1 - 2 alpha) theta0; d(theta1^2)/d theta0 = 2 (1 - 2 alpha)^2 theta0.
  const double alpha = 0.1, theta0 = 1.0;
  const double oracle = 2 * (1 - 2 * alpha) * (1 - 2 * alpha) * theta0;
  const double oracle_fo = 2 * (1 - 2 * alpha) * theta0;
  o.detail << std::setprecision(17) << " exact=" << exact << " first_order=" << fo;
  o.require(std::abs(exact - 1.28) <= 1e-10 && std::abs(exact - oracle) <= 1e-10, "exact gradient 1.28");
  o.require(std::abs(fo - 1.6) <= 1e-10 && std::abs(fo - oracle_fo) <= 1e-10, "first-order gradient 1.6");
  o.require(exact != fo, "exact and first-order differ");
}

void softmax_prime_properties(Outcome& o) {
  Rng rng(3);
  double worst_sum = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> l(2 + rng.below(50));
    for (auto& x : l) x = rng.uniform(0.001, 4.0);
    const auto v = curriculum::softmax_prime(l);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0));
    for (std::size_t i = 0; i < l.size(); ++i)
      for (std::size_t j = 0; j < l.size(); ++j)
        if (l[i] > l[j] && !(v[i] > v[j])) monotone = false;
  }
  const auto e = curriculum::softmax_prime(std::vector<double>{std::log(2.0), std::log(2.0), std::log(3.0)});
  o.detail << " max |sum-1|=" << std::setprecision(3) << worst_sum;
  o.require(worst_sum <= 1e-9, "sum to 1 within 1e-9");
  o.require(monotone, "strictly monotone");
  o.require(e == std::vector<double>{0.25, 0.25, 0.5}, "(ln2, ln2, ln3) -> (0.25, 0.25, 0.5) exactly");
}

// Selection distribution written out independently of the library: eligible
// tasks have V <= max(e^(iter - MaxIter), batch-th smallest V); each gets
// max(0, 1 - t/iter) / |eligible| and the leftover mass is spread uniformly
// over the eligible tasks.
std::vector<double> expected_frequencies(const std::vector<double>& v, const std::vector<std::size_t>& t,
                                         std::size_t batch, std::size_t iter, std::size_t max_iter) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const double thres = std::max(std::exp(static_cast<double>(iter) - static_cast<double>(max_iter)),
                                sorted[std::min(batch, v.size()) - 1]);
  std::vector<std::size_t> elig;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] <= thres) elig.push_back(k);
  std::vector<double> f(v.size(), 0.0);
  double mass = 0.0;
  for (std::size_t k : elig) {
    f[k] = std::max(0.0, 1.0 - static_cast<double>(t[k]) / static_cast<double>(iter)) / elig.size();
    mass += f[k];
  }
  for (std::size_t k : elig) f[k] += (1.0 - mass) / elig.size();
  return f;
}

void selector_distribution(Outcome& o) {
  struct Fixture {
    std::vector<double> v;
    std::vector<std::size_t> t;
    std::size_t batch, iter;
  };
  const std::vector<Fixture> fixtures{
      {{0.2, 0.3, 0.5}, {0, 0, 0}, 2, 1},
      {{0.2, 0.3, 0.5}, {10, 20, 20}, 2, 50},
      {{0.05, 0.1, 0.15, 0.2, 0.5}, {3, 0, 7, 1, 0}, 2, 10},
      {{0.05, 0.1, 0.15, 0.2, 0.5}, {30, 5, 12, 40, 2}, 3, 49},
      {{0.4, 0.1, 0.1, 0.4}, {0, 0, 0, 0}, 1, 20},
  };
  double worst = 0.0;
  for (std::size_t fi = 0; fi < fixtures.size(); ++fi) {
    const auto& fx = fixtures[fi];
    auto table = curriculum::DifficultyTable::from_values(fx.v, fx.batch, 50);
    table.counts = fx.t;
    Rng rng(mix_seed(21, fi));
    std::vector<double> freq(fx.v.size(), 0.0);
    std::size_t total = 0;
    while (total < 100000) {
      for (auto k : curriculum::select_batch(table, fx.iter, rng)) freq[k] += 1.0;
      total += fx.batch;
    }
    const auto expect = expected_frequencies(fx.v, fx.t, fx.batch, fx.iter, 50);
    for (std::size_t k = 0; k < freq.size(); ++k)
      worst = std::max(worst, std::abs(freq[k] / static_cast<double>(total) - expect[k]));
  }
  o.detail << " max deviation=" << std::setprecision(3) << worst;
  o.require(worst <= 0.01, "frequencies within 0.01");

  const auto wide = curriculum::DifficultyTable::from_values({0.01, 0.04, 0.15, 0.3, 0.5}, 1, 50);
  const auto p = curriculum::selection_probabilities(wide, 50);
  o.require(std::all_of(p.begin(), p.end(), [](double x) { return x > 0.0; }),
            "every task eligible at iter = MaxIter = 50");
}

void pre_fine_tune_oracle(Outcome& o) {
  const auto obj = quadratic();
  auto cfg = [](double beta, std::size_t iters) {
    adapt::AdaptConfig c;
    c.beta1 = c.beta2 = beta;
    c.pft_iterations = iters;
    c.mode = adapt::PreFineTuneMode::literal;
    return c;
  };
  const double one = adapt::pre_fine_tune(scalar(1), placeholder(0), obj, cfg(0.1, 1)).params["theta"][0];
  const double two = adapt::pre_fine_tune(scalar(1), placeholder(0), obj, cfg(0.1, 2)).params["theta"][0];
  o.detail << std::setprecision(17) << " scalar: " << one << ", " << two;
  o.require(one == 0.64 && two == 0.4096, "scalar values 0.64 and 0.4096");

  nn::TinyConfig tc;
  tc.precision = ad::Precision::f64;
  const auto net = nn::tiny_model(7, tc);
  const auto nobj = meta::network_objective(net);
  Rng rng(3);
  nn::Batch b;
  b.inputs = random_tensor(rng, {20, 1, tc.input_length}, -1.0, 1.0);
  for (int i = 0; i < 20; ++i) b.labels.push_back(i % 2);
  double worst = 0.0;
  for (double beta : {0.01, 0.05, 0.2}) {
    for (std::size_t iters : {1, 3, 10}) {
      const auto p = adapt::pre_fine_tune(net.params, b, nobj, cfg(beta, iters));
      ad::ParamSet plain = net.params.clone();
      for (std::size_t s = 0; s < 2 * iters; ++s) {
        const auto at = plain.as_leaves();
        plain = at.updated_values(ad::gradient(nobj.loss(at, b, 0), at), beta);
      }
      for (std::size_t e = 0; e < plain.size(); ++e) {
        const auto& x = plain.entries()[e].value.values();
        const auto& y = p.params.entries()[e].value.values();
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
      }
    }
  }
  o.detail << " max element difference=" << std::setprecision(3) << worst;
  o.require(worst <= 1e-7, "equal to 2 iter plain steps within 1e-7");
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, p = 0, n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) ++p; else ++n;
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[j] == 0) wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
  }
  return wins / (p * n);
}

void metrics_oracles(Outcome& o) {
  Rng rng(1);
  std::size_t auc_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? rng.uniform() : static_cast<double>(rng.below(6)) / 5;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    if (eval::roc_auc(s, y) != brute_auc(s, y)) ++auc_mismatch;
  }
  o.require(auc_mismatch == 0, "roc_auc equals pair counting on 1000 instances");

  // Exhaustive enumeration: every distinct score as a threshold.
  std::size_t ap_mismatch = 0, gmean_mismatch = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(10)) / 10;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    const std::set<double> distinct(s.begin(), s.end());
    const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double N = static_cast<double>(n) - P;
    double ap = 0, prev_recall = 0, best = -1, best_t = 0;
    for (auto it = distinct.rbegin(); it != distinct.rend(); ++it) {
      double tp = 0, fp = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (s[i] >= *it) (y[i] ? tp : fp) += 1;
      ap += (tp / P - prev_recall) * tp / (tp + fp);
      prev_recall = tp / P;
      const double g = std::sqrt((tp / P) * ((N - fp) / N));
      if (g >= best - 1e-15) {
        best = g;
        best_t = *it;
      }
    }
    if (std::abs(eval::pr_auc(s, y) - ap) > 1e-12) ++ap_mismatch;
    const auto m = eval::gmean_threshold_metrics(s, y);
    if (std::abs(m.gmean - best) > 1e-12 || m.threshold != best_t) ++gmean_mismatch;
  }
  o.require(ap_mismatch == 0, "pr_auc matches enumeration");
  o.require(gmean_mismatch == 0, "g-mean threshold matches enumeration");
  const double fixed = eval::roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 0, 1, 0});
  o.require(fixed == 0.75, "(0.9,0.8,0.3,0.1)/(1,0,1,0) -> 0.75");
  o.detail << " auc mismatches=" << auc_mismatch << " ap mismatches=" << ap_mismatch
           << " gmean mismatches=" << gmean_mismatch << " fixed case=" << fixed;
}

data::Record ramp_record(std::size_t n, std::vector<data::Interval> ann = {}) {
  data::Record r;
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.samples[i] = static_cast<double>(i % 11);
  r.annotations = std::move(ann);
  r.subject = "s";
  data::normalize_annotations(r);
  return r;
}

void segmentation_arithmetic(Outcome& o) {
  const auto none = data::segment_record(ramp_record(96000));
  const auto all = data::segment_record(ramp_record(800, {{0, 800}}));
  o.detail << " no-VA=" << none.size() << " all-VA=" << all.size();
  o.require(none.size() == 240 && std::none_of(none.begin(), none.end(), [](auto& s) { return s.label; }),
            "96000 samples without VA -> 240 segments");
  o.require(all.size() == 21 && std::all_of(all.begin(), all.end(), [](auto& s) { return s.label == 1; }),
            "800 samples all VA -> 21 segments");

  Rng rng(29);
  std::size_t bad = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 400 + rng.below(5000);
    std::vector<data::Interval> ann;
    for (std::size_t k = rng.below(6); k > 0; --k) {
      const std::size_t s = rng.below(n - 1);
      ann.push_back({s, std::min(n, s + 1 + rng.below(700))});
    }
    const auto segs = data::segment_record(ramp_record(n, ann), {400, 20, 400, false});
    std::size_t off = 0, i = 0;
    while (off + 400 <= n) {
      bool hit = false;
      for (std::size_t t = off; t < off + 400 && !hit; ++t)
        for (const auto& iv : ann)
          if (t >= iv.start && t < iv.end) hit = true;
      if (i >= segs.size() || segs[i].offset != off || segs[i].label != (hit ? 1 : 0)) ++bad;
      off += hit ? 20 : 400;
      ++i;
    }
    if (i != segs.size()) ++bad;
  }
  o.detail << " fuzz mismatches=" << bad;
  o.require(bad == 0, "labels equal brute-force overlap");
}

struct Benchmark {
  bool ran = false;
  std::string error;
  ablation::AblationReport report;
  std::size_t runs = 0;
  double seconds = 0.0;
};

Benchmark run_benchmark(const fs::path& config, const fs::path& out) {
  Benchmark b;
  try {
    cli::RunConfig c;
    c.load_file(config);
    const auto spec = cli::model_spec(c);
    const auto plan = cli::ablation_plan(c);
    const auto cohort = cli::load_cohort(c);
    b.runs = plan.pretrain_runs;
    std::cerr << "benchmark: " << cohort.train.size() << " train / " << cohort.val.size() << " val / "
              << cohort.test.size() << " test subjects, " << plan.pretrain_runs << " runs\n";
    const auto t0 = Clock::now();
    b.report = ablation::run_ablation(
        cohort, [&](std::uint64_t s) { return spec.build(s); }, plan,
        [t0](const std::string& msg) { std::cerr << std::fixed << std::setprecision(0) << seconds_since(t0) << "s " << msg << '\n'; });
    b.seconds = seconds_since(t0);
    b.ran = true;
    fs::create_directories(out);
    std::ofstream(out / "summary.txt") << [&] {
      std::ostringstream s;
      ablation::write_summary_table(s, b.report.summary);
      return s.str();
    }();
    std::ofstream sc(out / "summary.csv");
    ablation::write_summary_csv(sc, b.report.summary);
    std::ofstream sj(out / "subjects.csv");
    ablation::write_subjects_csv(sj, b.report.subjects);
    std::ofstream h(out / "histograms.csv");
    ablation::write_histograms_csv(h, b.report.diversity);
    std::ofstream t(out / "ttests.csv");
    ablation::write_ttests_csv(t, b.report.diversity);
    std::ofstream pt(out / "pretraining.csv");
    ablation::write_pretraining_csv(pt, b.report.pretraining);
  } catch (const std::exception& e) {
    b.error = e.what();
  }
  return b;
}

void benchmark_ordering(Outcome& o, const Benchmark& b) {
  if (!b.ran) return o.require(false, "benchmark ran: " + b.error);
  auto auc = [&](const std::string& name) {
    for (const auto& r : b.report.summary)
      if (r.combination == name) return r.mean[0];
    return std::nan("");
  };
  const double metava = auc("MetaVA"), mpf = auc("M+PF"), mcf = auc("MC+F"), vanilla = auc("Vanilla");
  o.detail << std::fixed << std::setprecision(4) << " MetaVA=" << metava << " M+PF=" << mpf
           << " MC+F=" << mcf << " M+F=" << auc("M+F") << " Vanilla=" << vanilla
           << " runs=" << b.runs << std::setprecision(0) << " seconds=" << b.seconds;
  o.require(b.runs >= 5, ">= 5 runs");
  o.require(metava >= mpf, "MetaVA >= M+PF");
  o.require(metava >= mcf, "MetaVA >= MC+F");
  o.require(mcf >= vanilla, "MC+F >= Vanilla");
  o.require(metava - vanilla >= 0.03, "MetaVA - Vanilla >= 0.03");
  o.require(b.seconds <= 1800.0, "runtime <= 30 min");
  o.require(b.report.splits_shared, "methods share adaptation splits");
}

void benchmark_diversity(Outcome& o, const Benchmark& b) {
  if (!b.ran) return o.require(false, "benchmark ran: " + b.error);
  const auto& d = b.report.diversity;
  const auto& hm = d.histograms.at(ablation::PretrainMethod::maml);
  const auto& hd = d.histograms.at(ablation::PretrainMethod::direct);
  const std::size_t wm = ablation::worst_bins(hm), wd = ablation::worst_bins(hd);
  double p = std::nan("");
  for (const auto& t : d.tests)
    if (t.a == "maml" && t.b == "direct") p = t.p;
  o.detail << " worst-3-bin subjects maml=" << wm << " direct=" << wd << std::setprecision(3)
           << " one-sided p=" << p << " runs=" << b.runs;
  o.require(b.runs >= 5, ">= 5 runs");
  o.require(wm < wd, "MAML strictly fewer subjects in the worst three bins");
  o.require(p < 0.05, "paired t-test p < 0.05");
}

fs::path write_small_config(const fs::path& dir) {
  const fs::path p = dir / "small.ini";
  std::ofstream f(p);
  f << "[run]\nseed = 5\ndeterministic = true\n"
       "[data]\nval_subjects = 2\ntest_subjects = 2\n"
       "[synthetic]\nsubjects = 8\nduration_s = 60\n"
       "[model]\nkind = tiny\n"
       "[tiny]\nchannels = 4\nkernel = 9\nstride = 8\n"
       "[meta]\nupdate_lr = 0.3\nmeta_lr = 0.05\nk = 3\nbatch_size = 3\nmax_iterations = 3\npatience = 2\nmax_iter = 3\n"
       "[direct]\nlr = 0.1\nminibatch = 8\n"
       "[adapt]\nk = 3\nruns = 2\npft_iterations = 1\nbeta1 = 0.1\nbeta2 = 0.1\nlearning_rate = 0.05\nmax_steps = 15\n"
       "[ablation]\npretrain_runs = 2\n";
  return p;
}

bool bit_equal(const ad::ParamSet& a, const ad::ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries()[i];
    const auto& y = b.entries()[i];
    if (x.name != y.name || x.trainable != y.trainable || x.value.shape() != y.value.shape() ||
        x.value.precision() != y.value.precision())
      return false;
    const auto& xv = x.value.values();
    const auto& yv = y.value.values();
    if (std::memcmp(xv.data(), yv.data(), xv.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

void determinism_and_persistence(Outcome& o, const fs::path& root) {
  const fs::path dir = root / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto config = write_small_config(dir).string();
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::run_cli(args, out, err);
  };
  bool ok = true;
  for (const char* pass : {"a", "b"}) {
    const auto out = (dir / pass).string();
    ok &= run({"pretrain", "--config", config, "--out", out + "/pretrain"}) == 0;
    ok &= run({"adapt", "--config", config, "--checkpoint", out + "/pretrain/checkpoint.mvck", "--out",
               out + "/adapt"}) == 0;
    ok &= run({"ablate", "--config", config, "--out", out + "/ablate"}) == 0;
  }
  o.require(ok, "commands succeed");
  std::size_t compared = 0, differing = 0;
  for (const char* file : {"pretrain/iterations.csv", "pretrain/difficulty.csv", "pretrain/checkpoint.mvck",
                           "adapt/metrics.csv", "adapt/curves.csv", "ablate/summary.csv",
                           "ablate/subjects.csv", "ablate/histograms.csv", "ablate/ttests.csv"}) {
    const auto a = slurp(dir / "a" / file), b = slurp(dir / "b" / file);
    ++compared;
    if (a.empty() || a != b) {
      ++differing;
      o.detail << " differs:" << file;
    }
  }
  o.require(differing == 0, "identical seeds give byte-identical outputs");

  const auto path = dir / "a" / "pretrain" / "checkpoint.mvck";
  bool round_trip = false;
  try {
    const auto ck = io::read_checkpoint(path);
    const auto again = dir / "again.mvck";
    io::write_checkpoint(ck, again);
    const auto back = io::read_checkpoint(again);
    round_trip = slurp(again) == slurp(path) && bit_equal(ck.params, back.params) &&
                 back.config == ck.config && back.iteration == ck.iteration &&
                 std::memcmp(&back.best_validation, &ck.best_validation, sizeof(double)) == 0 &&
                 back.rng_state == ck.rng_state;
  } catch (const std::exception& e) {
    o.detail << " checkpoint error: " << e.what();
  }
  o.require(round_trip, "checkpoint round trip is bit-exact");
  o.detail << " files compared=" << compared;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string benchmark_config = METAVA_BENCHMARK_CONFIG;
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--benchmark-config", benchmark_config, "INI file for criteria 8 and 9")->capture_default_str();
  app.add_option("--out", out, "directory for benchmark and determinism outputs")->capture_default_str();
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  log::set_level(log::Level::error);

  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  Benchmark bench;
  if (wanted(8) || wanted(9)) bench = run_benchmark(benchmark_config, fs::path(out) / "benchmark");

  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"meta-gradient exactness", meta_gradient_exactness},
      {"analytic MAML toy", analytic_toy},
      {"softmax-prime properties", softmax_prime_properties},
      {"CL-selector distribution", selector_distribution},
      {"pre-fine-tune oracle", pre_fine_tune_oracle},
      {"metrics oracles", metrics_oracles},
      {"segmentation arithmetic", segmentation_arithmetic},
      {"synthetic benchmark ordering", [&](Outcome& o) { benchmark_ordering(o, bench); }},
      {"diversity histogram", [&](Outcome& o) { benchmark_diversity(o, bench); }},
      {"determinism and persistence", [&](Outcome& o) { determinism_and_persistence(o, out); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted(n)) continue;
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << criteria[i].first << " |"
              << o.detail.str() << std::endl;
  }
  return std::min(failed, 100);
}
