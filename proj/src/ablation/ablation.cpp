#include "metava/ablation/ablation.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "metava/util/parallel.hpp"

namespace metava::ablation {

using nlohmann::json;

const char* to_string(PretrainMethod m) {
  switch (m) {
    case PretrainMethod::maml_cl: return "maml+cl";
    case PretrainMethod::maml: return "maml";
    case PretrainMethod::direct: return "direct";
  }
  return "?";
}

const char* to_string(AdaptMethod m) { return m == AdaptMethod::pre_fine_tune ? "pre-fine-tune" : "fine-tune"; }

PretrainMethod parse_pretrain_method(const std::string& s) {
  if (s == "maml+cl") return PretrainMethod::maml_cl;
  if (s == "maml") return PretrainMethod::maml;
  if (s == "direct") return PretrainMethod::direct;
  throw std::invalid_argument("unknown pre-training method '" + s + "' (maml+cl | maml | direct)");
}

AdaptMethod parse_adapt_method(const std::string& s) {
  if (s == "pre-fine-tune") return AdaptMethod::pre_fine_tune;
  if (s == "fine-tune") return AdaptMethod::fine_tune;
  throw std::invalid_argument("unknown adaptation method '" + s + "' (pre-fine-tune | fine-tune)");
}

std::vector<Combination> standard_combinations() {
  return {{"MetaVA", PretrainMethod::maml_cl, AdaptMethod::pre_fine_tune},
          {"MC+F", PretrainMethod::maml_cl, AdaptMethod::fine_tune},
          {"M+PF", PretrainMethod::maml, AdaptMethod::pre_fine_tune},
          {"M+F", PretrainMethod::maml, AdaptMethod::fine_tune},
          {"Vanilla", PretrainMethod::direct, AdaptMethod::fine_tune}};
}

namespace {

json grid_json(const adapt::AdaptGrid& g) {
  return {{"pre_fine_tune", g.pre_fine_tune}, {"pft_iterations", g.pft_iterations},
          {"beta1", g.beta1},                 {"beta2", g.beta2},
          {"learning_rate", g.learning_rate}, {"mode", adapt::to_string(g.mode)},
          {"max_steps", g.max_steps},         {"plateau_tol", g.plateau_tol}};
}

}  // namespace

json to_json(const AblationPlan& plan) {
  json combos = json::array();
  for (const auto& c : plan.combinations)
    combos.push_back({{"name", c.name}, {"pretrain", to_string(c.pretrain)}, {"adapt", to_string(c.adapt)}});
  return {{"pretrain_runs", plan.pretrain_runs},
          {"adapt_runs", plan.adapt_runs},
          {"seed", plan.seed},
          {"k", plan.k},
          {"meta", meta::to_json(plan.meta)},
          {"direct", {{"lr", plan.direct.lr}, {"minibatch", plan.direct.minibatch}}},
          {"pre_fine_tune_grid", grid_json(plan.pre_fine_tune_grid)},
          {"fine_tune_grid", grid_json(plan.fine_tune_grid)},
          {"combinations", combos}};
}

meta::TrainResult pretrain(PretrainMethod method, const Cohort& cohort, const ad::ParamSet& theta_init,
                           const meta::Objective& objective, const meta::MetaConfig& config,
                           const meta::DirectConfig& direct) {
  meta::MetaConfig c = config;
  switch (method) {
    case PretrainMethod::maml_cl:
      c.selection = meta::TaskSelection::curriculum;
      return meta::meta_train(cohort.train, cohort.val, theta_init, objective, c);
    case PretrainMethod::maml:
      c.selection = meta::TaskSelection::uniform;
      return meta::meta_train(cohort.train, cohort.val, theta_init, objective, c);
    case PretrainMethod::direct:
      return meta::direct_pretrain(cohort.train, cohort.val, theta_init, objective, c, direct);
  }
  throw std::logic_error("unknown pre-training method");
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::uint64_t split_hash(const std::string& subject, const data::AdaptSplit& s) {
  std::uint64_t h = data::episode_hash(subject, s.train);
  h = data::episode_hash(subject, s.val, h);
  return data::episode_hash(subject, s.test, h);
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<SubjectResult>& results,
                                  const std::vector<Combination>& combinations) {
  std::vector<SummaryRow> rows;
  for (const auto& c : combinations) {
    std::map<std::size_t, std::array<std::vector<double>, 4>> per_run;
    for (const auto& r : results) {
      if (r.combination != c.name) continue;
      auto& m = per_run[r.run];
      m[0].push_back(r.metrics.roc_auc);
      m[1].push_back(r.metrics.pr_auc);
      m[2].push_back(r.metrics.accuracy);
      m[3].push_back(r.metrics.f1);
    }
    SummaryRow row;
    row.combination = c.name;
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> run_means;
      for (const auto& [run, m] : per_run) run_means.push_back(mean_of(m[k]));
      if (run_means.empty()) continue;
      row.mean[k] = mean_of(run_means);
      row.std[k] = sample_std(run_means);
    }
    for (const auto& [run, m] : per_run) row.samples += m[0].size();
    rows.push_back(row);
  }
  return rows;
}

Diversity diversity_analysis(const std::vector<std::string>& subjects,
                             const std::map<PretrainMethod, std::vector<double>>& losses) {
  Diversity d;
  d.subjects = subjects;
  d.losses = losses;
  // One normalizer across methods keeps the histograms comparable.
  for (const auto& [m, v] : losses)
    for (double x : v) d.normalizer = std::max(d.normalizer, x);
  for (const auto& [m, v] : losses) d.histograms[m] = eval::loss_histogram(v, 0.1, d.normalizer);
  auto test = [&](PretrainMethod a, PretrainMethod b) {
    if (!losses.count(a) || !losses.count(b) || losses.at(a).size() < 2) return;
    const auto& x = losses.at(a);
    const auto& y = losses.at(b);
    double diff = 0;
    for (std::size_t i = 0; i < x.size(); ++i) diff += (x[i] - y[i]) / static_cast<double>(x.size());
    d.tests.push_back({to_string(a), to_string(b), eval::paired_t_test_one_sided(x, y), diff});
  };
  test(PretrainMethod::maml, PretrainMethod::direct);
  test(PretrainMethod::maml_cl, PretrainMethod::direct);
  test(PretrainMethod::maml_cl, PretrainMethod::maml);
  return d;
}

std::size_t worst_bins(const std::vector<std::size_t>& h, std::size_t bins) {
  std::size_t n = 0;
  for (std::size_t i = h.size() > bins ? h.size() - bins : 0; i < h.size(); ++i) n += h[i];
  return n;
}

std::uint64_t adaptation_seed(std::uint64_t run_seed, std::size_t subject, std::size_t repeat) {
  return mix_seed(mix_seed(mix_seed(run_seed, 0x73706c6974ULL), subject), repeat);
}

AblationReport run_ablation(const Cohort& cohort, const ModelFactory& factory,
                            const AblationPlan& plan, const Progress& progress) {
  if (cohort.train.empty() || cohort.val.empty() || cohort.test.empty())
    throw std::invalid_argument("ablation needs train, validation and held-out subjects");
  if (plan.pretrain_runs == 0 || plan.adapt_runs == 0)
    throw std::invalid_argument("ablation needs at least one run of each kind");
  const auto start = std::chrono::steady_clock::now();
  auto note = [&](const std::string& s) {
    if (progress) progress(s);
  };

  std::set<PretrainMethod> methods;
  for (const auto& c : plan.combinations) methods.insert(c.pretrain);
  // Per-subject pre-trained losses for the histogram always cover MAML and
  // direct pre-training, whichever combinations run.
  std::set<PretrainMethod> analysed = methods;
  analysed.insert(PretrainMethod::maml);
  analysed.insert(PretrainMethod::direct);

  AblationReport report;
  std::map<PretrainMethod, std::vector<double>> loss_sum;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::uint64_t> hashes;
  const auto pft_grid = plan.pre_fine_tune_grid.expand();
  const auto ft_grid = plan.fine_tune_grid.expand();

  for (std::size_t run = 0; run < plan.pretrain_runs; ++run) {
    const std::uint64_t run_seed = mix_seed(plan.seed, run);
    const nn::Network net = factory(run_seed);
    const meta::Objective objective = meta::network_objective(net);
    meta::MetaConfig mc = plan.meta;
    mc.seed = run_seed;
    mc.k = plan.k;

    std::map<PretrainMethod, ad::ParamSet> theta;
    for (PretrainMethod m : analysed) {
      note("run " + std::to_string(run) + ": pre-training " + to_string(m));
      const auto r = pretrain(m, cohort, net.params, objective, mc, plan.direct);
      report.pretraining.push_back({m, run, r.initial_validation, r.best.best_validation,
                                    r.best.iteration, r.iterations});
      theta[m] = r.best.params;
      // Loss of the pre-trained weights on every pre-training subject after
      // the same K-shot adaptation used for validation.
      const auto l = meta::adapted_task_losses(theta[m], cohort.train, objective, mc);
      auto& acc = loss_sum[m];
      acc.resize(l.size(), 0.0);
      for (std::size_t i = 0; i < l.size(); ++i) acc[i] += l[i] / static_cast<double>(plan.pretrain_runs);
    }

    for (const auto& combo : plan.combinations) {
      note("run " + std::to_string(run) + ": adapting with " + combo.name);
      const auto& grid = combo.adapt == AdaptMethod::pre_fine_tune ? pft_grid : ft_grid;
      const std::size_t jobs = cohort.test.size() * plan.adapt_runs;
      std::vector<SubjectResult> out(jobs);
      parallel_for(jobs, [&](std::size_t j) {
        const std::size_t s = j / plan.adapt_runs, a = j % plan.adapt_runs;
        const auto& task = cohort.test[s];
        adapt::SelectOptions opt{plan.k, adaptation_seed(run_seed, s, a), true};
        const auto o = adapt::adapt_and_select(theta.at(combo.pretrain), task, objective, grid, opt);
        auto& r = out[j];
        r.combination = combo.name;
        r.run = run;
        r.adapt_run = a;
        r.subject = task.subject();
        r.metrics = o.test;
        r.chosen = adapt::to_json(o.chosen);
        r.split_hash = split_hash(task.subject(), o.split);
        r.final_train_loss = o.final_train_loss;
        r.train_curve = o.train_curve;
        r.test_curve = o.test_curve;
      });
      for (auto& r : out) {
        const auto key = std::make_tuple(r.run, r.adapt_run, r.subject);
        auto [it, fresh] = hashes.try_emplace(key, r.split_hash);
        if (!fresh && it->second != r.split_hash) report.splits_shared = false;
        report.subjects.push_back(std::move(r));
      }
    }
  }

  report.summary = summarize(report.subjects, plan.combinations);
  std::vector<std::string> ids;
  for (const auto& t : cohort.train) ids.push_back(t.subject());
  report.diversity = diversity_analysis(ids, loss_sum);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  const auto old = out.precision(17);
  out << "method,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std,accuracy_mean,accuracy_std,f1_mean,f1_std,samples\n";
  for (const auto& r : rows) {
    out << r.combination;
    for (std::size_t k = 0; k < 4; ++k) out << ',' << r.mean[k] << ',' << r.std[k];
    out << ',' << r.samples << '\n';
  }
  out.precision(old);
}

void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << std::left << std::setw(10) << "method";
  for (const char* h : {"ROC-AUC", "PR-AUC", "Accuracy", "F1"}) out << std::setw(18) << h;
  out << '\n' << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::setw(10) << r.combination;
    for (std::size_t k = 0; k < 4; ++k) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << r.mean[k] << "+-" << r.std[k];
      out << std::setw(18) << cell.str();
    }
    out << '\n';
  }
  out << std::defaultfloat << std::right;
}

void write_subjects_csv(std::ostream& out, const std::vector<SubjectResult>& results) {
  const auto old = out.precision(17);
  out << "method,run,adapt_run,subject,roc_auc,pr_auc,accuracy,f1,threshold,tp,fp,tn,fn,final_train_loss,split_hash,chosen\n";
  for (const auto& r : results) {
    const auto& m = r.metrics;
    std::string chosen = r.chosen.dump();
    for (auto& c : chosen)
      if (c == ',') c = ';';
    out << r.combination << ',' << r.run << ',' << r.adapt_run << ',' << r.subject << ',' << m.roc_auc << ','
        << m.pr_auc << ',' << m.accuracy << ',' << m.f1 << ',' << m.threshold << ',' << m.tp << ',' << m.fp
        << ',' << m.tn << ',' << m.fn << ',' << r.final_train_loss << ',' << std::hex << r.split_hash
        << std::dec << ',' << chosen << '\n';
  }
  out.precision(old);
}

void write_curves_csv(std::ostream& out, const std::vector<SubjectResult>& results) {
  const auto old = out.precision(17);
  out << "method,run,adapt_run,subject,step,train_loss,test_loss\n";
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.train_curve.size(); ++i) {
      out << r.combination << ',' << r.run << ',' << r.adapt_run << ',' << r.subject << ',' << i << ','
          << r.train_curve[i] << ',';
      if (i < r.test_curve.size()) out << r.test_curve[i];
      out << '\n';
    }
  out.precision(old);
}

void write_histograms_csv(std::ostream& out, const Diversity& d) {
  out << "method";
  for (int b = 0; b < 10; ++b) out << ",bin" << b + 1;
  out << '\n';
  for (const auto& [m, h] : d.histograms) {
    out << to_string(m);
    for (auto c : h) out << ',' << c;
    out << '\n';
  }
  const auto old = out.precision(17);
  out << "\nsubject";
  for (const auto& [m, v] : d.losses) out << ',' << to_string(m);
  out << '\n';
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    out << d.subjects[i];
    for (const auto& [m, v] : d.losses) out << ',' << v[i];
    out << '\n';
  }
  out.precision(old);
}

void write_ttests_csv(std::ostream& out, const Diversity& d) {
  const auto old = out.precision(17);
  out << "lower,higher,mean_difference,p_value\n";
  for (const auto& t : d.tests) out << t.a << ',' << t.b << ',' << t.mean_difference << ',' << t.p << '\n';
  out.precision(old);
}

void write_pretraining_csv(std::ostream& out, const std::vector<PretrainRecord>& records) {
  const auto old = out.precision(17);
  out << "method,run,initial_validation,best_validation,best_iteration,iterations\n";
  for (const auto& r : records)
    out << to_string(r.method) << ',' << r.run << ',' << r.initial_validation << ',' << r.best_validation << ','
        << r.best_iteration << ',' << r.iterations << '\n';
  out.precision(old);
}

}  // namespace metava::ablation
