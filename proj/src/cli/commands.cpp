#include "metava/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "metava/cli/run_config.hpp"
#include "metava/curriculum/difficulty.hpp"
#include "metava/data/record.hpp"
#include "metava/io/checkpoint.hpp"
#include "metava/util/parallel.hpp"

namespace metava::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  RunConfig config;
  fs::path out = "out";
  std::string checkpoint;
  std::ostream* log = nullptr;
  std::ostream* err = nullptr;
  bool deterministic() const { return config.boolean("run.deterministic"); }
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

void write_config(const Context& ctx) {
  fs::create_directories(ctx.out);
  auto f = open_out(ctx.out / "config.ini");
  ctx.config.write_ini(f);
}

// Parameters of `model` filled from the checkpoint; names, shapes and
// precision must agree.
ad::ParamSet load_matching(const std::string& path, const nn::Network& model, io::Checkpoint* header) {
  if (path.empty()) throw CheckpointMismatch("no checkpoint given (use --checkpoint)");
  if (!fs::exists(path)) throw CheckpointMismatch("checkpoint '" + path + "' does not exist");
  io::Checkpoint ck = io::read_checkpoint(path);
  const auto& want = model.params.entries();
  const auto& have = ck.params.entries();
  if (want.size() != have.size())
    throw CheckpointMismatch("checkpoint has " + std::to_string(have.size()) + " tensors, the model " +
                             std::to_string(want.size()));
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != have[i].name || want[i].value.shape() != have[i].value.shape() ||
        want[i].value.precision() != have[i].value.precision())
      throw CheckpointMismatch("checkpoint tensor '" + have[i].name + "' does not match model tensor '" +
                               want[i].name + "'");
  }
  if (header) *header = ck;
  return ck.params;
}

ablation::PretrainMethod method_of(const Context& ctx) {
  try {
    return ablation::parse_pretrain_method(ctx.config.text("run.method"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ablation::AdaptMethod adapt_method_of(const Context& ctx) {
  try {
    return ablation::parse_adapt_method(ctx.config.text("run.adapt_method"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void write_checkpoint_with_context(const Context& ctx, io::Checkpoint ck, const ModelSpec& spec) {
  ck.config["model"] = spec.to_json();
  ck.config["run"] = ctx.config.to_json();
  io::write_checkpoint(ck, ctx.out / "checkpoint.mvck");
}

int cmd_pretrain(Context& ctx) {
  const auto method = method_of(ctx);
  const auto spec = model_spec(ctx.config);
  auto mc = meta_config(ctx.config);
  const auto cohort = load_cohort(ctx.config);
  const auto net = spec.build(ctx.config.seed("run.seed"));
  const auto obj = meta::network_objective(net);
  write_config(ctx);

  meta::TrainResult result;
  std::optional<meta::GridResult> grid;
  try {
    if (method == ablation::PretrainMethod::direct) {
      const auto g = direct_grid(ctx.config);
      if (g.size() > 1) {
        grid = meta::direct_grid_search(g, mc, cohort.train, cohort.val, net.params, obj);
      } else {
        result = meta::direct_pretrain(cohort.train, cohort.val, net.params, obj, mc, direct_config(ctx.config));
      }
    } else {
      const auto g = meta_grid(ctx.config);
      if (g.size() > 1) {
        grid = meta::grid_search(g, mc, cohort.train, cohort.val, net.params, obj);
      } else {
        result = meta::meta_train(cohort.train, cohort.val, net.params, obj, mc);
      }
    }
  } catch (const meta::TrainingAborted& e) {
    write_checkpoint_with_context(ctx, e.last_good, spec);
    *ctx.err << "error: " << e.what() << "; last good checkpoint (iteration " << e.last_good.iteration
             << ") written to " << (ctx.out / "checkpoint.mvck").string() << '\n';
    return non_finite;
  }
  if (grid) {
    auto f = open_out(ctx.out / "grid.csv");
    meta::write_grid_table(f, grid->rows);
    result = std::move(grid->best);
  }
  write_checkpoint_with_context(ctx, result.best, spec);
  {
    auto f = open_out(ctx.out / "iterations.csv");
    meta::write_iteration_log(f, result.log, !ctx.deterministic());
  }
  if (result.difficulty) {
    std::vector<std::string> ids;
    for (const auto& t : cohort.train) ids.push_back(t.subject());
    auto f = open_out(ctx.out / "difficulty.csv");
    curriculum::write_difficulty_csv(f, *result.difficulty, ids);
  }
  *ctx.log << ablation::to_string(method) << ": best validation " << result.best.best_validation
           << " at iteration " << result.best.iteration << " of " << result.iterations << '\n';
  return ok;
}

void write_metrics_header(std::ostream& f, bool chosen) {
  f << "subject,run,roc_auc,pr_auc,accuracy,f1,threshold,tp,fp,tn,fn" << (chosen ? ",chosen\n" : "\n");
}

void write_metrics_row(std::ostream& f, const std::string& subject, std::size_t run,
                       const eval::MetricsReport& m) {
  f << subject << ',' << run << ',' << m.roc_auc << ',' << m.pr_auc << ',' << m.accuracy << ',' << m.f1
    << ',' << m.threshold << ',' << m.tp << ',' << m.fp << ',' << m.tn << ',' << m.fn;
}

int cmd_adapt(Context& ctx) {
  const auto method = adapt_method_of(ctx);
  const auto spec = model_spec(ctx.config);
  const auto net = spec.build(0);
  const auto theta = load_matching(ctx.checkpoint, net, nullptr);
  const auto cohort = load_cohort(ctx.config);
  const auto obj = meta::network_objective(net);
  const auto grid = adapt_grid(ctx.config, method == ablation::AdaptMethod::pre_fine_tune).expand();
  const std::size_t runs = ctx.config.integer("adapt.runs");
  const std::size_t k = ctx.config.integer("adapt.k");
  const std::uint64_t seed = ctx.config.seed("run.seed");
  write_config(ctx);

  const std::size_t jobs = cohort.test.size() * runs;
  std::vector<adapt::AdaptOutcome> outcomes(jobs);
  parallel_for(jobs, [&](std::size_t j) {
    const std::size_t s = j / runs, r = j % runs;
    outcomes[j] = adapt::adapt_and_select(theta, cohort.test[s], obj, grid,
                                          {k, ablation::adaptation_seed(seed, s, r), true});
  });

  auto metrics = open_out(ctx.out / "metrics.csv");
  auto curves = open_out(ctx.out / "curves.csv");
  metrics.precision(17);
  curves.precision(17);
  write_metrics_header(metrics, true);
  curves << "subject,run,step,train_loss,test_loss\n";
  for (std::size_t j = 0; j < jobs; ++j) {
    const auto& o = outcomes[j];
    const auto& id = cohort.test[j / runs].subject();
    write_metrics_row(metrics, id, j % runs, o.test);
    std::string chosen = adapt::to_json(o.chosen).dump();
    for (auto& ch : chosen)
      if (ch == ',') ch = ';';
    metrics << ',' << chosen << '\n';
    for (std::size_t i = 0; i < o.train_curve.size(); ++i)
      curves << id << ',' << j % runs << ',' << i << ',' << o.train_curve[i] << ','
             << (i < o.test_curve.size() ? o.test_curve[i] : 0.0) << '\n';
  }
  *ctx.log << "adapted " << cohort.test.size() << " subjects x " << runs << " runs with "
           << ablation::to_string(method) << '\n';
  return ok;
}

int cmd_eval(Context& ctx) {
  const auto spec = model_spec(ctx.config);
  const auto net = spec.build(0);
  const auto theta = load_matching(ctx.checkpoint, net, nullptr);
  const auto cohort = load_cohort(ctx.config);
  const auto obj = meta::network_objective(net);
  write_config(ctx);
  auto f = open_out(ctx.out / "metrics.csv");
  f.precision(17);
  write_metrics_header(f, false);
  for (const auto& task : cohort.test) {
    std::vector<std::size_t> all(task.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto scores = meta::score_segments(obj, theta, task, all);
    const auto m = eval::gmean_threshold_metrics(scores, data::labels_of(task, all));
    write_metrics_row(f, task.subject(), 0, m);
    f << '\n';
  }
  *ctx.log << "evaluated " << cohort.test.size() << " held-out subjects without adaptation\n";
  return ok;
}

int cmd_difficulty(Context& ctx) {
  const auto spec = model_spec(ctx.config);
  const auto mc = meta_config(ctx.config);
  const auto net = spec.build(ctx.config.seed("run.seed"));
  const auto theta = ctx.checkpoint.empty() ? net.params : load_matching(ctx.checkpoint, net, nullptr);
  const auto cohort = load_cohort(ctx.config);
  const auto obj = meta::network_objective(net);
  write_config(ctx);
  curriculum::DifficultyOptions opt;
  opt.k = mc.k;
  opt.steps = mc.updates;
  opt.lr = mc.update_lr;
  opt.batch_size = mc.batch_size;
  opt.max_iter = mc.max_iter;
  opt.seed = mc.seed;
  const auto table = curriculum::init_difficulty(cohort.train, theta, obj, opt);
  std::vector<std::string> ids;
  for (const auto& t : cohort.train) ids.push_back(t.subject());
  auto f = open_out(ctx.out / "difficulty.csv");
  curriculum::write_difficulty_csv(f, table, ids);
  *ctx.log << "difficulty of " << ids.size() << " training subjects written\n";
  return ok;
}

int cmd_synth(Context& ctx) {
  const auto opts = synthetic_options(ctx.config);
  const std::size_t n = ctx.config.integer("synthetic.subjects");
  const std::uint64_t seed = ctx.config.seed("synthetic.seed");
  write_config(ctx);
  fs::create_directories(ctx.out / "records");
  auto profiles = open_out(ctx.out / "profiles.csv");
  profiles.precision(17);
  profiles << "subject,hard,reversed,normal_rate,va_rate,noise,normal_width_s,va_width_s\n";
  const auto records = data::generate_synthetic_records(n, seed, opts);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = data::synthetic_profile(i, seed, opts);
    profiles << p.id << ',' << p.hard << ',' << p.reversed << ',' << p.normal_rate << ',' << p.va_rate << ','
             << p.noise << ',' << p.normal.width_s << ',' << p.va.width_s << '\n';
    data::write_record(records[i], ctx.out / "records" / (records[i].subject + ".csv"));
  }
  *ctx.log << "wrote " << n << " synthetic records to " << (ctx.out / "records").string() << '\n';
  return ok;
}

int cmd_ablate(Context& ctx) {
  const auto spec = model_spec(ctx.config);
  const auto plan = ablation_plan(ctx.config);
  const auto cohort = load_cohort(ctx.config);
  write_config(ctx);
  const bool quiet_time = ctx.deterministic();
  const auto report = ablation::run_ablation(
      cohort, [&](std::uint64_t s) { return spec.build(s); }, plan,
      [&](const std::string& msg) { *ctx.log << msg << '\n'; });
  auto write = [&](const char* name, auto&& fn) {
    auto f = open_out(ctx.out / name);
    fn(f);
  };
  write("summary.csv", [&](std::ostream& f) { ablation::write_summary_csv(f, report.summary); });
  write("summary.txt", [&](std::ostream& f) { ablation::write_summary_table(f, report.summary); });
  write("subjects.csv", [&](std::ostream& f) { ablation::write_subjects_csv(f, report.subjects); });
  write("curves.csv", [&](std::ostream& f) { ablation::write_curves_csv(f, report.subjects); });
  write("histograms.csv", [&](std::ostream& f) { ablation::write_histograms_csv(f, report.diversity); });
  write("ttests.csv", [&](std::ostream& f) { ablation::write_ttests_csv(f, report.diversity); });
  write("pretraining.csv", [&](std::ostream& f) { ablation::write_pretraining_csv(f, report.pretraining); });
  ablation::write_summary_table(*ctx.log, report.summary);
  *ctx.log << "shared splits: " << (report.splits_shared ? "yes" : "NO") << '\n';
  if (!quiet_time) *ctx.log << "seconds: " << report.seconds << '\n';
  return report.splits_shared ? ok : usage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-learned ventricular arrhythmia detection", "metava"};
  app.require_subcommand(1, 1);
  std::string config_file, synthetic, method, adapt_method, out_dir = "out", checkpoint;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_file, "INI configuration file ([section] key = value)");
    c->add_option("--seed", seed, "global seed");
    c->add_flag("--deterministic", deterministic, "omit wall-clock fields");
    c->add_option("--out", out_dir, "output directory")->capture_default_str();
    c->add_option("--synthetic", synthetic, "synthetic cohort, e.g. subjects=40,seed=1");
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(Context&);
    bool method, adapt_method, checkpoint;
  };
  const Sub subs[] = {
      {"pretrain", "pre-train initial weights", cmd_pretrain, true, false, false},
      {"adapt", "adapt a checkpoint to each held-out subject", cmd_adapt, false, true, true},
      {"ablate", "run the five method combinations on shared splits", cmd_ablate, false, false, false},
      {"difficulty", "compute curriculum difficulty of the training subjects", cmd_difficulty, false, false, true},
      {"synth-data", "write a synthetic cohort as record files", cmd_synth, false, false, false},
      {"eval", "score held-out subjects with a checkpoint, no adaptation", cmd_eval, false, false, true},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> commands;
  for (const auto& s : subs) {
    auto* c = app.add_subcommand(s.name, s.help);
    add_common(c);
    if (s.method) c->add_option("--method", method, "maml+cl | maml | direct");
    if (s.adapt_method) c->add_option("--adapt-method", adapt_method, "pre-fine-tune | fine-tune");
    if (s.checkpoint) c->add_option("--checkpoint", checkpoint, "checkpoint file");
    commands.emplace_back(c, &s);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  }

  Context ctx;
  ctx.log = &out;
  ctx.err = &err;
  try {
    if (!config_file.empty()) ctx.config.load_file(config_file);
    if (!synthetic.empty()) ctx.config.set_synthetic(synthetic);
    if (seed) ctx.config.set("run.seed", std::to_string(*seed));
    if (deterministic) ctx.config.set("run.deterministic", "true");
    if (!method.empty()) ctx.config.set("run.method", method);
    if (!adapt_method.empty()) ctx.config.set("run.adapt_method", adapt_method);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }
  ctx.out = out_dir;
  ctx.checkpoint = checkpoint;

  for (const auto& [c, s] : commands) {
    if (!c->parsed()) continue;
    try {
      return s->run(ctx);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return usage;
    } catch (const CheckpointMismatch& e) {
      err << "error: " << e.what() << '\n';
      return checkpoint_error;
    } catch (const io::CheckpointError& e) {
      err << "error: " << e.what() << '\n';
      return checkpoint_error;
    } catch (const data::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return data_unreadable;
    } catch (const data::EpisodeError& e) {
      err << "error: " << e.what() << '\n';
      return data_unreadable;
    } catch (const fs::filesystem_error& e) {
      err << "error: " << e.what() << '\n';
      return data_unreadable;
    } catch (const meta::NonFiniteError& e) {
      err << "error: " << e.what() << '\n';
      return non_finite;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return usage;
    }
  }
  return usage;
}

}  // namespace metava::cli
