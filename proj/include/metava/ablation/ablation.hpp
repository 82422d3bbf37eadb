#pragma once

// The five pre-training / adaptation combinations run on shared splits,
// with per-combination metric summaries, per-subject loss histograms of the
// pre-trained weights and paired t-tests.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "metava/adapt/adaptation.hpp"
#include "metava/meta/trainer.hpp"
#include "metava/nn/model.hpp"

namespace metava::ablation {

enum class PretrainMethod { maml_cl, maml, direct };
enum class AdaptMethod { pre_fine_tune, fine_tune };

const char* to_string(PretrainMethod m);
const char* to_string(AdaptMethod m);
PretrainMethod parse_pretrain_method(const std::string& s);
AdaptMethod parse_adapt_method(const std::string& s);

struct Combination {
  std::string name;
  PretrainMethod pretrain;
  AdaptMethod adapt;
};

// MetaVA, MC+F, M+PF, M+F, Vanilla.
std::vector<Combination> standard_combinations();

struct Cohort {
  std::vector<data::TaskDataset> train, val, test;
};

using ModelFactory = std::function<nn::Network(std::uint64_t seed)>;

struct AblationPlan {
  std::size_t pretrain_runs = 5;
  std::size_t adapt_runs = 10;  // adaptations per held-out subject per run
  std::uint64_t seed = 0;
  std::size_t k = 10;
  meta::MetaConfig meta;  // selection is set per method
  meta::DirectConfig direct;
  adapt::AdaptGrid pre_fine_tune_grid;
  adapt::AdaptGrid fine_tune_grid{false};
  std::vector<Combination> combinations = standard_combinations();
};

nlohmann::json to_json(const AblationPlan& plan);

meta::TrainResult pretrain(PretrainMethod method, const Cohort& cohort, const ad::ParamSet& theta_init,
                           const meta::Objective& objective, const meta::MetaConfig& config,
                           const meta::DirectConfig& direct);

struct PretrainRecord {
  PretrainMethod method;
  std::size_t run;
  double initial_validation;
  double best_validation;
  std::size_t best_iteration;
  std::size_t iterations;
};

struct SubjectResult {
  std::string combination;
  std::size_t run = 0;
  std::size_t adapt_run = 0;
  std::string subject;
  eval::MetricsReport metrics;
  nlohmann::json chosen;
  std::uint64_t split_hash = 0;
  double final_train_loss = 0.0;
  std::vector<double> train_curve, test_curve;
};

struct SummaryRow {
  std::string combination;
  // roc_auc, pr_auc, accuracy, f1 over runs (each run averaged over
  // subjects and adaptation repeats); std is the sample deviation.
  std::array<double, 4> mean{}, std{};
  std::size_t samples = 0;
};

struct TTest {
  std::string a, b;  // p-value that a's losses are lower than b's
  double p = 0.5;
  double mean_difference = 0.0;
};

struct Diversity {
  std::vector<std::string> subjects;
  // Per method: per-subject loss after K-shot adaptation of the pre-trained
  // weights, averaged over pre-training runs.
  std::map<PretrainMethod, std::vector<double>> losses;
  double normalizer = 0.0;  // max over every method and subject
  std::map<PretrainMethod, std::vector<std::size_t>> histograms;
  std::vector<TTest> tests;
};

struct AblationReport {
  std::vector<PretrainRecord> pretraining;
  std::vector<SubjectResult> subjects;
  std::vector<SummaryRow> summary;
  Diversity diversity;
  bool splits_shared = true;
  double seconds = 0.0;
};

// Seed of the adaptation split for one held-out subject and repeat. It does
// not depend on the method, so compared methods share splits.
std::uint64_t adaptation_seed(std::uint64_t run_seed, std::size_t subject, std::size_t repeat);

using Progress = std::function<void(const std::string&)>;

AblationReport run_ablation(const Cohort& cohort, const ModelFactory& factory,
                            const AblationPlan& plan, const Progress& progress = {});

// Mean and std of the summary rows, one per combination, in plan order.
std::vector<SummaryRow> summarize(const std::vector<SubjectResult>& results,
                                  const std::vector<Combination>& combinations);

Diversity diversity_analysis(const std::vector<std::string>& subjects,
                             const std::map<PretrainMethod, std::vector<double>>& losses);

// Number of subjects in the worst `bins` bins of a histogram.
std::size_t worst_bins(const std::vector<std::size_t>& histogram, std::size_t bins = 3);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_subjects_csv(std::ostream& out, const std::vector<SubjectResult>& results);
void write_curves_csv(std::ostream& out, const std::vector<SubjectResult>& results);
void write_histograms_csv(std::ostream& out, const Diversity& d);
void write_ttests_csv(std::ostream& out, const Diversity& d);
void write_pretraining_csv(std::ostream& out, const std::vector<PretrainRecord>& records);

}  // namespace metava::ablation
