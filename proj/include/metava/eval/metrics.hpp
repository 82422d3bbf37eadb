#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace metava::eval {

struct MetricsReport {
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double gmean = 0.0;
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Mann-Whitney statistic (wins + ties / 2) / (P * N). Throws
// std::invalid_argument unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct thresholds, in descending order, of
// precision times the recall increment. Throws without positives.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

// Threshold among the distinct scores maximizing sqrt(TPR * TNR), ties to the
// lowest threshold; a score at or above the threshold predicts positive.
MetricsReport gmean_threshold_metrics(std::span<const double> scores, std::span<const int> labels);

// One-sided p-value for mean(a - b) < 0 from the paired t statistic with
// n - 1 degrees of freedom. Zero-variance differences give 0, 1 or 0.5 for a
// negative, positive or zero mean.
double paired_t_test_one_sided(std::span<const double> a, std::span<const double> b);

// Counts of losses / normalizer in bins of `bin_width` over [0, 1]; the last
// bin is right-closed. The normalizer defaults to the maximum loss.
std::vector<std::size_t> loss_histogram(std::span<const double> losses, double bin_width = 0.1,
                                        std::optional<double> normalizer = std::nullopt);

}  // namespace metava::eval
