#include "metava/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/students_t.hpp>

namespace metava::eval {

namespace {

struct Counts {
  std::size_t pos = 0, neg = 0;
};

Counts count_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length: " +
                                std::to_string(scores.size()) + " vs " +
                                std::to_string(labels.size()));
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw std::invalid_argument("non-finite score");
    (labels[i] == 1 ? c.pos : c.neg)++;
  }
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Calls f(threshold, tp, fp) after each group of equal scores, descending.
template <class F>
void sweep(std::span<const double> scores, std::span<const int> labels, F&& f) {
  const auto order = descending(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == s; ++j) (labels[order[j]] == 1 ? tp : fp)++;
    f(s, tp, fp);
    i = j;
  }
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = count_classes(scores, labels);
  if (c.pos == 0 || c.neg == 0) throw std::invalid_argument("roc_auc needs both classes");
  // Twice the statistic as an integer: 2 * wins + ties.
  std::uint64_t twice = 0;
  std::size_t prev_tp = 0, prev_fp = 0;
  sweep(scores, labels, [&](double, std::size_t tp, std::size_t fp) {
    const std::uint64_t gp = tp - prev_tp, gn = fp - prev_fp;
    // Positives in this group beat every negative ranked below them.
    twice += 2 * gp * (c.neg - fp) + gp * gn;
    prev_tp = tp;
    prev_fp = fp;
  });
  return static_cast<double>(twice) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = count_classes(scores, labels);
  if (c.pos == 0) throw std::invalid_argument("pr_auc needs at least one positive");
  double ap = 0.0, prev_recall = 0.0;
  sweep(scores, labels, [&](double, std::size_t tp, std::size_t fp) {
    const double recall = static_cast<double>(tp) / static_cast<double>(c.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  });
  return ap;
}

MetricsReport gmean_threshold_metrics(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = count_classes(scores, labels);
  if (c.pos == 0 || c.neg == 0)
    throw std::invalid_argument("gmean_threshold_metrics needs both classes");
  MetricsReport r;
  r.roc_auc = roc_auc(scores, labels);
  r.pr_auc = pr_auc(scores, labels);
  // tp * tn is proportional to TPR * TNR; the sweep visits thresholds from
  // high to low, so ">=" keeps the lowest among ties.
  std::uint64_t best = 0;
  bool first = true;
  sweep(scores, labels, [&](double s, std::size_t tp, std::size_t fp) {
    const std::uint64_t tn = c.neg - fp;
    const std::uint64_t prod = static_cast<std::uint64_t>(tp) * tn;
    if (first || prod >= best) {
      first = false;
      best = prod;
      r.threshold = s;
      r.tp = tp;
      r.fp = fp;
      r.tn = tn;
      r.fn = c.pos - tp;
    }
  });
  const double n = static_cast<double>(c.pos + c.neg);
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.f1 = r.tp == 0 ? 0.0
                   : 2.0 * static_cast<double>(r.tp) / static_cast<double>(2 * r.tp + r.fp + r.fn);
  r.gmean = std::sqrt(static_cast<double>(r.tp) / static_cast<double>(c.pos) *
                      static_cast<double>(r.tn) / static_cast<double>(c.neg));
  return r;
}

double paired_t_test_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: lengths differ");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0 || sd < 1e-15 * std::abs(mean)) return mean < 0 ? 0.0 : (mean > 0 ? 1.0 : 0.5);
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::cdf(dist, t);
}

std::vector<std::size_t> loss_histogram(std::span<const double> losses, double bin_width,
                                        std::optional<double> normalizer) {
  if (losses.empty()) throw std::invalid_argument("loss_histogram: empty input");
  if (!(bin_width > 0.0) || bin_width > 1.0)
    throw std::invalid_argument("loss_histogram: bin width must lie in (0, 1]");
  const double top = normalizer ? *normalizer : *std::max_element(losses.begin(), losses.end());
  if (!(top > 0.0)) throw std::invalid_argument("loss_histogram: normalizer must be positive");
  const auto bins = static_cast<std::size_t>(std::llround(1.0 / bin_width));
  std::vector<std::size_t> counts(bins, 0);
  for (double l : losses) {
    if (!(l >= 0.0)) throw std::invalid_argument("loss_histogram: negative or NaN loss");
    const double v = l / top;
    // The relative nudge keeps values such as 0.3 out of the bin below.
    auto idx = static_cast<std::size_t>(std::floor(v / bin_width * (1.0 + 1e-12)));
    counts[std::min(idx, bins - 1)]++;
  }
  return counts;
}

}  // namespace metava::eval
