#include "metava/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metava/util/log.hpp"

namespace metava::data {

void z_normalize(std::vector<double>& s) {
  if (s.empty()) return;
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double var = 0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : s) v = (v - mean) * inv;
}

bool overlaps_any(const std::vector<Interval>& intervals, std::size_t offset, std::size_t window) {
  // Normalized intervals are disjoint and sorted, so the last one starting
  // before the window end is the only candidate.
  const std::size_t end = offset + window;
  auto it = std::lower_bound(intervals.begin(), intervals.end(), end,
                             [](const Interval& iv, std::size_t e) { return iv.start < e; });
  return it != intervals.begin() && std::prev(it)->end > offset;
}

std::vector<Segment> segment_record(const Record& record, const SegmentOptions& opt) {
  if (opt.window == 0 || opt.stride_va == 0 || opt.stride_nonva == 0)
    throw std::invalid_argument("segment_record: window and strides must be positive");
  std::vector<Segment> out;
  const std::size_t n = record.samples.size();
  if (n < opt.window) {
    log::warn("record '" + record.subject + "' has " + std::to_string(n) +
              " samples, shorter than the " + std::to_string(opt.window) + "-sample window");
    return out;
  }
  std::size_t offset = 0;
  while (offset + opt.window <= n) {
    Segment seg;
    seg.offset = offset;
    seg.label = overlaps_any(record.annotations, offset, opt.window) ? 1 : 0;
    seg.samples.assign(record.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                       record.samples.begin() + static_cast<std::ptrdiff_t>(offset + opt.window));
    if (opt.normalize) z_normalize(seg.samples);
    offset += seg.label == 1 ? opt.stride_va : opt.stride_nonva;
    out.push_back(std::move(seg));
  }
  return out;
}

TaskDataset::TaskDataset(std::string subject, std::vector<Segment> segments)
    : subject_(std::move(subject)), segments_(std::move(segments)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const int l = segments_[i].label;
    if (l != 0 && l != 1)
      throw std::invalid_argument("segment label must be 0 or 1, got " + std::to_string(l));
    (l == 1 ? positives_ : negatives_).push_back(i);
  }
}

MetaSplit split_meta_sets(const std::vector<TaskDataset>& tasks, std::size_t val_count,
                          std::uint64_t seed) {
  if (val_count >= tasks.size() && val_count > 0)
    throw std::invalid_argument("split_meta_sets: val_count " + std::to_string(val_count) +
                                " must be below the task count " + std::to_string(tasks.size()));
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < val_count; ++i) {
    const std::size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<bool> is_val(tasks.size(), false);
  for (std::size_t i = 0; i < val_count; ++i) is_val[order[i]] = true;
  MetaSplit split;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    (is_val[i] ? split.val : split.train).push_back(tasks[i]);
  return split;
}

EpisodeError::EpisodeError(const std::string& subject, std::size_t pos, std::size_t neg,
                           std::size_t need)
    : std::runtime_error("task '" + subject + "' has " + std::to_string(pos) + " label-1 and " +
                         std::to_string(neg) + " label-0 segments; " + std::to_string(need) +
                         " per class are required"),
      positives(pos),
      negatives(neg),
      needed(need) {}

namespace {

// First `count` entries of a seeded shuffle of `pool`.
std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

void require(const TaskDataset& task, std::size_t need) {
  if (task.count(1) < need || task.count(0) < need)
    throw EpisodeError(task.subject(), task.count(1), task.count(0), need);
}

}  // namespace

Episode sample_episode(const TaskDataset& task, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("sample_episode: K must be positive");
  require(task, 2 * k);
  const auto pos = draw(task.indices(1), 2 * k, rng);
  const auto neg = draw(task.indices(0), 2 * k, rng);
  Episode ep;
  ep.support.insert(ep.support.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k));
  ep.support.insert(ep.support.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k));
  ep.query.insert(ep.query.end(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end());
  ep.query.insert(ep.query.end(), neg.begin() + static_cast<std::ptrdiff_t>(k), neg.end());
  return ep;
}

AdaptSplit split_for_adaptation(const TaskDataset& task, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("split_for_adaptation: K must be positive");
  require(task, 2 * k + 1);
  const auto pos = draw(task.indices(1), 2 * k, rng);
  const auto neg = draw(task.indices(0), 2 * k, rng);
  AdaptSplit s;
  const auto kk = static_cast<std::ptrdiff_t>(k);
  s.train.insert(s.train.end(), pos.begin(), pos.begin() + kk);
  s.train.insert(s.train.end(), neg.begin(), neg.begin() + kk);
  s.val.insert(s.val.end(), pos.begin() + kk, pos.end());
  s.val.insert(s.val.end(), neg.begin() + kk, neg.end());
  std::vector<std::size_t> used = s.train;
  used.insert(used.end(), s.val.begin(), s.val.end());
  s.test = complement(task, used);
  return s;
}

std::vector<std::size_t> complement(const TaskDataset& task, std::span<const std::size_t> used) {
  std::vector<bool> taken(task.size(), false);
  for (std::size_t i : used) taken.at(i) = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < task.size(); ++i)
    if (!taken[i]) out.push_back(i);
  return out;
}

nn::Batch make_batch(const TaskDataset& task, std::span<const std::size_t> indices,
                     ad::Precision precision) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no segments selected");
  const std::size_t len = task[indices[0]].samples.size();
  std::vector<double> values;
  values.reserve(indices.size() * len);
  nn::Batch b;
  for (std::size_t i : indices) {
    const auto& seg = task[i];
    if (seg.samples.size() != len)
      throw std::invalid_argument("make_batch: segments of unequal length");
    values.insert(values.end(), seg.samples.begin(), seg.samples.end());
    b.labels.push_back(seg.label);
  }
  b.inputs = ad::Tensor::from_values({indices.size(), 1, len}, std::move(values), precision);
  return b;
}

std::vector<int> labels_of(const TaskDataset& task, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(task[i].label);
  return out;
}

std::uint64_t episode_hash(const std::string& subject, std::span<const std::size_t> indices,
                           std::uint64_t h) {
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (char c : subject) mix(static_cast<unsigned char>(c));
  mix(0);
  for (std::size_t i : indices)
    for (int b = 0; b < 8; ++b) mix(static_cast<unsigned char>((static_cast<std::uint64_t>(i) >> (8 * b)) & 0xff));
  return h;
}

}  // namespace metava::data
