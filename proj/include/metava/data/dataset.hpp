#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metava/autodiff/tensor.hpp"
#include "metava/data/record.hpp"
#include "metava/nn/model.hpp"
#include "metava/util/rng.hpp"

namespace metava::data {

struct Segment {
  std::vector<double> samples;
  int label = 0;
  std::size_t offset = 0;
};

struct SegmentOptions {
  std::size_t window = 400;
  std::size_t stride_va = 20;
  std::size_t stride_nonva = 400;
  bool normalize = true;  // per-segment zero mean, unit variance
};

// Slides a window from offset 0. A window is labeled 1 when it overlaps any
// annotation; the next offset advances by stride_va after a label-1 window and
// by stride_nonva otherwise. Records shorter than the window yield no
// segments and a logged warning.
std::vector<Segment> segment_record(const Record& record, const SegmentOptions& options = {});

// True when [offset, offset + window) intersects any interval.
bool overlaps_any(const std::vector<Interval>& intervals, std::size_t offset, std::size_t window);

void z_normalize(std::vector<double>& samples);

class TaskDataset {
 public:
  TaskDataset() = default;
  TaskDataset(std::string subject, std::vector<Segment> segments);

  const std::string& subject() const { return subject_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  std::size_t size() const { return segments_.size(); }
  // Indices of the segments carrying `label`, in segment order.
  const std::vector<std::size_t>& indices(int label) const {
    return label == 1 ? positives_ : negatives_;
  }
  std::size_t count(int label) const { return indices(label).size(); }

 private:
  std::string subject_;
  std::vector<Segment> segments_;
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> negatives_;
};

struct MetaSplit {
  std::vector<TaskDataset> train;
  std::vector<TaskDataset> val;
};

// Validation subjects are a seeded random subset of size val_count; both
// parts keep the input order.
MetaSplit split_meta_sets(const std::vector<TaskDataset>& tasks, std::size_t val_count,
                          std::uint64_t seed);

class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(const std::string& subject, std::size_t positives, std::size_t negatives,
               std::size_t needed);
  std::size_t positives, negatives, needed;
};

// Support and query index lists into one task, K per class each, disjoint.
struct Episode {
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
};

Episode sample_episode(const TaskDataset& task, std::size_t k, Rng& rng);

// Three-way split for adapting to a new subject: K per class for training,
// K per class for validation, everything else for testing.
struct AdaptSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

AdaptSplit split_for_adaptation(const TaskDataset& task, std::size_t k, Rng& rng);

// Indices of every segment not in `used`, in order.
std::vector<std::size_t> complement(const TaskDataset& task, std::span<const std::size_t> used);

nn::Batch make_batch(const TaskDataset& task, std::span<const std::size_t> indices,
                     ad::Precision precision = ad::Precision::f32);

// Stable 64-bit FNV-1a digest of (subject, indices); used to audit that
// compared methods saw the same episodes.
std::uint64_t episode_hash(const std::string& subject, std::span<const std::size_t> indices,
                           std::uint64_t seed = 0xcbf29ce484222325ULL);

std::vector<int> labels_of(const TaskDataset& task, std::span<const std::size_t> indices);

}  // namespace metava::data
