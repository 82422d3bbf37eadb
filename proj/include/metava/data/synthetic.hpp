#pragma once

// Synthetic single-lead cohort. Records are beat trains: each subject has a
// private normal complex and arrhythmia complex (width, polarity, biphasic
// shape), a resting rate and a slightly faster arrhythmia rate. Most
// subjects pair narrow normal beats with wide VA beats; a minority with
// wide resting complexes (as under bundle-branch block) show the reverse,
// so pooled training learns a rule that fails them while a few labelled
// segments of one subject are enough to tell its rhythms apart. Records
// alternate normal stretches with VA episodes and are segmented like real
// recordings.

#include <cstdint>
#include <string>
#include <vector>

#include "metava/data/dataset.hpp"
#include "metava/data/record.hpp"

namespace metava::data {

struct SyntheticOptions {
  double rate = 200.0;
  double duration_s = 240.0;
  double normal_gap_min_s = 16.0;
  double normal_gap_max_s = 32.0;
  double va_episode_min_s = 3.0;
  double va_episode_max_s = 6.0;
  double normal_rate_min = 1.0;  // beats per second
  double normal_rate_max = 1.8;
  double va_ratio_min = 1.0;  // arrhythmia rate / normal rate
  double va_ratio_max = 1.3;
  double narrow_min_ms = 8.0;  // Gaussian width of a complex
  double narrow_max_ms = 14.0;
  double wide_min_ms = 28.0;
  double wide_max_ms = 45.0;
  // Share of subjects whose normal complexes are wide and VA ones narrow.
  double reversed_fraction = 0.3;
  double opposite_polarity = 0.2;  // chance VA complexes are inverted
  double va_t_wave = 0.0;          // chance VA complexes keep a trailing wave
  double rate_jitter = 0.08;       // relative beat-to-beat variation
  double noise_min = 0.05;         // relative to the complex amplitude
  double noise_max = 0.25;
  double wander = 0.3;  // baseline wander amplitude
  // Share of subjects whose VA complexes copy the normal ones, with heavy
  // noise and a rate close to normal.
  double hard_fraction = 0.15;
  double hard_noise = 0.8;
  double hard_ratio_min = 1.0;
  double hard_ratio_max = 1.15;
};

struct Complex {
  double width_s = 0.02;
  double polarity = 1.0;
  double biphasic = 0.0;  // weight of the derivative-shaped component
  double t_wave = 0.0;    // relative amplitude of the trailing wave
  bool operator==(const Complex&) const = default;
};

struct SubjectProfile {
  std::string id;
  double normal_rate = 1.2;
  double va_rate = 2.0;
  double amplitude = 1.0;
  double noise = 0.1;
  Complex normal, va;
  bool hard = false;
  bool reversed = false;
  bool operator==(const SubjectProfile&) const = default;
};

SubjectProfile synthetic_profile(std::size_t index, std::uint64_t seed,
                                 const SyntheticOptions& options = {});
Record synthesize_record(const SubjectProfile& profile, std::uint64_t seed,
                         const SyntheticOptions& options = {});

std::vector<Record> generate_synthetic_records(std::size_t n_subjects, std::uint64_t seed,
                                               const SyntheticOptions& options = {});

// Records segmented into tasks, one per subject.
std::vector<TaskDataset> generate_synthetic_cohort(std::size_t n_subjects, std::uint64_t seed,
                                                   const SyntheticOptions& options = {},
                                                   const SegmentOptions& segmenting = {});

// Resamples to `rate`, segments, and groups records by subject in order of
// first appearance.
std::vector<TaskDataset> build_tasks(const std::vector<Record>& records,
                                     const SegmentOptions& segmenting = {}, double rate = 200.0);

}  // namespace metava::data
