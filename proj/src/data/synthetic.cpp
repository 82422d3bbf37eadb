#include "metava/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace metava::data {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string subject_id(std::size_t index) {
  std::string s = std::to_string(index);
  return "syn" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

Complex random_complex(Rng& rng, bool wide, const SyntheticOptions& o) {
  Complex c;
  c.width_s = (wide ? rng.uniform(o.wide_min_ms, o.wide_max_ms) : rng.uniform(o.narrow_min_ms, o.narrow_max_ms)) / 1000.0;
  c.polarity = rng.uniform() < 0.5 ? 1.0 : -1.0;
  c.biphasic = rng.uniform(-1.0, 1.0);
  c.t_wave = rng.uniform(0.0, 0.4);
  return c;
}

// One complex centred at 0: a Gaussian, a derivative-of-Gaussian part and a
// wide trailing wave of the same polarity.
double complex_value(const Complex& c, double t) {
  const double u = t / c.width_s;
  double v = std::exp(-0.5 * u * u) * (1.0 + c.biphasic * u);
  if (c.t_wave > 0) {
    const double w = (t - 0.25) / 0.06;
    v += c.t_wave * std::exp(-0.5 * w * w);
  }
  return c.polarity * v;
}

void add_complex(std::vector<double>& x, const Complex& c, double centre_s, double rate) {
  const double reach = std::max(5.0 * c.width_s, c.t_wave > 0 ? 0.45 : 0.0);
  const auto lo = static_cast<long>(std::floor((centre_s - 5.0 * c.width_s) * rate));
  const auto hi = static_cast<long>(std::ceil((centre_s + reach) * rate));
  for (long i = std::max(0L, lo); i <= hi && i < static_cast<long>(x.size()); ++i)
    x[static_cast<std::size_t>(i)] += complex_value(c, static_cast<double>(i) / rate - centre_s);
}

}  // namespace

SubjectProfile synthetic_profile(std::size_t index, std::uint64_t seed, const SyntheticOptions& o) {
  Rng rng(mix_seed(seed, index));
  SubjectProfile p;
  p.id = subject_id(index);
  p.hard = rng.uniform() < o.hard_fraction;
  p.reversed = rng.uniform() < o.reversed_fraction;
  p.normal_rate = rng.uniform(o.normal_rate_min, o.normal_rate_max);
  const double ratio = p.hard ? rng.uniform(o.hard_ratio_min, o.hard_ratio_max)
                              : rng.uniform(o.va_ratio_min, o.va_ratio_max);
  p.va_rate = p.normal_rate * ratio;
  p.amplitude = rng.uniform(0.5, 2.0);
  p.noise = p.hard ? o.hard_noise : rng.uniform(o.noise_min, o.noise_max);
  p.normal = random_complex(rng, p.reversed, o);
  p.va = random_complex(rng, !p.reversed, o);
  const bool va_wave = rng.uniform() < o.va_t_wave;
  const double wave = rng.uniform(0.0, 0.4);
  p.va.t_wave = va_wave ? wave : 0.0;
  if (p.hard) {
    p.va = p.normal;
  } else {
    p.va.polarity = rng.uniform() < o.opposite_polarity ? -p.normal.polarity : p.normal.polarity;
  }
  return p;
}

Record synthesize_record(const SubjectProfile& p, std::uint64_t seed, const SyntheticOptions& o) {
  Rng rng(seed);
  Record rec;
  rec.rate = o.rate;
  rec.subject = p.id;
  const auto n = static_cast<std::size_t>(std::llround(o.duration_s * o.rate));

  // Alternate normal stretches and VA episodes.
  std::size_t pos = static_cast<std::size_t>(rng.uniform(o.normal_gap_min_s, o.normal_gap_max_s) * o.rate);
  while (pos < n) {
    const auto len = static_cast<std::size_t>(rng.uniform(o.va_episode_min_s, o.va_episode_max_s) * o.rate);
    const std::size_t end = std::min(n, pos + len);
    rec.annotations.push_back({pos, end});
    pos = end + static_cast<std::size_t>(rng.uniform(o.normal_gap_min_s, o.normal_gap_max_s) * o.rate);
  }

  std::vector<double> x(n, 0.0);
  const double duration = static_cast<double>(n) / o.rate;
  std::size_t next_ann = 0;
  for (double t = rng.uniform(0.0, 1.0 / p.normal_rate); t < duration;) {
    const auto i = static_cast<std::size_t>(t * o.rate);
    while (next_ann < rec.annotations.size() && rec.annotations[next_ann].end <= i) ++next_ann;
    const bool va = next_ann < rec.annotations.size() && rec.annotations[next_ann].start <= i;
    add_complex(x, va ? p.va : p.normal, t, o.rate);
    const double r = va ? p.va_rate : p.normal_rate;
    t += std::max(0.2 / r, (1.0 + o.rate_jitter * rng.normal()) / r);
  }
  const double wander_f = rng.uniform(0.05, 0.3);
  const double wander_phase = rng.uniform(0.0, kTwoPi);
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / o.rate;
    const double v = x[i] + o.wander * std::sin(kTwoPi * wander_f * t + wander_phase) + p.noise * rng.normal();
    rec.samples[i] = p.amplitude * v;
  }
  normalize_annotations(rec);
  return rec;
}

std::vector<Record> generate_synthetic_records(std::size_t n_subjects, std::uint64_t seed,
                                               const SyntheticOptions& o) {
  if (n_subjects == 0) throw std::invalid_argument("synthetic cohort needs at least one subject");
  std::vector<Record> out;
  out.reserve(n_subjects);
  for (std::size_t s = 0; s < n_subjects; ++s)
    out.push_back(synthesize_record(synthetic_profile(s, seed, o), mix_seed(seed ^ 0x5eedULL, s), o));
  return out;
}

std::vector<TaskDataset> build_tasks(const std::vector<Record>& records,
                                     const SegmentOptions& segmenting, double rate) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<Segment>> by_subject;
  for (const auto& r : records) {
    auto segs = segment_record(r.rate == rate ? r : resample_linear(r, rate), segmenting);
    auto [it, fresh] = by_subject.try_emplace(r.subject);
    if (fresh) order.push_back(r.subject);
    for (auto& s : segs) it->second.push_back(std::move(s));
  }
  std::vector<TaskDataset> tasks;
  for (const auto& id : order) tasks.emplace_back(id, std::move(by_subject[id]));
  return tasks;
}

std::vector<TaskDataset> generate_synthetic_cohort(std::size_t n_subjects, std::uint64_t seed,
                                                   const SyntheticOptions& o,
                                                   const SegmentOptions& segmenting) {
  return build_tasks(generate_synthetic_records(n_subjects, seed, o), segmenting, o.rate);
}

}  // namespace metava::data
