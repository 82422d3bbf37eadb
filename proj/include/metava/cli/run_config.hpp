#pragma once

// Run configuration: a fixed table of "section.key" settings with defaults,
// overridden by an INI-style file and then by command-line flags. Every
// command writes the resolved table next to its outputs so that the run can
// be repeated with `--config <out>/config.ini`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metava/ablation/ablation.hpp"
#include "metava/data/synthetic.hpp"
#include "metava/nn/resnet1d.hpp"

namespace metava::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { real, integer, boolean, text, reals, integers };

struct KeySpec {
  std::string key;  // "section.name"
  Kind kind;
  std::string fallback;
  std::string help;
};

const std::vector<KeySpec>& known_keys();

class RunConfig {
 public:
  RunConfig();

  // Unknown keys and malformed values raise ConfigError.
  void load_file(const std::filesystem::path& path);
  void load(std::istream& in, const std::string& origin);
  void set(const std::string& key, const std::string& value);
  // "subjects=25,seed=3" sets synthetic.subjects and synthetic.seed.
  void set_synthetic(const std::string& spec);

  const std::string& raw(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t integer(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& text(const std::string& key) const { return raw(key); }
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::size_t> integers(const std::string& key) const;

  void write_ini(std::ostream& out) const;
  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::string> values_;
};

data::SyntheticOptions synthetic_options(const RunConfig& c);
data::SegmentOptions segment_options(const RunConfig& c);

struct ModelSpec {
  std::string kind;  // tiny | resnet
  nn::TinyConfig tiny;
  nn::ModelConfig resnet;

  nn::Network build(std::uint64_t seed) const;
  nlohmann::json to_json() const;
};

ModelSpec model_spec(const RunConfig& c);

// Scalar settings take the first entry of each list.
meta::MetaConfig meta_config(const RunConfig& c);
meta::MetaGrid meta_grid(const RunConfig& c);
meta::DirectConfig direct_config(const RunConfig& c);
meta::DirectGrid direct_grid(const RunConfig& c);
adapt::AdaptGrid adapt_grid(const RunConfig& c, bool pre_fine_tune);
ablation::AblationPlan ablation_plan(const RunConfig& c);

// Synthetic cohort, or every record under data.dir. Held-out subjects are a
// seeded subset of size data.test_subjects; validation subjects a seeded
// subset of the rest. Record problems raise data::ParseError or
// std::filesystem::filesystem_error.
ablation::Cohort load_cohort(const RunConfig& c);

}  // namespace metava::cli
