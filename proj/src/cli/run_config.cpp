#include "metava/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "metava/data/record.hpp"

namespace metava::cli {

using nlohmann::json;

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys{
      {"run.seed", Kind::integer, "0", "global seed"},
      {"run.deterministic", Kind::boolean, "false", "omit wall-clock fields from outputs"},
      {"run.method", Kind::text, "maml+cl", "pre-training method: maml+cl | maml | direct"},
      {"run.adapt_method", Kind::text, "pre-fine-tune", "adaptation: pre-fine-tune | fine-tune"},

      {"data.dir", Kind::text, "", "record directory; empty uses the synthetic cohort"},
      {"data.rate", Kind::real, "200", "working sampling rate in Hz"},
      {"data.window", Kind::integer, "400", "segment length in samples"},
      {"data.stride_va", Kind::integer, "20", "offset step after a VA window"},
      {"data.stride_nonva", Kind::integer, "400", "offset step after a non-VA window"},
      {"data.normalize", Kind::boolean, "true", "per-segment z-normalization"},
      {"data.val_subjects", Kind::integer, "5", "validation subjects"},
      {"data.test_subjects", Kind::integer, "10", "held-out subjects"},
      {"data.split_seed", Kind::integer, "0", "seed of the subject split"},

      {"synthetic.subjects", Kind::integer, "40", "subjects to generate"},
      {"synthetic.seed", Kind::integer, "1", "generator seed"},
      {"synthetic.duration_s", Kind::real, "240", "record length in seconds"},
      {"synthetic.hard_fraction", Kind::real, "0.15", "share of near-inseparable subjects"},
      {"synthetic.reversed_fraction", Kind::real, "0.3", "share of subjects with wide normal beats"},
      {"synthetic.opposite_polarity", Kind::real, "0.2", "chance VA complexes are inverted"},
      {"synthetic.va_t_wave", Kind::real, "0", "chance VA complexes keep a trailing wave"},
      {"synthetic.noise_min", Kind::real, "0.05", "lowest noise level"},
      {"synthetic.noise_max", Kind::real, "0.25", "highest noise level"},
      {"synthetic.hard_noise", Kind::real, "0.8", "noise level of hard subjects"},

      {"model.kind", Kind::text, "resnet", "tiny | resnet"},
      {"model.precision", Kind::text, "f32", "f32 | f64"},
      {"tiny.channels", Kind::integer, "8", "convolution channels"},
      {"tiny.kernel", Kind::integer, "25", "kernel size"},
      {"tiny.stride", Kind::integer, "4", "convolution stride"},
      {"resnet.stages", Kind::integer, "7", "residual stages"},
      {"resnet.blocks_per_stage", Kind::integer, "2", "blocks per stage"},
      {"resnet.stem_channels", Kind::integer, "16", "stem output channels"},
      {"resnet.stage_channels", Kind::integers, "16,32,32,64,64,128,128", "channels per stage"},
      {"resnet.kernel", Kind::integer, "16", "grouped convolution kernel"},
      {"resnet.groups", Kind::integer, "16", "convolution groups"},
      {"resnet.dropout", Kind::real, "0.5", "dropout probability"},
      {"resnet.downsample_stages", Kind::integers, "2,4,6", "stages that halve the length"},

      {"meta.update_lr", Kind::reals, "0.01", "inner rate; a list runs a grid search"},
      {"meta.meta_lr", Kind::reals, "0.01", "outer rate; a list runs a grid search"},
      {"meta.updates", Kind::integers, "1", "inner steps; a list runs a grid search"},
      {"meta.k", Kind::integer, "10", "segments per class in support and query"},
      {"meta.batch_size", Kind::integer, "9", "tasks per meta-iteration"},
      {"meta.max_iter", Kind::integer, "50", "curriculum horizon"},
      {"meta.outer_loss", Kind::text, "sum-over-steps", "sum-over-steps | final-step"},
      {"meta.gradient", Kind::text, "exact", "exact | first-order | hvp-fd"},
      {"meta.without_replacement", Kind::boolean, "false", "distinct tasks within a batch"},
      {"meta.patience", Kind::integer, "5", "early-stopping patience"},
      {"meta.max_iterations", Kind::integer, "300", "meta-iteration cap"},
      {"meta.hvp_eps", Kind::real, "1e-4", "finite-difference step for hvp-fd"},

      {"direct.lr", Kind::reals, "0.01", "learning rate; a list runs a grid search"},
      {"direct.minibatch", Kind::integers, "64", "minibatch size; a list runs a grid search"},

      {"adapt.pft_iterations", Kind::integers, "10,30,50", "pre-fine-tune iterations"},
      {"adapt.beta1", Kind::reals, "0.01,0.005,0.001,0.0005", "pre-fine-tune copy rate"},
      {"adapt.beta2", Kind::reals, "0.01,0.005,0.001,0.0005", "pre-fine-tune update rate"},
      {"adapt.learning_rate", Kind::reals, "0.01,0.001,0.0001", "fine-tune rate"},
      {"adapt.mode", Kind::text, "literal", "literal | meta-style"},
      {"adapt.max_steps", Kind::integer, "200", "fine-tune step cap"},
      {"adapt.plateau_tol", Kind::real, "1e-4", "relative plateau tolerance"},
      {"adapt.k", Kind::integer, "10", "labelled segments per class"},
      {"adapt.runs", Kind::integer, "10", "adaptations per held-out subject"},

      {"ablation.pretrain_runs", Kind::integer, "5", "pre-training runs"},
  };
  return keys;
}

namespace {

const KeySpec& spec_of(const std::string& key) {
  for (const auto& k : known_keys())
    if (k.key == key) return k;
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"'");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"'");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": '" + v + "' is not a number");
  return x;
}

std::uint64_t parse_integer(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  return x;
}

bool parse_boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::string canonical(const KeySpec& spec, const std::string& value) {
  const std::string v = trim(value);
  switch (spec.kind) {
    case Kind::real: parse_real(spec.key, v); break;
    case Kind::integer: parse_integer(spec.key, v); break;
    case Kind::boolean: return parse_boolean(spec.key, v) ? "true" : "false";
    case Kind::text: break;
    case Kind::reals:
    case Kind::integers: {
      const auto parts = split(v, ',');
      std::string joined;
      for (const auto& p : parts) {
        if (p.empty()) throw ConfigError(spec.key + ": empty list entry in '" + v + "'");
        spec.kind == Kind::reals ? (void)parse_real(spec.key, p) : (void)parse_integer(spec.key, p);
        joined += (joined.empty() ? "" : ",") + p;
      }
      return joined;
    }
  }
  return v;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : known_keys()) values_[k.key] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& spec = spec_of(key);
  values_[key] = canonical(spec, value);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  load(in, path.string());
}

void RunConfig::load(std::istream& in, const std::string& origin) {
  CLI::ConfigINI parser;
  std::vector<CLI::ConfigItem> items;
  try {
    items = parser.from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string value;
    for (const auto& part : item.inputs) value += (value.empty() ? "" : ",") + part;
    try {
      set(item.fullname(), value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
}

void RunConfig::set_synthetic(const std::string& spec) {
  for (const auto& part : split(spec, ',')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("--synthetic: expected key=value, got '" + part + "'");
    set("synthetic." + trim(part.substr(0, eq)), part.substr(eq + 1));
  }
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, raw(key)); }
std::size_t RunConfig::integer(const std::string& key) const {
  return static_cast<std::size_t>(parse_integer(key, raw(key)));
}
std::uint64_t RunConfig::seed(const std::string& key) const { return parse_integer(key, raw(key)); }
bool RunConfig::boolean(const std::string& key) const { return parse_boolean(key, raw(key)); }

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : split(raw(key), ',')) out.push_back(parse_real(key, p));
  return out;
}

std::vector<std::size_t> RunConfig::integers(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& p : split(raw(key), ',')) out.push_back(static_cast<std::size_t>(parse_integer(key, p)));
  return out;
}

void RunConfig::write_ini(std::ostream& out) const {
  std::string section;
  for (const auto& k : known_keys()) {
    const auto dot = k.key.find('.');
    const std::string s = k.key.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    const std::string& v = values_.at(k.key);
    const bool quote = v.empty() || v.find_first_of(" ;#") != std::string::npos;
    out << k.key.substr(dot + 1) << " = " << (quote ? "\"" + v + "\"" : v) << '\n';
  }
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& k : known_keys()) {
    const auto dot = k.key.find('.');
    auto& slot = j[k.key.substr(0, dot)][k.key.substr(dot + 1)];
    switch (k.kind) {
      case Kind::real: slot = real(k.key); break;
      case Kind::integer: slot = seed(k.key); break;
      case Kind::boolean: slot = boolean(k.key); break;
      case Kind::text: slot = raw(k.key); break;
      case Kind::reals: slot = reals(k.key); break;
      case Kind::integers: slot = integers(k.key); break;
    }
  }
  return j;
}

data::SyntheticOptions synthetic_options(const RunConfig& c) {
  data::SyntheticOptions o;
  o.rate = c.real("data.rate");
  o.duration_s = c.real("synthetic.duration_s");
  o.hard_fraction = c.real("synthetic.hard_fraction");
  o.reversed_fraction = c.real("synthetic.reversed_fraction");
  o.opposite_polarity = c.real("synthetic.opposite_polarity");
  o.va_t_wave = c.real("synthetic.va_t_wave");
  o.noise_min = c.real("synthetic.noise_min");
  o.noise_max = c.real("synthetic.noise_max");
  o.hard_noise = c.real("synthetic.hard_noise");
  for (double f : {o.hard_fraction, o.reversed_fraction, o.opposite_polarity})
    if (f < 0 || f > 1) throw ConfigError("synthetic fractions must lie in [0, 1]");
  if (!(o.duration_s > 0)) throw ConfigError("synthetic.duration_s must be positive");
  return o;
}

data::SegmentOptions segment_options(const RunConfig& c) {
  data::SegmentOptions o;
  o.window = c.integer("data.window");
  o.stride_va = c.integer("data.stride_va");
  o.stride_nonva = c.integer("data.stride_nonva");
  o.normalize = c.boolean("data.normalize");
  if (o.window == 0 || o.stride_va == 0 || o.stride_nonva == 0)
    throw ConfigError("segment window and strides must be positive");
  return o;
}

namespace {

ad::Precision precision_of(const std::string& s) {
  if (s == "f32") return ad::Precision::f32;
  if (s == "f64") return ad::Precision::f64;
  throw ConfigError("model.precision: expected f32 or f64, got '" + s + "'");
}

}  // namespace

ModelSpec model_spec(const RunConfig& c) {
  ModelSpec m;
  m.kind = c.text("model.kind");
  const auto prec = precision_of(c.text("model.precision"));
  const std::size_t len = c.integer("data.window");
  if (m.kind == "tiny") {
    m.tiny.input_length = len;
    m.tiny.channels = c.integer("tiny.channels");
    m.tiny.kernel = c.integer("tiny.kernel");
    m.tiny.stride = c.integer("tiny.stride");
    m.tiny.precision = prec;
  } else if (m.kind == "resnet") {
    auto& r = m.resnet;
    r.stages = c.integer("resnet.stages");
    r.blocks_per_stage = c.integer("resnet.blocks_per_stage");
    r.stem_channels = c.integer("resnet.stem_channels");
    r.stage_channels = c.integers("resnet.stage_channels");
    r.kernel = c.integer("resnet.kernel");
    r.groups = c.integer("resnet.groups");
    r.dropout = c.real("resnet.dropout");
    r.downsample_stages = c.integers("resnet.downsample_stages");
    r.input_length = len;
    r.precision = prec;
    try {
      r.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("model.kind: expected tiny or resnet, got '" + m.kind + "'");
  }
  return m;
}

nn::Network ModelSpec::build(std::uint64_t seed) const {
  return kind == "tiny" ? nn::tiny_model(seed, tiny) : nn::build_model(resnet, seed);
}

json ModelSpec::to_json() const {
  if (kind == "tiny")
    return {{"kind", kind},
            {"input_length", tiny.input_length},
            {"channels", tiny.channels},
            {"kernel", tiny.kernel},
            {"stride", tiny.stride},
            {"precision", tiny.precision == ad::Precision::f32 ? "f32" : "f64"}};
  return {{"kind", kind},
          {"stages", resnet.stages},
          {"blocks_per_stage", resnet.blocks_per_stage},
          {"stem_channels", resnet.stem_channels},
          {"stage_channels", resnet.stage_channels},
          {"kernel", resnet.kernel},
          {"groups", resnet.groups},
          {"dropout", resnet.dropout},
          {"downsample_stages", resnet.downsample_stages},
          {"input_length", resnet.input_length},
          {"precision", resnet.precision == ad::Precision::f32 ? "f32" : "f64"}};
}

meta::MetaConfig meta_config(const RunConfig& c) {
  meta::MetaConfig m;
  try {
    m.update_lr = c.reals("meta.update_lr").front();
    m.meta_lr = c.reals("meta.meta_lr").front();
    m.updates = c.integers("meta.updates").front();
    m.k = c.integer("meta.k");
    m.batch_size = c.integer("meta.batch_size");
    m.max_iter = c.integer("meta.max_iter");
    m.outer_loss = meta::parse_outer_loss(c.text("meta.outer_loss"));
    m.gradient = meta::parse_meta_gradient(c.text("meta.gradient"));
    m.without_replacement = c.boolean("meta.without_replacement");
    m.patience = c.integer("meta.patience");
    m.max_iterations = c.integer("meta.max_iterations");
    m.hvp_eps = c.real("meta.hvp_eps");
    m.seed = c.seed("run.seed");
    m.selection = c.text("run.method") == "maml+cl" ? meta::TaskSelection::curriculum
                                                     : meta::TaskSelection::uniform;
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

meta::MetaGrid meta_grid(const RunConfig& c) {
  meta::MetaGrid g;
  g.update_lr = c.reals("meta.update_lr");
  g.meta_lr = c.reals("meta.meta_lr");
  g.updates = c.integers("meta.updates");
  return g;
}

meta::DirectConfig direct_config(const RunConfig& c) {
  meta::DirectConfig d;
  d.lr = c.reals("direct.lr").front();
  d.minibatch = c.integers("direct.minibatch").front();
  if (!(d.lr > 0) || d.minibatch == 0) throw ConfigError("direct.lr and direct.minibatch must be positive");
  return d;
}

meta::DirectGrid direct_grid(const RunConfig& c) {
  meta::DirectGrid g;
  g.lr = c.reals("direct.lr");
  g.minibatch = c.integers("direct.minibatch");
  return g;
}

adapt::AdaptGrid adapt_grid(const RunConfig& c, bool pre_fine_tune) {
  adapt::AdaptGrid g;
  g.pre_fine_tune = pre_fine_tune;
  g.pft_iterations = c.integers("adapt.pft_iterations");
  g.beta1 = c.reals("adapt.beta1");
  g.beta2 = c.reals("adapt.beta2");
  g.learning_rate = c.reals("adapt.learning_rate");
  try {
    g.mode = adapt::parse_pre_fine_tune_mode(c.text("adapt.mode"));
    g.max_steps = c.integer("adapt.max_steps");
    g.plateau_tol = c.real("adapt.plateau_tol");
    for (const auto& row : g.expand()) row.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

ablation::AblationPlan ablation_plan(const RunConfig& c) {
  ablation::AblationPlan p;
  p.pretrain_runs = c.integer("ablation.pretrain_runs");
  p.adapt_runs = c.integer("adapt.runs");
  p.seed = c.seed("run.seed");
  p.k = c.integer("adapt.k");
  p.meta = meta_config(c);
  p.direct = direct_config(c);
  p.pre_fine_tune_grid = adapt_grid(c, true);
  p.fine_tune_grid = adapt_grid(c, false);
  if (p.pretrain_runs == 0 || p.adapt_runs == 0) throw ConfigError("run counts must be positive");
  return p;
}

ablation::Cohort load_cohort(const RunConfig& c) {
  const auto seg = segment_options(c);
  const double rate = c.real("data.rate");
  std::vector<data::TaskDataset> tasks;
  const std::string dir = c.text("data.dir");
  if (dir.empty()) {
    tasks = data::generate_synthetic_cohort(c.integer("synthetic.subjects"), c.seed("synthetic.seed"),
                                            synthetic_options(c), seg);
  } else {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".csv" || ext == ".mva")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw data::ParseError(dir, 0, "no .csv or .mva records found");
    std::vector<data::Record> records;
    for (const auto& f : files) records.push_back(data::load_record(f));
    tasks = data::build_tasks(records, seg, rate);
  }
  const std::size_t n_test = c.integer("data.test_subjects");
  const std::size_t n_val = c.integer("data.val_subjects");
  if (tasks.size() < n_test + n_val + 1)
    throw ConfigError(std::to_string(tasks.size()) + " subjects cannot supply " + std::to_string(n_test) +
                      " held-out and " + std::to_string(n_val) + " validation subjects plus training subjects");
  const std::uint64_t s = c.seed("data.split_seed");
  auto outer = data::split_meta_sets(tasks, n_test, mix_seed(s, 0x74657374ULL));
  auto inner = data::split_meta_sets(outer.train, n_val, mix_seed(s, 0x76616cULL));
  return {std::move(inner.train), std::move(inner.val), std::move(outer.val)};
}

}  // namespace metava::cli
