#include "metava/io/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "metava/util/bytes.hpp"

namespace metava::io {

using nlohmann::json;
using Kind = CheckpointError::Kind;

namespace {
const std::string_view kMagic = "MVCK";

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double value_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}
}  // namespace

json to_json(const curriculum::DifficultyTable& t) {
  return {{"values", t.values},   {"counts", t.counts},   {"batch_size", t.batch_size},
          {"max_iter", t.max_iter}, {"lowest", t.lowest}, {"completed", t.completed}};
}

curriculum::DifficultyTable difficulty_from_json(const json& j) {
  curriculum::DifficultyTable t;
  t.values = j.at("values").get<std::vector<double>>();
  t.counts = j.at("counts").get<std::vector<std::size_t>>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.max_iter = j.at("max_iter").get<std::size_t>();
  t.lowest = j.at("lowest").get<double>();
  t.completed = j.at("completed").get<std::size_t>();
  if (t.counts.size() != t.values.size()) throw std::invalid_argument("difficulty table sizes differ");
  return t;
}

std::string serialize(const Checkpoint& ck) {
  json params = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : ck.params) {
    params.push_back({{"name", e.name},
                      {"shape", e.value.shape()},
                      {"precision", ad::to_string(e.value.precision())},
                      {"trainable", e.trainable},
                      {"offset", offset},
                      {"count", e.value.numel()}});
    offset += e.value.numel();
  }
  json manifest = {{"parameters", params},
                   {"config", ck.config},
                   {"iteration", ck.iteration},
                   {"best_validation", finite_or_null(ck.best_validation)},
                   {"rng_state", ck.rng_state},
                   {"payload_values", offset}};
  if (ck.difficulty) manifest["difficulty"] = to_json(*ck.difficulty);
  const std::string text = manifest.dump();

  bytes::Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u64(text.size());
  w.raw(text);
  for (const auto& e : ck.params)
    for (double v : e.value.values()) w.f64(v);
  return w.str();
}

Checkpoint deserialize(std::string_view data) {
  bytes::Reader r(data);
  try {
    if (r.raw(4) != kMagic) throw CheckpointError(Kind::magic, "not a checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
      throw CheckpointError(Kind::version, "checkpoint format version " + std::to_string(version) +
                                               ", expected " + std::to_string(kCheckpointVersion));
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw CheckpointError(Kind::truncated, "checkpoint manifest truncated");
    json manifest;
    try {
      manifest = json::parse(r.raw(len));
    } catch (const json::exception& e) {
      throw CheckpointError(Kind::corrupt, std::string("checkpoint manifest unreadable: ") + e.what());
    }
    Checkpoint ck;
    try {
      const auto total = manifest.at("payload_values").get<std::uint64_t>();
      if (total > r.remaining() / 8 || r.remaining() != total * 8)
        throw CheckpointError(r.remaining() < total * 8 ? Kind::truncated : Kind::corrupt,
                              "checkpoint payload has " + std::to_string(r.remaining()) +
                                  " bytes, manifest expects " + std::to_string(total * 8));
      ad::ParamSet params;
      std::uint64_t expected_offset = 0;
      for (const auto& p : manifest.at("parameters")) {
        const auto shape = p.at("shape").get<ad::Shape>();
        const auto count = p.at("count").get<std::uint64_t>();
        if (p.at("offset").get<std::uint64_t>() != expected_offset || count != ad::numel(shape))
          throw CheckpointError(Kind::corrupt, "checkpoint manifest offsets are inconsistent");
        const std::string prec = p.at("precision").get<std::string>();
        if (prec != "f32" && prec != "f64")
          throw CheckpointError(Kind::corrupt, "unknown precision '" + prec + "'");
        std::vector<double> values(count);
        for (auto& v : values) v = r.f64();
        params.add(p.at("name").get<std::string>(),
                   ad::Tensor::from_values(shape, std::move(values),
                                           prec == "f32" ? ad::Precision::f32 : ad::Precision::f64),
                   p.at("trainable").get<bool>());
        expected_offset += count;
      }
      if (expected_offset != total)
        throw CheckpointError(Kind::corrupt, "checkpoint payload size disagrees with parameters");
      ck.params = std::move(params);
      ck.config = manifest.at("config");
      ck.iteration = manifest.at("iteration").get<std::size_t>();
      ck.best_validation = value_or_inf(manifest.at("best_validation"));
      ck.rng_state = manifest.at("rng_state").get<std::string>();
      if (manifest.contains("difficulty")) ck.difficulty = difficulty_from_json(manifest["difficulty"]);
    } catch (const json::exception& e) {
      throw CheckpointError(Kind::corrupt, std::string("checkpoint manifest malformed: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(Kind::corrupt, std::string("checkpoint manifest malformed: ") + e.what());
    }
    return ck;
  } catch (const bytes::Truncated& t) {
    throw CheckpointError(Kind::truncated, std::string("checkpoint truncated: ") + t.what());
  }
}

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string data = serialize(ck);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(Kind::io, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw CheckpointError(Kind::io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace metava::io
