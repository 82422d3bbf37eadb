#pragma once

// Versioned parameter container: "MVCK", u32 format version, u64 manifest
// length, JSON manifest, then every tensor as little-endian IEEE-754 doubles
// in manifest order.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "metava/autodiff/param_set.hpp"
#include "metava/curriculum/difficulty.hpp"

namespace metava::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ad::ParamSet params;
  nlohmann::json config = nlohmann::json::object();
  std::size_t iteration = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  std::optional<curriculum::DifficultyTable> difficulty;
  std::string rng_state;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, magic, version, truncated, corrupt };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

std::string serialize(const Checkpoint& ck);
Checkpoint deserialize(std::string_view bytes);

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const curriculum::DifficultyTable& table);
curriculum::DifficultyTable difficulty_from_json(const nlohmann::json& j);

}  // namespace metava::io
