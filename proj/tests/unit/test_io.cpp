#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <set>

#include "metava/io/checkpoint.hpp"
#include "metava/nn/resnet1d.hpp"

using namespace metava;
using io::CheckpointError;

namespace {

io::Checkpoint sample() {
  io::Checkpoint ck;
  nn::ModelConfig mc;
  mc.stages = 2;
  mc.stage_channels = {16, 32};
  mc.downsample_stages = {2};
  ck.params = nn::xavier_init(mc, 4);
  ck.params.add("extra64", ad::Tensor::from_values({3}, {0.1, -1e-300, 3.0}, ad::Precision::f64));
  ck.config = {{"update_lr", 0.01}, {"method", "maml+cl"}};
  ck.iteration = 12;
  ck.best_validation = 0.1 + 0.2;
  ck.difficulty = curriculum::DifficultyTable::from_values({0.1, 0.6, 0.3}, 2, 50);
  ck.difficulty->counts = {3, 1, 0};
  ck.rng_state = Rng(5).state();
  return ck;
}

bool bit_equal(const ad::ParamSet& a, const ad::ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries()[i];
    const auto& y = b.entries()[i];
    if (x.name != y.name || x.trainable != y.trainable || x.value.shape() != y.value.shape() ||
        x.value.precision() != y.value.precision())
      return false;
    const auto& xv = x.value.values();
    const auto& yv = y.value.values();
    if (std::memcmp(xv.data(), yv.data(), xv.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto ck = sample();
  const auto path = std::filesystem::temp_directory_path() / "metava_test.mvck";
  io::write_checkpoint(ck, path);
  const auto back = io::read_checkpoint(path);
  CHECK(bit_equal(ck.params, back.params));
  CHECK(back.config == ck.config);
  CHECK(back.iteration == 12);
  CHECK(back.best_validation == ck.best_validation);
  REQUIRE(back.difficulty);
  CHECK(back.difficulty->values == ck.difficulty->values);
  CHECK(back.difficulty->counts == ck.difficulty->counts);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(io::serialize(back) == io::serialize(ck));
  std::filesystem::remove(path);

  io::Checkpoint fresh;
  fresh.params.add("w", ad::Tensor::zeros({2}));
  const auto f = io::deserialize(io::serialize(fresh));
  CHECK(std::isinf(f.best_validation));
  CHECK_FALSE(f.difficulty);
}

TEST_CASE("manifest lists every parameter once") {
  const auto ck = sample();
  const std::string data = io::serialize(ck);
  std::uint64_t len;
  std::memcpy(&len, data.data() + 8, 8);
  const auto manifest = nlohmann::json::parse(data.substr(16, len));
  std::set<std::string> names;
  for (const auto& p : manifest.at("parameters")) CHECK(names.insert(p.at("name").get<std::string>()).second);
  CHECK(names.size() == ck.params.size());
  CHECK(data.size() == 16 + len + 8 * ck.params.parameter_count(false));
}

TEST_CASE("damaged checkpoints raise structured errors") {
  const std::string data = io::serialize(sample());
  auto kind_of = [](const std::string& bytes) {
    try {
      io::deserialize(bytes);
    } catch (const CheckpointError& e) {
      return e.kind;
    }
    FAIL("no error");
    return CheckpointError::Kind::io;
  };
  CHECK(kind_of(data.substr(0, data.size() - 3)) == CheckpointError::Kind::truncated);
  CHECK(kind_of(data.substr(0, 10)) == CheckpointError::Kind::truncated);
  CHECK(kind_of(data.substr(0, 40)) == CheckpointError::Kind::truncated);
  std::string bad = data;
  bad[0] = 'X';
  CHECK(kind_of(bad) == CheckpointError::Kind::magic);
  bad = data;
  bad[4] = 9;
  CHECK(kind_of(bad) == CheckpointError::Kind::version);
  CHECK(kind_of(data + "xx") == CheckpointError::Kind::corrupt);
  CHECK_THROWS_AS(io::read_checkpoint("/nonexistent/metava.mvck"), CheckpointError);
}
