#include <catch2/catch_amalgamated.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/checkpoint.hpp>
#include <evikit/errors.hpp>

#include <cstring>
#include <filesystem>
#include <random>

using namespace evikit;

namespace {

WeightFile random_weights(std::mt19937_64& rng)
{
  std::uniform_int_distribution<int> count(0, 6), rank(0, 4), dim(1, 5), len(1, 20);
  std::uniform_real_distribution<float> val(-3.0f, 3.0f);
  WeightFile f;
  f.config = {{"seed", int(rng() % 1000)}, {"tag", "x"}};
  const int n = count(rng);
  for (int a = 0; a < n; ++a) {
    NamedArray arr;
    arr.name = "w" + std::to_string(a) + std::string(std::size_t(len(rng)), 'q');
    std::size_t total = 1;
    for (int r = rank(rng); r > 0; --r) {
      arr.shape.push_back(std::uint32_t(dim(rng)));
      total *= arr.shape.back();
    }
    for (std::size_t i = 0; i < total; ++i)
      arr.data.push_back(val(rng));
    f.arrays.push_back(std::move(arr));
  }
  return f;
}

} // namespace

TEST_CASE("RWT1 layout")
{
  WeightFile f;
  f.config = nlohmann::json::object();
  f.arrays.push_back({"ab", {2}, {1.0f, -2.0f}});
  const auto bytes = encode_rwt1(f);
  // magic, u32 len, "{}", u32 name len, name, u32 rank, u32 dim, 2 f32
  REQUIRE(bytes.size() == 4 + 4 + 2 + 4 + 2 + 4 + 4 + 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "RWT1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == '{');
  CHECK(bytes[10] == 2);
  CHECK(bytes[14] == 'a');
  CHECK(bytes[16] == 1);
  CHECK(bytes[20] == 2);
  float v;
  std::memcpy(&v, &bytes[28], 4);
  CHECK(v == -2.0f);

  const auto back = decode_rwt1(bytes);
  CHECK(back.arrays == f.arrays);
}

TEST_CASE("RWT1 round trips and rejects damage")
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto bytes = encode_rwt1(random_weights(rng));
    CHECK(encode_rwt1(decode_rwt1(bytes)) == bytes);
  }
  auto bytes = encode_rwt1(random_weights(rng));
  auto bad = bytes;
  bad[1] = 'X';
  try {
    decode_rwt1(bad);
    FAIL("no error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  WeightFile one;
  one.config = {{"a", 1}};
  one.arrays.push_back({"w", {3}, {1, 2, 3}});
  auto trunc = encode_rwt1(one);
  trunc.pop_back();
  CHECK_THROWS_AS(decode_rwt1(trunc), FormatError);
}

TEST_CASE("model weights survive a save/load cycle")
{
  RefidConfig cfg;
  cfg.base_channels = 4;
  cfg.seed = 12;
  const Refid model(cfg);
  const auto path = std::filesystem::temp_directory_path() / "evikit_ckpt_test.rwt1";
  save_weights(model, path);
  const Refid loaded = load_weights(path);
  CHECK(loaded.config().base_channels == 4);
  CHECK(loaded.config().seed == 12);
  const auto a = model.parameters(), b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    for (std::size_t k = 0; k < a[i].tensor.numel(); ++k)
      CHECK(b[i].tensor.data()[k] == double(float(a[i].tensor.data()[k])));
  }
  // saving the loaded model reproduces the file
  const auto again = std::filesystem::temp_directory_path() / "evikit_ckpt_test2.rwt1";
  save_weights(loaded, again);
  CHECK(io::read_file(path) == io::read_file(again));

  auto wf = weights_from_model(model);
  wf.arrays.pop_back();
  CHECK_THROWS_AS(model_from_weights(wf), FormatError);
  wf = weights_from_model(model);
  wf.arrays[0].shape[0] += 1;
  CHECK_THROWS_AS(model_from_weights(wf), FormatError);
  CHECK_THROWS_AS(load_weights(std::filesystem::temp_directory_path() / "no_such.rwt1"), IoError);
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}
