#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

#include <evikit/errors.hpp>
#include <evikit/quality.hpp>
#include <evikit/refid.hpp>
#include <evikit/simulator.hpp>

#include <cmath>
#include <map>
#include <random>

using namespace evikit;
using nn::Tensor;

namespace {

VoxelGrid random_grid(std::mt19937_64& rng, int bins, int h, int w)
{
  VoxelGrid g(bins, h, w, 0.0, 1.0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto& v : g.data())
    v = u(rng);
  return g;
}

Frame random_image(std::mt19937_64& rng, int h, int w, int ch = 1)
{
  Frame f(w, h, ch);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : f.data())
    v = u(rng);
  return f;
}

RefidInputs random_inputs(std::mt19937_64& rng, const RefidConfig& cfg, int h, int w)
{
  return {random_image(rng, h, w, cfg.image_channels), random_image(rng, h, w, cfg.image_channels),
          random_grid(rng, cfg.exposure_voxel_bins, h, w), random_grid(rng, cfg.exposure_voxel_bins, h, w),
          random_grid(rng, cfg.n_interp + 2, h, w), random_grid(rng, cfg.n_interp + 2, h, w)};
}

std::map<std::string, Tensor> by_name(const Refid& m)
{
  std::map<std::string, Tensor> out;
  for (auto& p : m.parameters())
    out.emplace(p.name, p.tensor);
  return out;
}

void copy_into(Tensor dst, const Tensor& src)
{
  std::copy(src.data().begin(), src.data().end(), dst.data().begin());
}

// Ties every forward-direction weight to its backward twin and makes the
// image head and merge convs symmetric in their two input halves.
void symmetrize(const Refid& m)
{
  auto p = by_name(m);
  for (auto& [name, t] : p) {
    const auto pos = name.find("evr_f");
    if (pos != std::string::npos) {
      std::string twin = name;
      twin.replace(pos, 5, "evr_b");
      copy_into(p.at(twin), t);
    }
  }
  copy_into(p.at("event.head_b.weight"), p.at("event.head_f.weight"));
  copy_into(p.at("event.head_b.bias"), p.at("event.head_f.bias"));

  auto mirror_halves = [](Tensor w) {
    const std::size_t co = w.dim(0), ci = w.dim(1), kk = w.dim(2) * w.dim(3), half = ci / 2;
    auto d = w.data();
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < half; ++i)
        for (std::size_t k = 0; k < kk; ++k)
          d[(o * ci + half + i) * kk + k] = d[(o * ci + i) * kk + k];
  };
  mirror_halves(p.at("image.head.weight"));
  for (auto& [name, t] : p)
    if (name.find(".merge.weight") != std::string::npos && name.rfind("event.", 0) == 0)
      mirror_halves(t);
}

} // namespace

TEST_CASE("config validation")
{
  RefidConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.scales = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = RefidConfig{};
  cfg.base_channels = 6; // not divisible by the squeeze reduction
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = RefidConfig{};
  cfg.n_interp = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(RefidConfig{}.channels_at(1) == 16);
}

TEST_CASE("forward produces n + 2 finite frames")
{
  for (int n : {1, 3, 7}) {
    RefidConfig cfg;
    cfg.n_interp = n;
    cfg.base_channels = 4;
    cfg.residual_blocks_per_evr = 1;
    const Refid model(cfg);
    std::mt19937_64 rng(static_cast<std::uint64_t>(n));
    auto in = random_inputs(rng, cfg, 8, 12);
    for (auto& v : in.forward.data())
      v *= 5.0; // inputs out to +-10
    const auto out = model.forward(in);
    REQUIRE(out.size() == std::size_t(n + 2));
    for (const auto& t : out) {
      CHECK(t.shape() == nn::Shape{1, 8, 12});
      for (double v : t.data())
        CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("input validation")
{
  RefidConfig cfg;
  cfg.base_channels = 4;
  const Refid model(cfg);
  std::mt19937_64 rng(1);
  auto in = random_inputs(rng, cfg, 8, 8);
  in.right = random_image(rng, 8, 6);
  CHECK_THROWS_AS(model.forward(in), ValidationError);
  in = random_inputs(rng, cfg, 7, 8);
  CHECK_THROWS_AS(model.forward(in), ValidationError);
  in = random_inputs(rng, cfg, 8, 8);
  in.forward = random_grid(rng, 5, 8, 8);
  CHECK_THROWS_AS(model.forward(in), ValidationError);
}

TEST_CASE("parameters are named deterministically")
{
  RefidConfig cfg;
  const Refid a(cfg), b(cfg);
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
  }
  CHECK(pa.front().name == "image.head.weight");
  CHECK(pa.back().name == "decoder.out.bias");
  CHECK(a.parameter_count() > 10000);

  cfg.seed = 1;
  CHECK(Refid(cfg).parameters()[0].tensor.data()[0] != pa[0].tensor.data()[0]);
}

TEST_CASE("unidirectional variant ignores the backward grid")
{
  RefidConfig cfg;
  cfg.base_channels = 4;
  cfg.bidirectional = false;
  const Refid model(cfg);
  std::mt19937_64 rng(3);
  auto in = random_inputs(rng, cfg, 8, 8);
  const auto a = model.forward(in);
  in.backward = random_grid(rng, cfg.n_interp + 2, 8, 8);
  const auto b = model.forward(in);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(std::equal(a[k].data().begin(), a[k].data().end(), b[k].data().begin()));
}

TEST_CASE("swapping the inputs reverses the outputs under symmetric weights")
{
  for (int n : {1, 3}) {
    RefidConfig cfg;
    cfg.scales = 1;
    cfg.n_interp = n;
    const Refid model(cfg);
    symmetrize(model);
    std::mt19937_64 rng(40 + std::uint64_t(n));
    const auto in = random_inputs(rng, cfg, 8, 8);
    const RefidInputs swapped{in.right, in.left, in.right_exposure, in.left_exposure, in.backward, in.forward};
    const auto a = model.forward(in);
    const auto b = model.forward(swapped);
    for (int k = 0; k < n + 2; ++k)
      for (std::size_t i = 0; i < a[k].numel(); ++i)
        CHECK(b[std::size_t(n + 1 - k)].data()[i] == Catch::Approx(a[k].data()[i]).margin(1e-12));
  }
}

TEST_CASE("unrolled network gradients")
{
  RefidConfig cfg;
  cfg.n_interp = 0; // two recurrent steps
  cfg.base_channels = 4;
  cfg.residual_blocks_per_evr = 1;
  cfg.exposure_voxel_bins = 2;
  cfg.squeeze_reduction = 2;
  const Refid model(cfg);
  std::mt19937_64 rng(9);
  scene::jitter_biases(model.parameters(), rng);
  const auto in = random_inputs(rng, cfg, 4, 4);
  const std::vector<Frame> targets = {random_image(rng, 4, 4), random_image(rng, 4, 4)};
  const auto r = oracle::gradcheck([&] { return refid_loss(model.forward(in), targets); }, model.parameters());
  INFO(r.worst_tensor);
  CHECK(r.worst_error < 1e-4);
}

TEST_CASE("training samples from a blurred sequence")
{
  const auto seq = scene::moving_bar_sequence(16, 16, 13, 100.0, 2.0, 0.8, 4.0);
  RefidConfig cfg;
  cfg.n_interp = 3;
  const auto blurred = synthesize_blur(seq, {5, 3, 100.0});
  const auto stream = simulate(seq, SimConfig{});
  const auto samples = make_training_samples(seq, blurred, stream, cfg);
  REQUIRE(samples.size() == 1);
  REQUIRE(samples[0].targets.size() == 5);
  CHECK(samples[0].targets[0] == seq.frames[4]);
  CHECK(samples[0].targets[4] == seq.frames[8]);
  CHECK(samples[0].inputs.forward.t_begin() == seq.timestamps[4]);
  CHECK(samples[0].inputs.forward.t_end() == seq.timestamps[8]);
  CHECK(samples[0].inputs.left == blurred.blurry[0].image);

  const auto wrong = synthesize_blur(seq, {5, 2, 100.0});
  CHECK_THROWS_AS(make_training_samples(seq, wrong, stream, cfg), ValidationError);
}

TEST_CASE("training is deterministic and reduces the loss")
{
  RefidConfig cfg;
  cfg.base_channels = 4;
  cfg.residual_blocks_per_evr = 1;
  std::mt19937_64 rng(5);
  TrainingSample s{random_inputs(rng, cfg, 8, 8), {}};
  for (int k = 0; k < cfg.n_interp + 2; ++k)
    s.targets.push_back(random_image(rng, 8, 8));
  const auto a = train_toy({s}, cfg, 40, 1e-3);
  const auto b = train_toy({s}, cfg, 40, 1e-3);
  CHECK(a.losses == b.losses);
  CHECK(a.losses.back() < a.losses.front());

  // zero targets: loss heads toward eps
  TrainingSample z = s;
  for (auto& t : z.targets)
    t = Frame(8, 8, 1);
  const auto zr = train_toy({z}, cfg, 60, 1e-2);
  CHECK(zr.losses.back() < 0.2 * zr.losses.front());

  CHECK_THROWS_AS(train_toy({}, cfg, 10, 1e-3), ValidationError);
  try {
    train_toy({s}, cfg, 10, 1e200);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 0);
  }
}
