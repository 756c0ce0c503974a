#include <evikit/refid.hpp>

#include <evikit/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace evikit {

using nn::Tensor;

void RefidConfig::validate() const
{
  if (scales < 1)
    throw ValidationError("model.scales must be >= 1");
  if (base_channels < 1)
    throw ValidationError("model.base_channels must be >= 1");
  if (n_interp < 0)
    throw ValidationError("model.n_interp must be >= 0");
  if (residual_blocks_per_evr < 0 || image_residual_blocks < 0)
    throw ValidationError("residual block counts must be >= 0");
  if (exposure_voxel_bins < 2)
    throw ValidationError("model.exposure_voxel_bins must be >= 2");
  if (image_channels != 1 && image_channels != 3)
    throw ValidationError("model.image_channels must be 1 or 3");
  if (squeeze_reduction < 1 || base_channels % squeeze_reduction != 0)
    throw ValidationError("model.base_channels must be divisible by model.squeeze_reduction");
  if (scales > 8)
    throw ValidationError("model.scales must be <= 8");
}

RefidInputs make_refid_inputs(const ExposedFrame& left, const ExposedFrame& right, const EventStream& stream,
                              const RefidConfig& cfg)
{
  cfg.validate();
  left.validate();
  right.validate();
  if (!(left.t_e < right.t_s))
    throw ValidationError("left exposure must end before the right exposure starts");
  RefidInputs in;
  in.left = left.image;
  in.right = right.image;
  in.left_exposure = exposure_voxel(stream, left, cfg.exposure_voxel_bins);
  in.right_exposure = exposure_voxel(stream, right, cfg.exposure_voxel_bins);
  auto pair = bidirectional_pair(slice(stream, left.t_e, right.t_s), cfg.n_interp);
  in.forward = std::move(pair.forward);
  in.backward = std::move(pair.backward);
  return in;
}

std::vector<TrainingSample> make_training_samples(const FrameSequence& seq, const BlurredSequence& blurred,
                                                  const EventStream& stream, const RefidConfig& cfg)
{
  std::vector<TrainingSample> out;
  for (std::size_t w = 0; w + 1 < blurred.blurry.size(); ++w) {
    const std::size_t first = blurred.window_starts[w + 1] - std::size_t(cfg.n_interp) - 1;
    const std::size_t last = blurred.window_starts[w + 1];
    if (blurred.window_starts[w + 1] < std::size_t(cfg.n_interp) + 1 || last >= seq.size() ||
        seq.timestamps[first] != blurred.blurry[w].t_e)
      throw ValidationError("blur skip must equal n_interp (" + std::to_string(cfg.n_interp) + ")");
    TrainingSample sample{make_refid_inputs(blurred.blurry[w], blurred.blurry[w + 1], stream, cfg), {}};
    for (std::size_t k = first; k <= last; ++k)
      sample.targets.push_back(seq.frames[k]);
    out.push_back(std::move(sample));
  }
  return out;
}

Tensor tensor_from_frame(const Frame& frame)
{
  return Tensor({std::size_t(frame.channels()), std::size_t(frame.height()), std::size_t(frame.width())},
                std::vector<double>(frame.data().begin(), frame.data().end()));
}

Frame frame_from_tensor(const Tensor& t)
{
  if (t.rank() != 3)
    throw ValidationError("frame_from_tensor needs a CxHxW tensor, got " + nn::to_string(t.shape()));
  return Frame(int(t.dim(2)), int(t.dim(1)), int(t.dim(0)), std::vector<double>(t.data().begin(), t.data().end()));
}

namespace {

Tensor tensor_from_span(std::span<const double> data, std::size_t c, std::size_t h, std::size_t w)
{
  return Tensor({c, h, w}, std::vector<double>(data.begin(), data.end()));
}

Tensor voxel_tensor(const VoxelGrid& g)
{
  return tensor_from_span(g.data(), std::size_t(g.bins()), std::size_t(g.height()), std::size_t(g.width()));
}

} // namespace

Refid::Refid(const RefidConfig& cfg) : cfg_(cfg)
{
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const int c0 = cfg_.base_channels;
  const int image_in = 2 * (cfg_.image_channels + cfg_.exposure_voxel_bins);

  image_head_ = nn::Conv2d(image_in, c0, 3, 1, 1, rng);
  for (int j = 0; j < cfg_.scales; ++j) {
    const int cj = cfg_.channels_at(j);
    if (j > 0)
      image_down_.emplace_back(cfg_.channels_at(j - 1), cj, 3, 2, 1, rng);
    image_blocks_.emplace_back();
    for (int b = 0; b < cfg_.image_residual_blocks; ++b)
      image_blocks_.back().emplace_back(cj, rng);
  }

  event_head_forward_ = nn::Conv2d(2, c0, 3, 1, 1, rng);
  event_head_backward_ = nn::Conv2d(2, c0, 3, 1, 1, rng);
  for (int j = 0; j < cfg_.scales; ++j) {
    const int cj = cfg_.channels_at(j);
    evr_forward_.emplace_back(cj, cfg_.residual_blocks_per_evr, rng);
    evr_backward_.emplace_back(cj, cfg_.residual_blocks_per_evr, rng);
    merge_.emplace_back(2 * cj, cj, 3, 1, 1, rng);
    egaca_.emplace_back(cj, cfg_.squeeze_reduction, cfg_.shared_squeeze, rng);
    if (j + 1 < cfg_.scales) {
      down_forward_.emplace_back(cj, cfg_.channels_at(j + 1), 3, 2, 1, rng);
      down_backward_.emplace_back(cj, cfg_.channels_at(j + 1), 3, 2, 1, rng);
    }
  }

  for (int j = 0; j + 1 < cfg_.scales; ++j) {
    up_.emplace_back(cfg_.channels_at(j + 1), cfg_.channels_at(j), 2, 2, rng);
    decode_.emplace_back(2 * cfg_.channels_at(j), cfg_.channels_at(j), 3, 1, 1, rng);
  }
  output_ = nn::Conv2d(c0, cfg_.image_channels, 3, 1, 1, rng);
}

nn::ParameterList Refid::parameters() const
{
  nn::ParameterList out;
  image_head_.collect("image.head", out);
  for (std::size_t j = 0; j < image_blocks_.size(); ++j) {
    if (j > 0)
      image_down_[j - 1].collect("image.down" + std::to_string(j), out);
    for (std::size_t b = 0; b < image_blocks_[j].size(); ++b)
      image_blocks_[j][b].collect("image.s" + std::to_string(j) + ".res" + std::to_string(b), out);
  }
  event_head_forward_.collect("event.head_f", out);
  event_head_backward_.collect("event.head_b", out);
  for (std::size_t j = 0; j < evr_forward_.size(); ++j) {
    const std::string s = "event.s" + std::to_string(j);
    evr_forward_[j].collect(s + ".evr_f", out);
    evr_backward_[j].collect(s + ".evr_b", out);
    merge_[j].collect(s + ".merge", out);
    egaca_[j].collect(s + ".egaca", out);
    if (j < down_forward_.size()) {
      down_forward_[j].collect(s + ".down_f", out);
      down_backward_[j].collect(s + ".down_b", out);
    }
  }
  for (std::size_t j = 0; j < up_.size(); ++j) {
    up_[j].collect("decoder.s" + std::to_string(j) + ".up", out);
    decode_[j].collect("decoder.s" + std::to_string(j) + ".merge", out);
  }
  output_.collect("decoder.out", out);
  return out;
}

std::size_t Refid::parameter_count() const
{
  std::size_t n = 0;
  for (const auto& p : parameters())
    n += p.tensor.numel();
  return n;
}

void Refid::check_inputs(const RefidInputs& in) const
{
  const int h = in.left.height();
  const int w = in.left.width();
  if (!in.left.same_shape(in.right))
    throw ValidationError("left and right frames differ in shape");
  if (in.left.channels() != cfg_.image_channels)
    throw ValidationError("model expects " + std::to_string(cfg_.image_channels) + " image channels, got " +
                          std::to_string(in.left.channels()));
  const int factor = 1 << (cfg_.scales - 1);
  if (h < 1 || w < 1 || h % factor != 0 || w % factor != 0)
    throw ValidationError("frame size " + std::to_string(w) + "x" + std::to_string(h) + " must be divisible by " +
                          std::to_string(factor));
  for (const VoxelGrid* g : {&in.left_exposure, &in.right_exposure})
    if (g->bins() != cfg_.exposure_voxel_bins || g->height() != h || g->width() != w)
      throw ValidationError("exposure voxel grid must be " + std::to_string(cfg_.exposure_voxel_bins) + "x" +
                            std::to_string(h) + "x" + std::to_string(w));
  for (const VoxelGrid* g : {&in.forward, &in.backward})
    if (g->n_interp() != cfg_.n_interp || g->height() != h || g->width() != w)
      throw ValidationError("voxel grid has n = " + std::to_string(g->n_interp()) + " at " +
                            std::to_string(g->width()) + "x" + std::to_string(g->height()) + ", model expects n = " +
                            std::to_string(cfg_.n_interp) + " at " + std::to_string(w) + "x" + std::to_string(h));
}

std::vector<Tensor> Refid::image_features(const RefidInputs& in) const
{
  Tensor x = nn::concat({tensor_from_frame(in.left), voxel_tensor(in.left_exposure), tensor_from_frame(in.right),
                         voxel_tensor(in.right_exposure)});
  std::vector<Tensor> feats;
  x = nn::activation(image_head_(x));
  for (int j = 0; j < cfg_.scales; ++j) {
    if (j > 0)
      x = nn::activation(image_down_[j - 1](x));
    for (const auto& block : image_blocks_[j])
      x = block(x);
    feats.push_back(x);
  }
  return feats;
}

std::vector<Tensor> Refid::forward(const RefidInputs& in) const
{
  check_inputs(in);
  const int n = cfg_.n_interp;
  const int steps = n + 2;
  const int scales = cfg_.scales;
  const std::size_t h = std::size_t(in.left.height());
  const std::size_t w = std::size_t(in.left.width());

  const std::vector<Tensor> image = image_features(in);

  auto zero_state = [&](int j) {
    return Tensor::zeros({std::size_t(cfg_.channels_at(j)), h >> j, w >> j});
  };
  // Iteration k covers the sub-voxel ending at bin k of its own grid; the
  // first iteration reuses sub-voxel 1.
  auto sub_tensor = [&](const VoxelGrid& g, int k) {
    return tensor_from_span(subvoxel(g, std::max(k, 1)), 2, h, w);
  };

  // Backward sweep: k = n+1 .. 0, reading the reversed grid.
  std::vector<std::vector<Tensor>> backward_feats(static_cast<std::size_t>(steps));
  if (cfg_.bidirectional) {
    std::vector<Tensor> state;
    for (int j = 0; j < scales; ++j)
      state.push_back(zero_state(j));
    for (int k = n + 1; k >= 0; --k) {
      Tensor x = nn::activation(event_head_backward_(sub_tensor(in.backward, n + 1 - k)));
      for (int j = 0; j < scales; ++j) {
        nn::EvrOutput r = evr_backward_[j](x, state[j]);
        state[j] = r.hidden;
        backward_feats[k].push_back(r.features);
        if (j + 1 < scales)
          x = nn::activation(down_backward_[j](r.features));
      }
    }
  } else {
    for (int k = 0; k < steps; ++k)
      for (int j = 0; j < scales; ++j)
        backward_feats[k].push_back(zero_state(j));
  }

  // Forward sweep with fusion, then decode each iteration.
  std::vector<Tensor> outputs;
  std::vector<Tensor> state;
  for (int j = 0; j < scales; ++j)
    state.push_back(zero_state(j));
  for (int k = 0; k < steps; ++k) {
    Tensor x = nn::activation(event_head_forward_(sub_tensor(in.forward, k)));
    std::vector<Tensor> skips;
    for (int j = 0; j < scales; ++j) {
      nn::EvrOutput r = evr_forward_[j](x, state[j]);
      state[j] = r.hidden;
      Tensor merged = nn::activation(merge_[j](nn::concat({backward_feats[k][j], r.features})));
      Tensor fused = egaca_[j](merged, image[j]);
      skips.push_back(fused);
      if (j + 1 < scales)
        x = nn::activation(down_forward_[j](fused));
    }
    Tensor d = skips.back();
    for (int j = scales - 2; j >= 0; --j) {
      Tensor up = nn::activation(up_[j](d));
      d = nn::activation(decode_[j](nn::concat({up, skips[j]})));
    }
    outputs.push_back(output_(d));
  }
  return outputs;
}

nn::Tensor refid_loss(const std::vector<Tensor>& outputs, const std::vector<Frame>& targets)
{
  if (outputs.size() != targets.size() || outputs.empty())
    throw ValidationError("loss needs one target per output (" + std::to_string(outputs.size()) + " outputs, " +
                          std::to_string(targets.size()) + " targets)");
  Tensor total;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    Tensor l = nn::charbonnier_loss(outputs[k], tensor_from_frame(targets[k]));
    total = total.defined() ? nn::add(total, l) : l;
  }
  return nn::scale(total, 1.0 / static_cast<double>(outputs.size()));
}

TrainResult train_toy(const std::vector<TrainingSample>& dataset, const RefidConfig& cfg, std::size_t steps,
                      double lr)
{
  if (dataset.empty())
    throw ValidationError("training needs at least one sample");
  if (!(lr > 0.0))
    throw ValidationError("learning rate must be positive");
  for (const auto& s : dataset)
    if (s.targets.size() != std::size_t(cfg.n_interp + 2))
      throw ValidationError("each sample needs n + 2 = " + std::to_string(cfg.n_interp + 2) + " targets");

  TrainResult result{Refid(cfg), {}};
  result.losses.reserve(steps);
  nn::Adam adam(result.model.parameters(), lr);
  for (std::size_t step = 0; step < steps; ++step) {
    const TrainingSample& sample = dataset[step % dataset.size()];
    adam.zero_grad();
    Tensor loss = refid_loss(result.model.forward(sample.inputs), sample.targets);
    const double value = loss.item();
    if (!std::isfinite(value))
      throw DivergenceError("training loss is not finite", step);
    result.losses.push_back(value);
    loss.backward();
    adam.step();
  }
  return result;
}

} // namespace evikit
