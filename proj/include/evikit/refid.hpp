#pragma once

#include <evikit/event_core.hpp>
#include <evikit/image.hpp>
#include <evikit/nn.hpp>
#include <evikit/physical_model.hpp>
#include <evikit/quality.hpp>
#include <evikit/voxel.hpp>

#include <cstdint>
#include <vector>

namespace evikit {

struct RefidConfig {
  int scales = 2;
  int base_channels = 8;
  int n_interp = 1;
  int residual_blocks_per_evr = 2;
  int exposure_voxel_bins = 6;
  int image_channels = 1;
  int image_residual_blocks = 1;
  int squeeze_reduction = 4;
  bool shared_squeeze = false;
  bool bidirectional = true;
  std::uint64_t seed = 0;

  int channels_at(int scale) const { return base_channels << scale; }
  void validate() const;
};

/// Everything one forward pass consumes: the two key frames, their exposure
/// voxels, and the forward/backward voxel grids of the inter-frame events.
struct RefidInputs {
  Frame left;
  Frame right;
  VoxelGrid left_exposure;
  VoxelGrid right_exposure;
  VoxelGrid forward;
  VoxelGrid backward;
};

/// Builds RefidInputs from raw data: exposure voxels from the events inside
/// each exposure, and the bidirectional pair over [left.t_e, right.t_s].
RefidInputs make_refid_inputs(const ExposedFrame& left, const ExposedFrame& right, const EventStream& stream,
                              const RefidConfig& cfg);

nn::Tensor tensor_from_frame(const Frame& frame);
Frame frame_from_tensor(const nn::Tensor& t);

/// Toy-scale recurrent interpolation network.
///
/// An image branch maps concat(I0, E0, I1, E1) to multi-scale features. The
/// event branch runs a backward recurrent sweep over the reversed voxel grid
/// first and caches its per-scale features; the forward sweep then merges
/// those with its own features at every scale, gates the merged features
/// against the image features with EGACA, and downsamples to the next scale.
/// A transposed-conv decoder with skips from the fused encoder emits one frame
/// per iteration: the left key frame, n interpolations, the right key frame.
class Refid {
public:
  explicit Refid(const RefidConfig& cfg);

  const RefidConfig& config() const noexcept { return cfg_; }

  std::vector<nn::Tensor> forward(const RefidInputs& inputs) const;

  /// Parameters in a fixed, name-sorted-by-construction order.
  nn::ParameterList parameters() const;
  std::size_t parameter_count() const;

private:
  void check_inputs(const RefidInputs& inputs) const;
  std::vector<nn::Tensor> image_features(const RefidInputs& inputs) const;

  RefidConfig cfg_;
  nn::Conv2d image_head_;
  std::vector<std::vector<nn::ResidualBlock>> image_blocks_;
  std::vector<nn::Conv2d> image_down_;
  nn::Conv2d event_head_forward_;
  nn::Conv2d event_head_backward_;
  std::vector<nn::EvrBlock> evr_forward_;
  std::vector<nn::EvrBlock> evr_backward_;
  std::vector<nn::Conv2d> merge_;
  std::vector<nn::Egaca> egaca_;
  std::vector<nn::Conv2d> down_forward_;
  std::vector<nn::Conv2d> down_backward_;
  std::vector<nn::TransposedConv2d> up_;
  std::vector<nn::Conv2d> decode_;
  nn::Conv2d output_;
};

struct TrainingSample {
  RefidInputs inputs;
  std::vector<Frame> targets;
};

struct TrainResult {
  Refid model;
  std::vector<double> losses;
};

/// One sample per pair of consecutive blurry frames of `blurred`, which must
/// have been synthesized from `seq` with skip == cfg.n_interp. The targets are
/// the last sharp frame of the left window, the skipped frames, and the first
/// sharp frame of the right window.
std::vector<TrainingSample> make_training_samples(const FrameSequence& seq, const BlurredSequence& blurred,
                                                  const EventStream& stream, const RefidConfig& cfg);

/// Mean Charbonnier loss over all outputs of one sample.
nn::Tensor refid_loss(const std::vector<nn::Tensor>& outputs, const std::vector<Frame>& targets);

/// Adam (beta1 0.9, beta2 0.999) on the mean Charbonnier loss, cycling through
/// the dataset. Records the loss of every step before its update. Throws
/// DivergenceError if the loss stops being finite.
TrainResult train_toy(const std::vector<TrainingSample>& dataset, const RefidConfig& cfg, std::size_t steps,
                      double lr);

} // namespace evikit
