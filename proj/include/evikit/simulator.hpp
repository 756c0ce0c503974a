#pragma once

#include <evikit/event_core.hpp>
#include <evikit/image.hpp>

#include <cstdint>
#include <vector>

namespace evikit {

enum class ThresholdMode { fixed, gaussian_per_pixel };

/// Contrast-threshold event simulator settings. Threshold and floor are in
/// log-intensity units; rates are per pixel per second.
struct SimConfig {
  double c_mean = 0.2;
  double c_std = 0.03;
  ThresholdMode c_mode = ThresholdMode::gaussian_per_pixel;
  double log_eps = 1e-3;
  std::uint64_t seed = 0;
  double noise_rate = 0.0;
  double hot_pixel_fraction = 0.0;
  double hot_pixel_rate = 100.0;

  void validate() const;
};

/// Ordered sharp frames with strictly increasing timestamps (seconds).
struct FrameSequence {
  std::vector<Frame> frames;
  std::vector<double> timestamps;

  static FrameSequence uniform(std::vector<Frame> frames, double fps, double t0 = 0.0);

  void validate() const;
  std::size_t size() const noexcept { return frames.size(); }
};

/// Lower bound on per-pixel Gaussian thresholds.
inline constexpr double kMinContrastThreshold = 0.01;

/// Log-domain slack used when testing a threshold crossing, so levels that are
/// reached exactly (up to rounding) still fire.
inline constexpr double kCrossingTolerance = 1e-9;

/// Per-pixel thresholds the simulator would use for `cfg` on a width x height sensor.
std::vector<double> pixel_thresholds(const SimConfig& cfg, int width, int height);

/// Emits events where log(I + log_eps), linearly interpolated between frames,
/// crosses the reference level by one threshold. The reference moves by exactly
/// one threshold per event. Noise and hot-pixel events follow `cfg`.
EventStream simulate(const FrameSequence& seq, const SimConfig& cfg);

/// Least-squares threshold fitting log-intensity differences between
/// consecutive frames to the per-pixel polarity sums of `stream`.
double estimate_threshold(const FrameSequence& seq, const EventStream& stream, double log_eps = 1e-3);

} // namespace evikit
