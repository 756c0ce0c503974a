#pragma once

#include <evikit/image.hpp>
#include <evikit/physical_model.hpp>
#include <evikit/simulator.hpp>
#include <evikit/tensor.hpp>

#include <vector>

namespace evikit {

/// Blur synthesis protocol: average `frames_per_blur` consecutive sharp
/// frames per blurry frame, withhold `skip` sharp frames between windows.
struct BlurProtocol {
  int frames_per_blur = 11;
  int skip = 1;
  double fps = 240.0;

  void validate() const;
};

struct GroundTruthFrame {
  Frame image;
  double t = 0.0;
  std::size_t source_index = 0;
};

struct BlurredSequence {
  std::vector<ExposedFrame> blurry;
  /// Withheld frames between consecutive windows, in time order; (blurry.size() - 1) * skip entries.
  std::vector<GroundTruthFrame> ground_truth;
  /// Index of the first sharp frame of every window.
  std::vector<std::size_t> window_starts;
};

BlurredSequence synthesize_blur(const FrameSequence& seq, const BlurProtocol& proto);

/// Identical inputs report this value instead of +inf.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), MSE over all channels jointly, capped at kPsnrCap.
double psnr(const Frame& a, const Frame& b, double peak = 1.0);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// over the valid region of every channel.
double ssim(const Frame& a, const Frame& b, double peak = 1.0);

/// Mean Charbonnier penalty, differentiable (see nn::charbonnier_loss).
inline nn::Tensor charbonnier(const nn::Tensor& pred, const nn::Tensor& target, double eps = 1e-6)
{
  return nn::charbonnier_loss(pred, target, eps);
}

} // namespace evikit
